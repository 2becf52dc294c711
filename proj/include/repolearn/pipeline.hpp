#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "repolearn/config.hpp"
#include "repolearn/evalkit.hpp"
#include "repolearn/imc.hpp"
#include "repolearn/ingest.hpp"
#include "repolearn/refine.hpp"
#include "repolearn/simkit.hpp"

namespace repolearn {

namespace fs = std::filesystem;

// All outputs land via temp-file-plus-rename so a crash never leaves a
// half-written artifact behind.
inline void atomic_write_file(const fs::path& path, const std::string& content) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Staged artifact locations under the output directory.
struct OutPaths {
    fs::path root;

    explicit OutPaths(const std::string& out) : root(out) {}
    fs::path sim_dir() const { return root / "similarity"; }
    fs::path sim(const std::string& name) const { return sim_dir() / (name + ".sim"); }
    fs::path refined(Side s) const {
        return root / (s == Side::drug ? "refined_drugs.vec" : "refined_diseases.vec");
    }
    fs::path model() const { return root / "model.txt"; }
    fs::path scores() const { return root / "scores.csv"; }
    fs::path cv_report() const { return root / "cv_report.json"; }
    fs::path roc() const { return root / "roc.csv"; }
    fs::path topk() const { return root / "topk.csv"; }
    fs::path case_study() const { return root / "case_study.csv"; }
    fs::path alignment() const { return root / "alignment_report.json"; }
    fs::path refine_report() const { return root / "refine_report.json"; }
    fs::path fit_report() const { return root / "fit_report.json"; }
    fs::path synth_dir() const { return root / "synth"; }
};

inline const std::vector<std::string>& drug_sim_names() {
    static const std::vector<std::string> names{"drug_side_effect_jaccard",
                                                "drug_chemical_tanimoto", "drug_target_sw"};
    return names;
}

inline const std::vector<std::string>& disease_sim_names() {
    static const std::vector<std::string> names{"disease_phenotype", "disease_gene_sw"};
    return names;
}

// ---------------------------------------------------------------------
// Input loading

struct LoadedData {
    EntityCatalog catalog;
    AssociationMatrix associations;
    EmbeddingSet drug_vectors;     // raw, reindexed to catalog order
    EmbeddingSet disease_vectors;  // raw (concept-aggregated), catalog order
    SetAnnotations side_effects;
    FingerprintTable fingerprints;
    SequenceTable drug_targets;
    SequenceTable disease_genes;
    AlignmentReport alignment;
};

inline LoadedData load_inputs(const PipelineConfig& cfg) {
    EmbeddingSet drug_emb = load_embeddings(cfg.inputs.drug_vectors, Side::drug);
    EmbeddingSet disease_file_emb = load_embeddings(cfg.inputs.disease_vectors, Side::disease);

    std::vector<std::string> concept_warnings;
    std::optional<EmbeddingSet> disease_emb;
    if (!cfg.inputs.concept_map.empty()) {
        const ConceptMap cm = load_concept_map(cfg.inputs.concept_map);
        ConceptAggregation agg = aggregate_concept_vectors(cm, disease_file_emb);
        for (const auto& w : agg.missing_concepts)
            concept_warnings.push_back("concept vector missing for " + w);
        for (const auto& w : agg.omitted)
            concept_warnings.push_back("disease omitted (no concept vector found): " + w);
        disease_emb = std::move(agg.vectors);
    } else {
        disease_emb = std::move(disease_file_emb);
    }

    // The association file defines the raw entity universe, first appearance
    // fixing the order.
    const auto pairs = load_association_pairs(cfg.inputs.associations);
    if (pairs.empty())
        throw std::runtime_error(cfg.inputs.associations + ": no associations found");
    std::vector<std::string> raw_drugs, raw_diseases;
    for (const auto& [d, s] : pairs) {
        if (std::find(raw_drugs.begin(), raw_drugs.end(), d) == raw_drugs.end())
            raw_drugs.push_back(d);
        if (std::find(raw_diseases.begin(), raw_diseases.end(), s) == raw_diseases.end())
            raw_diseases.push_back(s);
    }
    EntityCatalog raw_catalog(std::move(raw_drugs), std::move(raw_diseases));

    auto [catalog, report] = align_catalog(raw_catalog, drug_emb, *disease_emb);
    report.warnings = std::move(concept_warnings);

    AssociationLoad assoc = load_associations(cfg.inputs.associations, catalog);
    if (assoc.skipped_unknown > 0)
        report.warnings.push_back(std::to_string(assoc.skipped_unknown) +
                                  " association rows referenced discarded entities");
    if (assoc.duplicates_collapsed > 0)
        report.warnings.push_back(std::to_string(assoc.duplicates_collapsed) +
                                  " duplicate association rows collapsed");

    SetAnnotations side_effects = load_annotation_sets(cfg.inputs.side_effects);
    FingerprintTable fingerprints = load_fingerprints(cfg.inputs.fingerprints);
    SequenceTable drug_targets = load_sequences(cfg.inputs.drug_sequences);
    SequenceTable disease_genes = load_sequences(cfg.inputs.disease_sequences);
    record_coverage(report, "side_effects", catalog.drug_ids(), side_effects);
    record_coverage(report, "fingerprints", catalog.drug_ids(), fingerprints);
    record_coverage(report, "drug_sequences", catalog.drug_ids(), drug_targets);
    record_coverage(report, "disease_sequences", catalog.disease_ids(), disease_genes);

    EmbeddingSet drugs_aligned = drug_emb.reindexed(catalog.drug_ids());
    EmbeddingSet diseases_aligned = disease_emb->reindexed(catalog.disease_ids());
    return LoadedData{std::move(catalog),
                      std::move(assoc.matrix),
                      std::move(drugs_aligned),
                      std::move(diseases_aligned),
                      std::move(side_effects),
                      std::move(fingerprints),
                      std::move(drug_targets),
                      std::move(disease_genes),
                      std::move(report)};
}

// ---------------------------------------------------------------------
// Similarity stage

struct SimilarityStacks {
    std::vector<SimilarityMatrix> drug;
    std::vector<SimilarityMatrix> disease;
    bool from_stage = false;
};

inline AlignmentScoring effective_scoring(const PipelineConfig& cfg) {
    AlignmentScoring sc = cfg.scoring;
    if (!cfg.substitution_table.empty())
        sc.substitutions = load_substitution_table(cfg.substitution_table);
    return sc;
}

inline SimilarityStacks build_similarities(const PipelineConfig& cfg, const LoadedData& data) {
    const AlignmentScoring sc = effective_scoring(cfg);
    SimilarityStacks s;
    s.drug.push_back(build_similarity_matrix(Side::drug, data.catalog.drug_ids(),
                                             data.side_effects, drug_sim_names()[0],
                                             cfg.threads));
    s.drug.push_back(build_similarity_matrix(Side::drug, data.catalog.drug_ids(),
                                             data.fingerprints, drug_sim_names()[1], cfg.threads));
    s.drug.push_back(build_similarity_matrix(Side::drug, data.catalog.drug_ids(),
                                             data.drug_targets, sc, drug_sim_names()[2],
                                             cfg.threads));
    s.disease.push_back(load_similarity_matrix(cfg.inputs.phenotype_similarity,
                                               data.catalog.disease_ids(), Side::disease,
                                               disease_sim_names()[0])
                            .matrix);
    s.disease.push_back(build_similarity_matrix(Side::disease, data.catalog.disease_ids(),
                                                data.disease_genes, sc, disease_sim_names()[1],
                                                cfg.threads));
    return s;
}

// Uses the staged .sim files when the whole stack is present, otherwise
// computes from the structured inputs.
inline SimilarityStacks get_similarities(const PipelineConfig& cfg, const LoadedData& data) {
    const OutPaths paths(cfg.output_dir);
    bool all_staged = true;
    for (const auto& n : drug_sim_names())
        if (!fs::exists(paths.sim(n))) all_staged = false;
    for (const auto& n : disease_sim_names())
        if (!fs::exists(paths.sim(n))) all_staged = false;
    if (!all_staged) return build_similarities(cfg, data);

    SimilarityStacks s;
    s.from_stage = true;
    for (const auto& n : drug_sim_names())
        s.drug.push_back(load_similarity_matrix(paths.sim(n).string(), data.catalog.drug_ids(),
                                                Side::drug, n)
                             .matrix);
    for (const auto& n : disease_sim_names())
        s.disease.push_back(load_similarity_matrix(paths.sim(n).string(),
                                                   data.catalog.disease_ids(), Side::disease, n)
                                .matrix);
    return s;
}

// ---------------------------------------------------------------------
// Refinement stage

struct RefinedEmbeddings {
    EmbeddingSet drugs;
    EmbeddingSet diseases;
    bool from_stage = false;
    RefineReport drug_report;
    RefineReport disease_report;
};

inline RefinedEmbeddings get_refined(const PipelineConfig& cfg, const LoadedData& data) {
    const OutPaths paths(cfg.output_dir);
    if (fs::exists(paths.refined(Side::drug)) && fs::exists(paths.refined(Side::disease))) {
        EmbeddingSet drugs =
            load_embeddings(paths.refined(Side::drug).string(), Side::drug)
                .reindexed(data.catalog.drug_ids());
        EmbeddingSet diseases =
            load_embeddings(paths.refined(Side::disease).string(), Side::disease)
                .reindexed(data.catalog.disease_ids());
        return RefinedEmbeddings{std::move(drugs), std::move(diseases), true, {}, {}};
    }
    const SimilarityStacks sims = get_similarities(cfg, data);
    auto [drugs, drug_report] = refine_all(data.drug_vectors, sims.drug, cfg.refine, cfg.threads);
    auto [diseases, disease_report] =
        refine_all(data.disease_vectors, sims.disease, cfg.refine, cfg.threads);
    return RefinedEmbeddings{std::move(drugs), std::move(diseases), false,
                             std::move(drug_report), std::move(disease_report)};
}

// ---------------------------------------------------------------------
// Report serialization

inline nlohmann::json alignment_report_json(const AlignmentReport& r) {
    nlohmann::json j;
    j["drugs"] = {{"raw", r.n_drugs_raw}, {"final", r.n_drugs_final}};
    j["diseases"] = {{"raw", r.n_diseases_raw}, {"final", r.n_diseases_final}};
    j["drops"] = nlohmann::json::array();
    for (const auto& d : r.drops)
        j["drops"].push_back({{"id", d.id}, {"side", side_name(d.side)}, {"reason", d.reason}});
    j["coverage"] = r.coverage;
    j["warnings"] = r.warnings;
    return j;
}

inline nlohmann::json eval_report_json(const EvalReport& r) {
    nlohmann::json j;
    j["k"] = r.k;
    j["seed"] = r.seed;
    j["fold_auc"] = r.fold_auc;
    j["mean_auc"] = r.mean_auc;
    j["pooled_auc"] = r.pooled_auc;
    j["thresholds"] = r.thresholds;
    j["top_rank_hits"] = r.hits;
    j["heldout_count"] = r.heldout_count;
    j["fold_sweeps"] = r.fold_sweeps;
    j["lambda_fallback"] = r.lambda_fallback;
    j["negatives_policy"] = r.negatives_policy;
    j["roc_policy"] = r.roc_policy;
    j["config"] = r.config_echo;
    j["roc_points"] = r.roc.size();
    return j;
}

inline std::string roc_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "fpr,tpr\n";
    for (const auto& [fpr, tpr] : r.roc)
        out << detail::format_double(fpr) << ',' << detail::format_double(tpr) << '\n';
    return out.str();
}

inline std::string topk_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "threshold,hits\n";
    for (std::size_t t = 0; t < r.thresholds.size(); ++t)
        out << r.thresholds[t] << ',' << r.hits[t] << '\n';
    return out.str();
}

inline std::string case_study_csv(const CaseStudy& cs, const EntityCatalog& catalog) {
    std::ostringstream out;
    out << "rank,drug_id,score,mean_score\n";
    for (const auto& row : cs.rows) {
        out << row.rank << ',' << catalog.drug_ids()[row.drug] << ','
            << detail::format_double(row.score) << ',' << detail::format_double(row.mean_score)
            << '\n';
    }
    return out.str();
}

inline std::string scores_csv(const ScoreMatrix& scores, const EntityCatalog& catalog) {
    std::ostringstream out;
    out << "drug_id,disease_id,score\n";
    for (int j = 0; j < scores.n_diseases(); ++j) {
        const auto ranked = rank_drugs_for_disease(scores, j);
        for (const auto& [i, score] : ranked)
            out << catalog.drug_ids()[i] << ',' << catalog.disease_ids()[j] << ','
                << detail::format_double(score) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------
// Commands. Each is deterministic given (inputs, config, seed) and writes
// its outputs atomically.

inline AlignmentReport cmd_validate(const PipelineConfig& cfg) {
    validate_config(cfg, true);
    const LoadedData data = load_inputs(cfg);
    atomic_write_file(OutPaths(cfg.output_dir).alignment(),
                      alignment_report_json(data.alignment).dump(2) + "\n");
    return data.alignment;
}

inline SimilarityStacks cmd_similarity(const PipelineConfig& cfg) {
    validate_config(cfg, true);
    const LoadedData data = load_inputs(cfg);
    SimilarityStacks s = build_similarities(cfg, data);
    const OutPaths paths(cfg.output_dir);
    for (const auto& sim : s.drug)
        atomic_write_file(paths.sim(sim.name()),
                          serialize_similarity_matrix(sim, data.catalog.drug_ids()));
    for (const auto& sim : s.disease)
        atomic_write_file(paths.sim(sim.name()),
                          serialize_similarity_matrix(sim, data.catalog.disease_ids()));
    return s;
}

inline RefinedEmbeddings cmd_refine(const PipelineConfig& cfg) {
    validate_config(cfg, true);
    const LoadedData data = load_inputs(cfg);
    RefinedEmbeddings refined = get_refined(cfg, data);
    const OutPaths paths(cfg.output_dir);
    atomic_write_file(paths.refined(Side::drug), serialize_embeddings(refined.drugs));
    atomic_write_file(paths.refined(Side::disease), serialize_embeddings(refined.diseases));

    nlohmann::json j;
    j["staged_input"] = refined.from_stage;
    j["drug_total_iterations"] = refined.drug_report.total_iterations;
    j["disease_total_iterations"] = refined.disease_report.total_iterations;
    j["drug_untouched"] = refined.drug_report.untouched.size();
    j["disease_untouched"] = refined.disease_report.untouched.size();
    atomic_write_file(paths.refine_report(), j.dump(2) + "\n");
    return refined;
}

inline FitResult cmd_fit(const PipelineConfig& cfg) {
    validate_config(cfg, true);
    const LoadedData data = load_inputs(cfg);
    const RefinedEmbeddings refined = get_refined(cfg, data);
    ImcOptions opts = cfg.imc;
    opts.seed = cfg.seed;
    FitResult fit = fit_imc(data.associations, refined.drugs, refined.diseases, opts);
    const OutPaths paths(cfg.output_dir);
    atomic_write_file(paths.model(), serialize_model(fit.model, data.catalog.hash()));

    nlohmann::json j;
    j["sweeps"] = fit.sweeps;
    j["objective"] = fit.objective_trace.back();
    j["lambda"] = fit.model.lambda;
    j["lambda_fallback"] = fit.lambda_fallback;
    atomic_write_file(paths.fit_report(), j.dump(2) + "\n");
    return fit;
}

inline ScoreMatrix cmd_score(const PipelineConfig& cfg) {
    validate_config(cfg, true);
    const LoadedData data = load_inputs(cfg);
    const RefinedEmbeddings refined = get_refined(cfg, data);
    const OutPaths paths(cfg.output_dir);
    std::optional<FactorModel> model;
    if (fs::exists(paths.model())) {
        model = load_model(paths.model().string(), data.catalog.hash());
    } else {
        ImcOptions opts = cfg.imc;
        opts.seed = cfg.seed;
        model = fit_imc(data.associations, refined.drugs, refined.diseases, opts).model;
    }
    ScoreMatrix scores = score_all(*model, refined.drugs, refined.diseases);
    atomic_write_file(paths.scores(), scores_csv(scores, data.catalog));
    return scores;
}

inline EvalReport cmd_cv(const PipelineConfig& cfg) {
    validate_config(cfg, true);
    const LoadedData data = load_inputs(cfg);
    const RefinedEmbeddings refined = get_refined(cfg, data);
    ImcOptions opts = cfg.imc;
    opts.seed = cfg.seed;
    EvalReport report = run_cv(data.associations, refined.drugs, refined.diseases, opts,
                               cfg.folds, cfg.seed, cfg.thresholds, cfg.threads);
    report.config_echo = cfg.echo();
    const OutPaths paths(cfg.output_dir);
    atomic_write_file(paths.cv_report(), eval_report_json(report).dump(2) + "\n");
    atomic_write_file(paths.roc(), roc_csv(report));
    atomic_write_file(paths.topk(), topk_csv(report));
    return report;
}

inline CaseStudy cmd_case_study(const PipelineConfig& cfg, const std::string& disease_id) {
    validate_config(cfg, true);
    const LoadedData data = load_inputs(cfg);
    const int disease = data.catalog.index_of(Side::disease, disease_id);
    if (disease < 0) throw std::runtime_error("case-study: unknown disease '" + disease_id + "'");
    const RefinedEmbeddings refined = get_refined(cfg, data);
    ImcOptions opts = cfg.imc;
    opts.seed = cfg.seed;
    CaseStudy cs = leave_disease_out(disease, data.associations, refined.drugs, refined.diseases,
                                     opts);
    atomic_write_file(OutPaths(cfg.output_dir).case_study(),
                      case_study_csv(cs, data.catalog));
    return cs;
}

// ---------------------------------------------------------------------
// Synthetic dataset emission (ingest formats + a ready-to-run config)

inline std::string synth_config_text(const PipelineConfig& cfg, const fs::path& dir) {
    std::ostringstream out;
    out << "[run]\n";
    out << "seed = " << cfg.seed << "\n";
    out << "output = " << (dir / "run").string() << "\n";
    out << "threads = " << cfg.threads << "\n\n";
    out << "[inputs]\n";
    out << "drug_vectors = " << (dir / "drug_vectors.vec").string() << "\n";
    out << "disease_vectors = " << (dir / "concept_vectors.vec").string() << "\n";
    out << "associations = " << (dir / "associations.tsv").string() << "\n";
    out << "side_effects = " << (dir / "side_effects.tsv").string() << "\n";
    out << "fingerprints = " << (dir / "fingerprints.tsv").string() << "\n";
    out << "drug_sequences = " << (dir / "drug_targets.fasta").string() << "\n";
    out << "disease_sequences = " << (dir / "disease_genes.fasta").string() << "\n";
    out << "phenotype_similarity = " << (dir / "phenotype.sim").string() << "\n";
    out << "concept_map = " << (dir / "concept_map.tsv").string() << "\n\n";
    const auto echo = cfg.echo();
    out << "[sw]\n";
    out << "match = " << echo.at("sw.match") << "\n";
    out << "mismatch = " << echo.at("sw.mismatch") << "\n";
    out << "gap = " << echo.at("sw.gap") << "\n\n";
    out << "[refine]\n";
    out << "step_size = " << echo.at("refine.step_size") << "\n";
    out << "max_iters = " << echo.at("refine.max_iters") << "\n";
    out << "rel_tol = " << echo.at("refine.rel_tol") << "\n";
    out << "include_self_pairs = " << echo.at("refine.include_self_pairs") << "\n\n";
    out << "[imc]\n";
    out << "rank = " << echo.at("imc.rank") << "\n";
    out << "lambda = " << echo.at("imc.lambda") << "\n";
    out << "max_sweeps = " << echo.at("imc.max_sweeps") << "\n";
    out << "sweep_tol = " << echo.at("imc.sweep_tol") << "\n";
    out << "cg_tol = " << echo.at("imc.cg_tol") << "\n";
    out << "cg_max_iters = " << echo.at("imc.cg_max_iters") << "\n\n";
    out << "[eval]\n";
    out << "folds = " << echo.at("eval.folds") << "\n";
    out << "thresholds = " << echo.at("eval.thresholds") << "\n\n";
    out << "[synth]\n";  // provenance of the generated dataset
    out << "n_drugs = " << echo.at("synth.n_drugs") << "\n";
    out << "n_diseases = " << echo.at("synth.n_diseases") << "\n";
    out << "dim = " << echo.at("synth.dim") << "\n";
    out << "n_blocks = " << echo.at("synth.n_blocks") << "\n";
    out << "noise = " << echo.at("synth.noise") << "\n";
    out << "assoc_density = " << echo.at("synth.assoc_density") << "\n";
    return out.str();
}

inline fs::path cmd_synth(const PipelineConfig& cfg) {
    validate_config(cfg, false);
    const SyntheticDataset data = generate_synthetic(cfg.synth, cfg.seed);
    const fs::path dir = OutPaths(cfg.output_dir).synth_dir();

    atomic_write_file(dir / "drug_vectors.vec", serialize_embeddings(data.drug_vectors));
    atomic_write_file(dir / "concept_vectors.vec", serialize_embeddings(data.concept_vectors));

    std::ostringstream assoc;
    for (auto [i, j] : data.associations.positives())
        assoc << data.catalog.drug_ids()[i] << '\t' << data.catalog.disease_ids()[j] << '\n';
    atomic_write_file(dir / "associations.tsv", assoc.str());

    std::ostringstream se;
    for (const auto& [id, tokens] : data.side_effects.sets) {
        se << id << '\t';
        for (std::size_t t = 0; t < tokens.size(); ++t) se << (t ? "," : "") << tokens[t];
        se << '\n';
    }
    atomic_write_file(dir / "side_effects.tsv", se.str());

    std::ostringstream fp;
    for (const auto& [id, bits] : data.fingerprints.fingerprints)
        fp << id << '\t' << bits.to_string() << '\n';
    atomic_write_file(dir / "fingerprints.tsv", fp.str());

    auto fasta = [](const SequenceTable& table) {
        std::ostringstream out;
        for (const auto& [id, seqs] : table.sequences) {
            for (std::size_t t = 0; t < seqs.size(); ++t)
                out << '>' << id << '|' << t << '\n' << seqs[t] << '\n';
        }
        return out.str();
    };
    atomic_write_file(dir / "drug_targets.fasta", fasta(data.drug_targets));
    atomic_write_file(dir / "disease_genes.fasta", fasta(data.disease_genes));

    atomic_write_file(dir / "phenotype.sim", serialize_similarity_matrix(
                                                 data.disease_sims[0],
                                                 data.catalog.disease_ids()));

    std::ostringstream cm;
    for (const auto& [disease, concepts] : data.concept_map.entries) {
        cm << disease << '\t';
        for (std::size_t t = 0; t < concepts.size(); ++t) cm << (t ? "," : "") << concepts[t];
        cm << '\n';
    }
    atomic_write_file(dir / "concept_map.tsv", cm.str());

    atomic_write_file(dir / "synth.ini", synth_config_text(cfg, dir));
    return dir / "synth.ini";
}

}  // namespace repolearn
