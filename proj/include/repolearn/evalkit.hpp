#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "repolearn/imc.hpp"
#include "repolearn/model.hpp"
#include "repolearn/parallel.hpp"
#include "repolearn/rng.hpp"
#include "repolearn/tables.hpp"

namespace repolearn {

// ---------------------------------------------------------------------
// Fold assignment

struct FoldAssignment {
    int k = 0;
    // fold index per positive pair, parallel to AssociationMatrix::positives()
    std::vector<int> fold_of;

    std::vector<std::pair<int, int>> heldout(const AssociationMatrix& assoc, int fold) const {
        std::vector<std::pair<int, int>> out;
        for (std::size_t p = 0; p < fold_of.size(); ++p)
            if (fold_of[p] == fold) out.push_back(assoc.positives()[p]);
        return out;
    }
};

// Seeded uniform shuffle of the positive pairs followed by round-robin
// assignment; fold sizes differ by at most one.
inline FoldAssignment kfold_split(const AssociationMatrix& assoc, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
    const std::size_t n = assoc.count();
    if (n < static_cast<std::size_t>(k))
        throw std::invalid_argument("kfold_split: fewer positives than folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto gen = rng::substream(seed, "eval.folds");
    rng::shuffle(order, gen);
    FoldAssignment fa;
    fa.k = k;
    fa.fold_of.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) fa.fold_of[order[pos]] = static_cast<int>(pos % k);
    return fa;
}

// ---------------------------------------------------------------------
// Ranking metrics

// Mann-Whitney statistic: (#{pos > neg} + 0.5 #{pos == neg}) / (|pos| |neg|),
// computed via a rank sum so large score pools stay cheap.
inline double auc(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        throw std::invalid_argument("auc: both score lists must be non-empty");
    std::vector<std::pair<double, int>> all;
    all.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) all.emplace_back(s, 1);
    for (double s : neg_scores) all.emplace_back(s, 0);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based ranks i+1 .. j
        for (std::size_t t = i; t < j; ++t)
            if (all[t].second) pos_rank_sum += avg_rank;
        i = j;
    }
    const double p = static_cast<double>(pos_scores.size());
    const double n = static_cast<double>(neg_scores.size());
    const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * n);
}

// Threshold sweep over distinct scores, descending; starts at (0,0), ends at
// (1,1). Trapezoidal area under the polyline equals auc() (same tie handling).
inline std::vector<std::pair<double, double>> roc_points(const std::vector<double>& pos_scores,
                                                         const std::vector<double>& neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        throw std::invalid_argument("roc_points: both score lists must be non-empty");
    std::vector<std::pair<double, int>> all;
    all.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) all.emplace_back(s, 1);
    for (double s : neg_scores) all.emplace_back(s, 0);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::pair<double, double>> points;
    points.emplace_back(0.0, 0.0);
    const double p = static_cast<double>(pos_scores.size());
    const double n = static_cast<double>(neg_scores.size());
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        for (std::size_t t = i; t < j; ++t) {
            if (all[t].second)
                ++tp;
            else
                ++fp;
        }
        points.emplace_back(static_cast<double>(fp) / n, static_cast<double>(tp) / p);
        i = j;
    }
    return points;
}

inline double trapezoid_area(const std::vector<std::pair<double, double>>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].first - points[i - 1].first) * 0.5 *
                (points[i].second + points[i - 1].second);
    }
    return area;
}

// For each held-out (drug, disease): the drug's rank by descending score
// within that disease, among drugs not associated with the disease in
// training (ties broken by ascending drug index). Counts are cumulative over
// the ascending thresholds.
inline std::vector<long> top_rank_hits(const ScoreMatrix& scores,
                                       const AssociationMatrix& train,
                                       const std::vector<std::pair<int, int>>& heldout_pairs,
                                       const std::vector<int>& thresholds) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw std::invalid_argument("top_rank_hits: thresholds must be sorted ascending");
    std::vector<long> counts(thresholds.size(), 0);
    for (auto [d, s] : heldout_pairs) {
        const double own = scores.values(d, s);
        long rank = 1;
        for (int i = 0; i < scores.n_drugs(); ++i) {
            if (i == d || train.contains(i, s)) continue;
            const double other = scores.values(i, s);
            if (other > own || (other == own && i < d)) ++rank;
        }
        for (std::size_t t = 0; t < thresholds.size(); ++t)
            if (rank <= thresholds[t]) ++counts[t];
    }
    return counts;
}

// ---------------------------------------------------------------------
// Cross-validation

struct EvalReport {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<double> fold_auc;
    double mean_auc = 0.0;
    double pooled_auc = 0.0;
    std::vector<std::pair<double, double>> roc;  // pooled across folds
    std::vector<int> thresholds;
    std::vector<long> hits;  // cumulative counts per threshold
    long heldout_count = 0;
    std::vector<int> fold_sweeps;
    bool lambda_fallback = false;
    // Protocol notes recorded for transparency; the paper leaves both open.
    std::string negatives_policy = "all pairs unknown in the full association matrix";
    std::string roc_policy = "pooled over per-fold held-out positives and negatives";
    std::map<std::string, std::string> config_echo;
};

inline const std::vector<int>& default_rank_thresholds() {
    static const std::vector<int> t{1, 5, 10, 20, 50};
    return t;
}

// 10-fold protocol: per fold, held-out positives are zeroed in the training
// matrix, the model is refit, and AUC/ROC/top-rank metrics are computed with
// negatives taken from pairs unknown in the FULL matrix. Folds may run
// concurrently; the report is identical for any thread count.
inline EvalReport run_cv(const AssociationMatrix& assoc, const EmbeddingSet& drugs,
                         const EmbeddingSet& diseases, const ImcOptions& opts, int k,
                         std::uint64_t seed,
                         const std::vector<int>& thresholds = default_rank_thresholds(),
                         int threads = 1) {
    const FoldAssignment folds = kfold_split(assoc, k, seed);

    struct FoldOutput {
        std::vector<double> pos, neg;
        std::vector<long> hits;
        double auc_value = 0.0;
        int sweeps = 0;
        bool fallback = false;
    };
    std::vector<FoldOutput> out(k);

    parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t f) {
        const int fold = static_cast<int>(f);
        std::vector<std::pair<int, int>> train_pairs;
        for (std::size_t p = 0; p < assoc.count(); ++p)
            if (folds.fold_of[p] != fold) train_pairs.push_back(assoc.positives()[p]);
        const auto heldout = folds.heldout(assoc, fold);
        AssociationMatrix train(assoc.n_drugs(), assoc.n_diseases(), std::move(train_pairs));
        for (auto [d, s] : heldout) {
            if (train.contains(d, s))
                throw std::logic_error("run_cv: held-out positive leaked into training fold");
        }

        ImcOptions fold_opts = opts;
        fold_opts.seed = rng::splitmix64(seed ^ rng::fnv1a("cv.fit." + std::to_string(fold)));
        const FitResult fit = fit_imc(train, drugs, diseases, fold_opts);
        const ScoreMatrix scores = score_all(fit.model, drugs, diseases);

        FoldOutput& o = out[f];
        o.sweeps = fit.sweeps;
        o.fallback = fit.lambda_fallback;
        o.pos.reserve(heldout.size());
        for (auto [d, s] : heldout) o.pos.push_back(scores.values(d, s));
        o.neg.reserve(static_cast<std::size_t>(assoc.n_drugs()) * assoc.n_diseases() -
                      assoc.count());
        for (int i = 0; i < assoc.n_drugs(); ++i)
            for (int j = 0; j < assoc.n_diseases(); ++j)
                if (!assoc.contains(i, j)) o.neg.push_back(scores.values(i, j));
        o.auc_value = auc(o.pos, o.neg);
        o.hits = top_rank_hits(scores, train, heldout, thresholds);
    });

    EvalReport report;
    report.k = k;
    report.seed = seed;
    report.thresholds = thresholds;
    report.hits.assign(thresholds.size(), 0);
    std::vector<double> all_pos, all_neg;
    for (int f = 0; f < k; ++f) {
        const FoldOutput& o = out[f];
        report.fold_auc.push_back(o.auc_value);
        report.fold_sweeps.push_back(o.sweeps);
        report.lambda_fallback = report.lambda_fallback || o.fallback;
        for (std::size_t t = 0; t < thresholds.size(); ++t) report.hits[t] += o.hits[t];
        report.heldout_count += static_cast<long>(o.pos.size());
        all_pos.insert(all_pos.end(), o.pos.begin(), o.pos.end());
        all_neg.insert(all_neg.end(), o.neg.begin(), o.neg.end());
    }
    report.mean_auc =
        std::accumulate(report.fold_auc.begin(), report.fold_auc.end(), 0.0) / k;
    report.pooled_auc = auc(all_pos, all_neg);
    report.roc = roc_points(all_pos, all_neg);
    return report;
}

// ---------------------------------------------------------------------
// Case studies

struct CaseStudyRow {
    int rank = 0;
    int drug = 0;
    double score = 0.0;
    double mean_score = 0.0;  // mean of this drug's scores over all diseases
};

struct CaseStudy {
    int disease = 0;
    std::vector<CaseStudyRow> rows;       // descending score
    std::vector<int> removed_true_drugs;  // drugs whose association was held out
    int sweeps = 0;
};

// Removes every association of one disease, refits, and ranks all drugs for
// it; the mean-score column contextualizes each drug's score level.
inline CaseStudy leave_disease_out(int disease, const AssociationMatrix& assoc,
                                   const EmbeddingSet& drugs, const EmbeddingSet& diseases,
                                   const ImcOptions& opts) {
    if (disease < 0 || disease >= assoc.n_diseases())
        throw std::invalid_argument("leave_disease_out: disease index out of range");
    std::vector<std::pair<int, int>> train_pairs;
    CaseStudy cs;
    cs.disease = disease;
    for (auto [i, j] : assoc.positives()) {
        if (j == disease)
            cs.removed_true_drugs.push_back(i);
        else
            train_pairs.push_back({i, j});
    }
    if (train_pairs.empty())
        throw std::invalid_argument("leave_disease_out: no training associations remain");
    AssociationMatrix train(assoc.n_drugs(), assoc.n_diseases(), std::move(train_pairs));
    const FitResult fit = fit_imc(train, drugs, diseases, opts);
    cs.sweeps = fit.sweeps;
    const ScoreMatrix scores = score_all(fit.model, drugs, diseases);
    const auto ranked = rank_drugs_for_disease(scores, disease);
    cs.rows.reserve(ranked.size());
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        CaseStudyRow row;
        row.rank = static_cast<int>(r + 1);
        row.drug = ranked[r].first;
        row.score = ranked[r].second;
        row.mean_score = scores.values.row(ranked[r].first).mean();
        cs.rows.push_back(row);
    }
    return cs;
}

// ---------------------------------------------------------------------
// Synthetic benchmark data

struct SynthOptions {
    int n_drugs = 120;
    int n_diseases = 80;
    int dim = 32;
    int n_blocks = 4;
    double noise = 0.1;
    double assoc_density = 0.5;

    void validate() const {
        if (n_drugs < 1 || n_diseases < 1) throw std::invalid_argument("synth: sizes must be >= 1");
        if (n_blocks < 1 || n_blocks > std::min(n_drugs, n_diseases))
            throw std::invalid_argument("synth: n_blocks must be in [1, min(n_drugs, n_diseases)]");
        if (n_blocks > dim)
            throw std::invalid_argument("synth: n_blocks must not exceed the dimension");
        if (noise < 0.0) throw std::invalid_argument("synth: noise must be >= 0");
        if (assoc_density < 0.0 || assoc_density > 1.0)
            throw std::invalid_argument("synth: assoc_density must be in [0,1]");
    }
};

struct SyntheticDataset {
    EntityCatalog catalog;
    EmbeddingSet drug_vectors;     // raw drug embeddings
    EmbeddingSet disease_vectors;  // raw disease embeddings
    EmbeddingSet concept_vectors;  // keyed by concept tokens (file emission path)
    ConceptMap concept_map;
    std::vector<SimilarityMatrix> drug_sims;
    std::vector<SimilarityMatrix> disease_sims;
    AssociationMatrix associations;
    SetAnnotations side_effects;
    FingerprintTable fingerprints;
    SequenceTable drug_targets;
    SequenceTable disease_genes;
    std::vector<int> drug_block;
    std::vector<int> disease_block;
};

namespace detail {

inline std::vector<Vector> orthonormal_centroids(int n_blocks, int dim, std::mt19937_64& gen) {
    std::vector<Vector> basis;
    while (static_cast<int>(basis.size()) < n_blocks) {
        Vector v(dim);
        for (int d = 0; d < dim; ++d) v(d) = rng::normal(gen);
        for (const auto& b : basis) v -= b.dot(v) * b;
        const double n = v.norm();
        if (n < 1e-8) continue;  // essentially never; redraw
        basis.push_back(v / n);
    }
    return basis;
}

inline SimilarityMatrix block_similarity(Side side, std::string name,
                                         const std::vector<int>& blocks, double noise) {
    const int n = static_cast<int>(blocks.size());
    const double within = std::clamp(1.0 - noise, 0.0, 1.0);
    const double across = std::clamp(noise, 0.0, 1.0);
    Matrix values(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            values(i, j) = (i == j) ? 1.0 : (blocks[i] == blocks[j] ? within : across);
    return SimilarityMatrix(side, std::move(name), std::move(values),
                            SimilarityMatrix::full_mask(n));
}

inline std::string padded_id(const char* prefix, int i) {
    std::string num = std::to_string(i);
    return std::string(prefix) + std::string(num.size() >= 4 ? 0 : 4 - num.size(), '0') + num;
}

}  // namespace detail

// Size of the narrow drug blocks; block 0 absorbs the rest. Narrow blocks
// model indications with small candidate pools, which keeps the
// leave-disease-out protocol informative at desk scale.
inline int narrow_block_size(int n_drugs, int n_blocks) {
    return std::max(1, std::min(n_drugs / (2 * n_blocks), 10));
}

// Planted-block benchmark: entities cluster into blocks with shared
// centroids; similarity stacks carry the block structure at contrast
// (1-noise) vs noise; associations connect matched blocks, each pair drawn
// independently at assoc_density. Deterministic for a given seed.
inline SyntheticDataset generate_synthetic(const SynthOptions& o, std::uint64_t seed) {
    o.validate();

    std::vector<std::string> drug_ids(o.n_drugs), disease_ids(o.n_diseases);
    std::vector<int> drug_block(o.n_drugs), disease_block(o.n_diseases);
    const int narrow = narrow_block_size(o.n_drugs, o.n_blocks);
    for (int i = 0; i < o.n_drugs; ++i) {
        drug_ids[i] = detail::padded_id("D", i);
        drug_block[i] = (i < (o.n_blocks - 1) * narrow) ? 1 + i / narrow : 0;
    }
    for (int j = 0; j < o.n_diseases; ++j) {
        disease_ids[j] = detail::padded_id("S", j);
        disease_block[j] = j % o.n_blocks;
    }
    EntityCatalog catalog(drug_ids, disease_ids);

    auto cgen = rng::substream(seed, "synth.centroids");
    const auto centroids = detail::orthonormal_centroids(o.n_blocks, o.dim, cgen);

    // Raw embeddings: centroid plus isotropic Gaussian noise. The noise knob
    // scales the per-coordinate deviation; 3x keeps raw vectors visibly
    // noisier than the similarity stacks so refinement has room to help.
    const double embed_sd = 3.0 * o.noise;
    auto fill_vectors = [&](const char* stream, const std::vector<int>& blocks, int n) {
        auto gen = rng::substream(seed, stream);
        Matrix m(n, o.dim);
        for (int i = 0; i < n; ++i) {
            for (int d = 0; d < o.dim; ++d)
                m(i, d) = centroids[blocks[i]](d) + embed_sd * rng::normal(gen);
        }
        return m;
    };
    Matrix drug_mat = fill_vectors("synth.drug_vectors", drug_block, o.n_drugs);
    Matrix disease_mat = fill_vectors("synth.disease_vectors", disease_block, o.n_diseases);
    EmbeddingSet drug_vectors(Side::drug, drug_ids, drug_mat);
    EmbeddingSet disease_vectors(Side::disease, disease_ids, disease_mat);

    // Idealized similarity stacks: M=3 drug measures, L=2 disease measures.
    std::vector<SimilarityMatrix> drug_sims, disease_sims;
    for (int m = 0; m < 3; ++m)
        drug_sims.push_back(detail::block_similarity(
            Side::drug, "synthetic_drug_sim_" + std::to_string(m), drug_block, o.noise));
    for (int l = 0; l < 2; ++l)
        disease_sims.push_back(detail::block_similarity(
            Side::disease, "synthetic_disease_sim_" + std::to_string(l), disease_block, o.noise));

    // Associations: every matched-block pair enters independently at the
    // requested density.
    auto agen = rng::substream(seed, "synth.assoc");
    std::vector<std::pair<int, int>> positives;
    for (int j = 0; j < o.n_diseases; ++j) {
        for (int i = 0; i < o.n_drugs; ++i) {
            if (drug_block[i] != disease_block[j]) continue;
            if (rng::uniform01(agen) < o.assoc_density) positives.push_back({i, j});
        }
    }
    AssociationMatrix associations(o.n_drugs, o.n_diseases, std::move(positives));

    // Structured inputs mirroring the ingest formats. Coverage gaps are
    // planted on purpose (some drugs lack fingerprints or target sequences)
    // to exercise masking in the full pipeline.
    const double keep_p = std::clamp(1.0 - 2.5 * o.noise, 0.05, 1.0);
    SetAnnotations side_effects;
    {
        auto gen = rng::substream(seed, "synth.side_effects");
        const int pool = 40;
        for (int i = 0; i < o.n_drugs; ++i) {
            std::vector<std::string> tokens;
            for (int t = 0; t < pool; ++t) {
                if (rng::uniform01(gen) < keep_p)
                    tokens.push_back("SE" + std::to_string(drug_block[i]) + "_" +
                                     std::to_string(t));
            }
            side_effects.sets[drug_ids[i]] = make_token_set(std::move(tokens));
        }
    }

    FingerprintTable fingerprints;
    {
        auto gen = rng::substream(seed, "synth.fingerprints");
        const int width = std::max(64, 16 * o.n_blocks);
        const int band = width / o.n_blocks;
        for (int i = 0; i < o.n_drugs; ++i) {
            const bool covered = (i % 17) != 9;
            std::string bits(width, '0');
            for (int p = 0; p < width; ++p) {
                const bool in_band = (p / band) == drug_block[i] ||
                                     (drug_block[i] == o.n_blocks - 1 && p / band >= o.n_blocks);
                const double on_p = in_band ? keep_p : 0.3 * o.noise;
                if (rng::uniform01(gen) < on_p) bits[p] = '1';
            }
            if (covered) fingerprints.insert(drug_ids[i], BitVector::from_string(bits));
        }
    }

    const std::string amino = "ACDEFGHIKLMNPQRSTVWY";
    auto random_seq = [&](std::mt19937_64& gen, int len) {
        std::string s(len, 'A');
        for (int p = 0; p < len; ++p) s[p] = amino[rng::below(gen, amino.size())];
        return s;
    };
    auto mutated = [&](std::mt19937_64& gen, const std::string& proto, double rate) {
        std::string s = proto;
        for (auto& c : s)
            if (rng::uniform01(gen) < rate) c = amino[rng::below(gen, amino.size())];
        return s;
    };
    auto build_sequences = [&](const char* stream, const std::vector<std::string>& ids,
                               const std::vector<int>& blocks, int skip_mod, int skip_rem) {
        auto gen = rng::substream(seed, stream);
        std::vector<std::vector<std::string>> protos(o.n_blocks);
        for (int b = 0; b < o.n_blocks; ++b)
            for (int t = 0; t < 2; ++t) protos[b].push_back(random_seq(gen, 60));
        SequenceTable table;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (static_cast<int>(i) % skip_mod == skip_rem) continue;
            for (int t = 0; t < 2; ++t)
                table.insert(ids[i], mutated(gen, protos[blocks[i]][t], o.noise));
        }
        return table;
    };
    SequenceTable drug_targets =
        build_sequences("synth.sequences.drug", drug_ids, drug_block, 13, 7);
    SequenceTable disease_genes =
        build_sequences("synth.sequences.disease", disease_ids, disease_block, 11, 5);

    // Concept map plus concept-token vectors for the file-based path; most
    // diseases map to a single concept, every fifth to two.
    ConceptMap concept_map;
    std::vector<std::string> concept_tokens;
    std::vector<Vector> concept_rows;
    {
        auto gen = rng::substream(seed, "synth.concepts");
        for (int j = 0; j < o.n_diseases; ++j) {
            const int n_concepts = (j % 5 == 0) ? 2 : 1;
            std::vector<std::string> cs;
            for (int t = 0; t < n_concepts; ++t) {
                std::string token = "C" + std::to_string(j) + "_" + std::to_string(t);
                Vector v = disease_mat.row(j).transpose();
                if (n_concepts > 1) {
                    for (int d = 0; d < o.dim; ++d) v(d) += 0.01 * rng::normal(gen);
                }
                cs.push_back(token);
                concept_tokens.push_back(std::move(token));
                concept_rows.push_back(std::move(v));
            }
            concept_map.insert(disease_ids[j], std::move(cs));
        }
    }
    Matrix concept_mat(concept_tokens.size(), o.dim);
    for (std::size_t r = 0; r < concept_rows.size(); ++r)
        concept_mat.row(r) = concept_rows[r].transpose();
    EmbeddingSet concept_vectors(Side::disease, concept_tokens, std::move(concept_mat));

    return SyntheticDataset{std::move(catalog),
                            std::move(drug_vectors),
                            std::move(disease_vectors),
                            std::move(concept_vectors),
                            std::move(concept_map),
                            std::move(drug_sims),
                            std::move(disease_sims),
                            std::move(associations),
                            std::move(side_effects),
                            std::move(fingerprints),
                            std::move(drug_targets),
                            std::move(disease_genes),
                            std::move(drug_block),
                            std::move(disease_block)};
}

}  // namespace repolearn
