// Command-line front end for the drug-disease association pipeline:
//   synth -> validate -> similarity -> refine -> fit -> score / cv / case-study
// Every command is driven by a single config file; --seed/--out/--threads
// override the corresponding config keys.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "repolearn/pipeline.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    std::string seed_text;
    int threads = 0;
};

repolearn::PipelineConfig resolve_config(const GlobalArgs& args) {
    repolearn::PipelineConfig cfg = repolearn::parse_config(args.config_path);
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    if (!args.seed_text.empty()) {
        cfg.seed = repolearn::detail::parse_u64(args.seed_text, "--seed");
        cfg.seed_set = true;
    }
    if (args.threads > 0) cfg.threads = args.threads;
    return cfg;
}

void add_globals(CLI::App* cmd, GlobalArgs& args) {
    cmd->add_option("--config", args.config_path, "pipeline config file")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides run.output)");
    cmd->add_option("--seed", args.seed_text, "seed override (overrides run.seed)");
    cmd->add_option("--threads", args.threads, "worker cap; never changes results");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"representation-learning pipeline for drug-disease association scoring"};
    app.require_subcommand(1);

    GlobalArgs args;
    std::string disease_id;

    CLI::App* validate = app.add_subcommand("validate", "parse inputs, align catalogs, report drops");
    CLI::App* similarity = app.add_subcommand("similarity", "build and persist the similarity stacks");
    CLI::App* refine = app.add_subcommand("refine", "learn feature vectors from the similarity stacks");
    CLI::App* fit = app.add_subcommand("fit", "fit the bilinear projection model");
    CLI::App* score = app.add_subcommand("score", "score all drug-disease pairs");
    CLI::App* cv = app.add_subcommand("cv", "k-fold cross-validation with AUC/ROC/top-rank metrics");
    CLI::App* case_study = app.add_subcommand("case-study", "leave-disease-out ranking for one disease");
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset in the ingest formats");

    for (CLI::App* cmd : {validate, similarity, refine, fit, score, cv, case_study, synth})
        add_globals(cmd, args);
    case_study->add_option("disease", disease_id, "disease identifier from the catalog")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(validate)) {
            const auto cfg = resolve_config(args);
            const auto report = repolearn::cmd_validate(cfg);
            std::cout << "validate: drugs " << report.n_drugs_raw << " -> " << report.n_drugs_final
                      << ", diseases " << report.n_diseases_raw << " -> "
                      << report.n_diseases_final << ", drops " << report.drops.size() << "\n";
            std::cout << "report: " << repolearn::OutPaths(cfg.output_dir).alignment().string()
                      << "\n";
        } else if (app.got_subcommand(similarity)) {
            const auto cfg = resolve_config(args);
            const auto stacks = repolearn::cmd_similarity(cfg);
            std::cout << "similarity: wrote " << stacks.drug.size() << " drug and "
                      << stacks.disease.size() << " disease matrices under "
                      << repolearn::OutPaths(cfg.output_dir).sim_dir().string() << "\n";
        } else if (app.got_subcommand(refine)) {
            const auto cfg = resolve_config(args);
            const auto refined = repolearn::cmd_refine(cfg);
            std::cout << "refine: " << refined.drugs.size() << " drug and "
                      << refined.diseases.size() << " disease vectors"
                      << (refined.from_stage ? " (from staged files)" : "") << "\n";
        } else if (app.got_subcommand(fit)) {
            const auto cfg = resolve_config(args);
            const auto result = repolearn::cmd_fit(cfg);
            std::cout << "fit: sweeps " << result.sweeps << ", objective "
                      << result.objective_trace.back()
                      << (result.lambda_fallback ? " (lambda fallback engaged)" : "") << "\n";
            std::cout << "model: " << repolearn::OutPaths(cfg.output_dir).model().string() << "\n";
        } else if (app.got_subcommand(score)) {
            const auto cfg = resolve_config(args);
            const auto scores = repolearn::cmd_score(cfg);
            std::cout << "score: " << scores.n_drugs() << " x " << scores.n_diseases()
                      << " pairs -> " << repolearn::OutPaths(cfg.output_dir).scores().string()
                      << "\n";
        } else if (app.got_subcommand(cv)) {
            const auto cfg = resolve_config(args);
            const auto report = repolearn::cmd_cv(cfg);
            std::cout << "cv: k=" << report.k << " mean AUC " << report.mean_auc << " pooled AUC "
                      << report.pooled_auc << "\n";
            std::cout << "report: " << repolearn::OutPaths(cfg.output_dir).cv_report().string()
                      << "\n";
        } else if (app.got_subcommand(case_study)) {
            const auto cfg = resolve_config(args);
            const auto cs = repolearn::cmd_case_study(cfg, disease_id);
            std::cout << "case-study: disease " << disease_id << ", "
                      << cs.removed_true_drugs.size() << " associations held out\n";
            std::cout << "table: " << repolearn::OutPaths(cfg.output_dir).case_study().string()
                      << "\n";
        } else if (app.got_subcommand(synth)) {
            const auto cfg = resolve_config(args);
            const auto config_path = repolearn::cmd_synth(cfg);
            std::cout << "synth: dataset written, run other commands with --config "
                      << config_path.string() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << "The command aborted before completing; existing outputs were left in place."
                  << "\n";
        return 1;
    }
    return 0;
}
