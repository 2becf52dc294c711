#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "repolearn/evalkit.hpp"
#include "repolearn/imc.hpp"
#include "repolearn/ingest.hpp"
#include "repolearn/refine.hpp"
#include "repolearn/simkit.hpp"

namespace repolearn {

struct InputPaths {
    std::string drug_vectors;
    std::string disease_vectors;
    std::string associations;
    std::string side_effects;
    std::string fingerprints;
    std::string drug_sequences;
    std::string disease_sequences;
    std::string phenotype_similarity;
    std::string concept_map;  // optional
};

struct PipelineConfig {
    InputPaths inputs;
    AlignmentScoring scoring;
    std::string substitution_table;  // optional
    RefineOptions refine;
    ImcOptions imc;
    SynthOptions synth;
    int folds = 10;
    std::vector<int> thresholds = default_rank_thresholds();
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string output_dir = "out";
    int threads = 1;

    // Scientific parameters only: thread count and output location must not
    // leak into reports, so reruns compare byte-identical.
    std::map<std::string, std::string> echo() const {
        std::map<std::string, std::string> e;
        auto num = [](double v) { return detail::format_double(v); };
        e["inputs.drug_vectors"] = inputs.drug_vectors;
        e["inputs.disease_vectors"] = inputs.disease_vectors;
        e["inputs.associations"] = inputs.associations;
        e["inputs.side_effects"] = inputs.side_effects;
        e["inputs.fingerprints"] = inputs.fingerprints;
        e["inputs.drug_sequences"] = inputs.drug_sequences;
        e["inputs.disease_sequences"] = inputs.disease_sequences;
        e["inputs.phenotype_similarity"] = inputs.phenotype_similarity;
        if (!inputs.concept_map.empty()) e["inputs.concept_map"] = inputs.concept_map;
        e["sw.match"] = num(scoring.match);
        e["sw.mismatch"] = num(scoring.mismatch);
        e["sw.gap"] = num(scoring.gap);
        if (!substitution_table.empty()) e["sw.substitution_table"] = substitution_table;
        e["refine.step_size"] = num(refine.step_size);
        e["refine.max_iters"] = std::to_string(refine.max_iters);
        e["refine.rel_tol"] = num(refine.rel_tol);
        e["refine.include_self_pairs"] = refine.include_self_pairs ? "true" : "false";
        e["imc.rank"] = std::to_string(imc.rank);
        e["imc.lambda"] = num(imc.lambda);
        e["imc.max_sweeps"] = std::to_string(imc.max_sweeps);
        e["imc.sweep_tol"] = num(imc.sweep_tol);
        e["imc.cg_tol"] = num(imc.cg_tol);
        e["imc.cg_max_iters"] = std::to_string(imc.cg_max_iters);
        e["eval.folds"] = std::to_string(folds);
        std::string ts;
        for (std::size_t i = 0; i < thresholds.size(); ++i)
            ts += (i ? "," : "") + std::to_string(thresholds[i]);
        e["eval.thresholds"] = ts;
        e["synth.n_drugs"] = std::to_string(synth.n_drugs);
        e["synth.n_diseases"] = std::to_string(synth.n_diseases);
        e["synth.dim"] = std::to_string(synth.dim);
        e["synth.n_blocks"] = std::to_string(synth.n_blocks);
        e["synth.noise"] = num(synth.noise);
        e["synth.assoc_density"] = num(synth.assoc_density);
        e["run.seed"] = std::to_string(seed);
        return e;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw std::runtime_error("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

inline long parse_long(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const long out = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const unsigned long long out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' expects an unsigned integer, got '" +
                                 v + "'");
    }
}

inline double parse_real(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (v.empty() || end == nullptr || *end != '\0')
        throw std::runtime_error("config: key '" + key + "' expects a number, got '" + v + "'");
    return out;
}

}  // namespace detail

// Flat "section.key = value" file; [section] headers prefix the keys that
// follow. '#' and ';' start comments. Unknown keys are rejected.
inline PipelineConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);

    PipelineConfig cfg;
    std::string line, section;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw detail::parse_error(path, lineno, "unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw detail::parse_error(path, lineno, "expected 'key = value'");
        std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;

        if (key == "inputs.drug_vectors") cfg.inputs.drug_vectors = value;
        else if (key == "inputs.disease_vectors") cfg.inputs.disease_vectors = value;
        else if (key == "inputs.associations") cfg.inputs.associations = value;
        else if (key == "inputs.side_effects") cfg.inputs.side_effects = value;
        else if (key == "inputs.fingerprints") cfg.inputs.fingerprints = value;
        else if (key == "inputs.drug_sequences") cfg.inputs.drug_sequences = value;
        else if (key == "inputs.disease_sequences") cfg.inputs.disease_sequences = value;
        else if (key == "inputs.phenotype_similarity") cfg.inputs.phenotype_similarity = value;
        else if (key == "inputs.concept_map") cfg.inputs.concept_map = value;
        else if (key == "sw.match") cfg.scoring.match = detail::parse_real(value, key);
        else if (key == "sw.mismatch") cfg.scoring.mismatch = detail::parse_real(value, key);
        else if (key == "sw.gap") cfg.scoring.gap = detail::parse_real(value, key);
        else if (key == "sw.substitution_table") cfg.substitution_table = value;
        else if (key == "refine.step_size") cfg.refine.step_size = detail::parse_real(value, key);
        else if (key == "refine.max_iters")
            cfg.refine.max_iters = static_cast<int>(detail::parse_long(value, key));
        else if (key == "refine.rel_tol") cfg.refine.rel_tol = detail::parse_real(value, key);
        else if (key == "refine.include_self_pairs")
            cfg.refine.include_self_pairs = detail::parse_bool(value, key);
        else if (key == "imc.rank") cfg.imc.rank = static_cast<int>(detail::parse_long(value, key));
        else if (key == "imc.lambda") cfg.imc.lambda = detail::parse_real(value, key);
        else if (key == "imc.max_sweeps")
            cfg.imc.max_sweeps = static_cast<int>(detail::parse_long(value, key));
        else if (key == "imc.sweep_tol") cfg.imc.sweep_tol = detail::parse_real(value, key);
        else if (key == "imc.cg_tol") cfg.imc.cg_tol = detail::parse_real(value, key);
        else if (key == "imc.cg_max_iters")
            cfg.imc.cg_max_iters = static_cast<int>(detail::parse_long(value, key));
        else if (key == "eval.folds") cfg.folds = static_cast<int>(detail::parse_long(value, key));
        else if (key == "eval.thresholds") {
            cfg.thresholds.clear();
            for (const auto& t : detail::split_char(value, ',')) {
                const std::string tt = detail::trim(t);
                if (!tt.empty()) cfg.thresholds.push_back(static_cast<int>(detail::parse_long(tt, key)));
            }
            if (cfg.thresholds.empty())
                throw detail::parse_error(path, lineno, "eval.thresholds is empty");
        } else if (key == "synth.n_drugs")
            cfg.synth.n_drugs = static_cast<int>(detail::parse_long(value, key));
        else if (key == "synth.n_diseases")
            cfg.synth.n_diseases = static_cast<int>(detail::parse_long(value, key));
        else if (key == "synth.dim") cfg.synth.dim = static_cast<int>(detail::parse_long(value, key));
        else if (key == "synth.n_blocks")
            cfg.synth.n_blocks = static_cast<int>(detail::parse_long(value, key));
        else if (key == "synth.noise") cfg.synth.noise = detail::parse_real(value, key);
        else if (key == "synth.assoc_density")
            cfg.synth.assoc_density = detail::parse_real(value, key);
        else if (key == "run.seed") {
            cfg.seed = detail::parse_u64(value, key);
            cfg.seed_set = true;
        } else if (key == "run.output") cfg.output_dir = value;
        else if (key == "run.threads")
            cfg.threads = static_cast<int>(detail::parse_long(value, key));
        else
            throw detail::parse_error(path, lineno, "unknown config key '" + key + "'");
    }
    return cfg;
}

// Commands that consume the dataset call this; synth does not (it creates
// the files this checks for).
inline void validate_config(const PipelineConfig& cfg, bool require_inputs) {
    if (!cfg.seed_set)
        throw std::runtime_error("config: run.seed is mandatory (set it in the config or pass --seed)");
    if (cfg.folds < 2) throw std::runtime_error("config: eval.folds must be >= 2");
    if (!std::is_sorted(cfg.thresholds.begin(), cfg.thresholds.end()))
        throw std::runtime_error("config: eval.thresholds must be ascending");
    cfg.refine.validate();
    cfg.imc.validate();
    cfg.scoring.validate();
    cfg.synth.validate();
    if (!require_inputs) return;

    auto need = [](const std::string& p, const std::string& key) {
        if (p.empty()) throw std::runtime_error("config: inputs." + key + " is required");
        if (!std::filesystem::exists(p))
            throw std::runtime_error("config: inputs." + key + " file not found: " + p);
    };
    need(cfg.inputs.drug_vectors, "drug_vectors");
    need(cfg.inputs.disease_vectors, "disease_vectors");
    need(cfg.inputs.associations, "associations");
    need(cfg.inputs.side_effects, "side_effects");
    need(cfg.inputs.fingerprints, "fingerprints");
    need(cfg.inputs.drug_sequences, "drug_sequences");
    need(cfg.inputs.disease_sequences, "disease_sequences");
    need(cfg.inputs.phenotype_similarity, "phenotype_similarity");
    if (!cfg.inputs.concept_map.empty() && !std::filesystem::exists(cfg.inputs.concept_map))
        throw std::runtime_error("config: inputs.concept_map file not found: " +
                                 cfg.inputs.concept_map);
    if (!cfg.substitution_table.empty() && !std::filesystem::exists(cfg.substitution_table))
        throw std::runtime_error("config: sw.substitution_table file not found: " +
                                 cfg.substitution_table);
}

}  // namespace repolearn
