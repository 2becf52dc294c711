#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "repolearn/model.hpp"
#include "repolearn/simkit.hpp"
#include "repolearn/tables.hpp"

namespace repolearn {

namespace detail {

inline std::runtime_error parse_error(const std::string& path, long line, const std::string& msg) {
    return std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::vector<std::string> split_char(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& tok, const std::string& path, long line) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == nullptr || *end != '\0' || tok.empty())
        throw parse_error(path, line, "expected a number, got '" + tok + "'");
    return v;
}

inline bool is_missing_cell(const std::string& tok) {
    return tok == "nan" || tok == "NaN" || tok == "NAN" || tok == "NA" || tok == "-";
}

// Shortest text rendering that reparses to the identical double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = std::strtod(buf, nullptr);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char probe[40];
            std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
            if (std::strtod(probe, nullptr) == v) return probe;
        }
    }
    return buf;
}

inline std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

}  // namespace detail

// ---------------------------------------------------------------------
// Word-vector files: header "count dim", then "token c1 ... cN".

inline EmbeddingSet load_embeddings(const std::string& path, Side side) {
    auto in = detail::open_or_throw(path);
    std::string line;
    long lineno = 0;

    if (!std::getline(in, line)) throw detail::parse_error(path, 1, "missing header");
    ++lineno;
    const auto header = detail::split_ws(detail::strip_cr(line));
    if (header.size() != 2)
        throw detail::parse_error(path, lineno, "header must be 'count dim'");
    long count = 0, dim = 0;
    try {
        count = std::stol(header[0]);
        dim = std::stol(header[1]);
    } catch (const std::exception&) {
        throw detail::parse_error(path, lineno, "header must be 'count dim'");
    }
    if (count < 1 || dim < 1)
        throw detail::parse_error(path, lineno, "count and dim must be positive");

    std::vector<std::string> tokens;
    Matrix vectors(count, dim);
    long row = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const auto fields = detail::split_ws(line);
        if (row >= count)
            throw detail::parse_error(path, lineno, "more vector rows than declared in header");
        if (static_cast<long>(fields.size()) != dim + 1)
            throw detail::parse_error(path, lineno,
                                      "expected token plus " + std::to_string(dim) +
                                          " components, got " +
                                          std::to_string(fields.size() - 1));
        double norm2 = 0.0;
        for (long d = 0; d < dim; ++d) {
            const double v = detail::parse_double(fields[d + 1], path, lineno);
            vectors(row, d) = v;
            norm2 += v * v;
        }
        if (!(norm2 > 0.0))
            throw detail::parse_error(path, lineno, "zero-norm vector for token '" + fields[0] + "'");
        for (const auto& t : tokens) {
            if (t == fields[0])
                throw detail::parse_error(path, lineno, "duplicate token '" + fields[0] + "'");
        }
        tokens.push_back(fields[0]);
        ++row;
    }
    if (row != count)
        throw detail::parse_error(path, lineno, "header declared " + std::to_string(count) +
                                                    " rows but file has " + std::to_string(row));
    return EmbeddingSet(side, std::move(tokens), std::move(vectors));
}

inline std::string serialize_embeddings(const EmbeddingSet& emb) {
    std::ostringstream out;
    out << emb.size() << ' ' << emb.dim() << '\n';
    for (int i = 0; i < emb.size(); ++i) {
        out << emb.tokens()[i];
        for (int d = 0; d < emb.dim(); ++d) out << ' ' << detail::format_double(emb.matrix()(i, d));
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------
// Concept map: "disease_id<TAB>concept1,concept2,...".

inline ConceptMap load_concept_map(const std::string& path) {
    auto in = detail::open_or_throw(path);
    ConceptMap map;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = detail::split_char(line, '\t');
        if (fields.size() != 2 || fields[0].empty())
            throw detail::parse_error(path, lineno, "expected 'disease_id<TAB>concepts'");
        std::vector<std::string> concepts;
        for (auto& c : detail::split_char(fields[1], ',')) {
            if (!c.empty()) concepts.push_back(c);
        }
        if (concepts.empty())
            throw detail::parse_error(path, lineno, "no concepts for '" + fields[0] + "'");
        try {
            map.insert(fields[0], std::move(concepts));
        } catch (const std::invalid_argument& e) {
            throw detail::parse_error(path, lineno, e.what());
        }
    }
    return map;
}

struct ConceptAggregation {
    EmbeddingSet vectors;
    std::vector<std::string> missing_concepts;  // "disease: concept" with no vector
    std::vector<std::string> omitted;           // diseases with zero found concepts
};

// Disease vector = arithmetic mean of its found concept vectors. Diseases
// with no concept vector at all are omitted (reported, not fatal).
inline ConceptAggregation aggregate_concept_vectors(const ConceptMap& concepts,
                                                    const EmbeddingSet& raw) {
    std::vector<std::string> ids;
    std::vector<Vector> rows;
    ConceptAggregation out{EmbeddingSet(raw.side(), {"placeholder"}, Matrix::Ones(1, raw.dim())),
                           {},
                           {}};
    for (const auto& [disease, tokens] : concepts.entries) {
        Vector acc = Vector::Zero(raw.dim());
        int found = 0;
        for (const auto& t : tokens) {
            const int idx = raw.index_of(t);
            if (idx < 0) {
                out.missing_concepts.push_back(disease + ": " + t);
                continue;
            }
            acc += raw.vec(idx);
            ++found;
        }
        if (found == 0) {
            out.omitted.push_back(disease);
            continue;
        }
        ids.push_back(disease);
        rows.push_back(acc / static_cast<double>(found));
    }
    if (ids.empty()) throw std::runtime_error("concept aggregation produced no disease vectors");
    Matrix m(ids.size(), raw.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(i) = rows[i].transpose();
    out.vectors = EmbeddingSet(raw.side(), std::move(ids), std::move(m));
    return out;
}

// ---------------------------------------------------------------------
// Associations: "drug_id<TAB>disease_id", '#' comments.

inline std::vector<std::pair<std::string, std::string>> load_association_pairs(
    const std::string& path) {
    auto in = detail::open_or_throw(path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = detail::split_char(line, '\t');
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw detail::parse_error(path, lineno, "expected 'drug_id<TAB>disease_id'");
        pairs.emplace_back(fields[0], fields[1]);
    }
    return pairs;
}

struct AssociationLoad {
    AssociationMatrix matrix;
    long skipped_unknown = 0;
    long duplicates_collapsed = 0;
    std::vector<std::string> skipped;  // "drug_id<TAB>disease_id" rows referencing unknown ids
};

inline AssociationLoad load_associations(const std::string& path, const EntityCatalog& catalog) {
    const auto pairs = load_association_pairs(path);
    std::vector<std::pair<int, int>> positives;
    AssociationLoad out{AssociationMatrix(catalog.n_drugs(), catalog.n_diseases(), {}), 0, 0, {}};
    for (const auto& [drug, disease] : pairs) {
        const int i = catalog.index_of(Side::drug, drug);
        const int j = catalog.index_of(Side::disease, disease);
        if (i < 0 || j < 0) {
            ++out.skipped_unknown;
            if (out.skipped.size() < 20) out.skipped.push_back(drug + "\t" + disease);
            continue;
        }
        positives.push_back({i, j});
    }
    std::sort(positives.begin(), positives.end());
    const auto uniq_end = std::unique(positives.begin(), positives.end());
    out.duplicates_collapsed = static_cast<long>(positives.end() - uniq_end);
    positives.erase(uniq_end, positives.end());
    out.matrix = AssociationMatrix(catalog.n_drugs(), catalog.n_diseases(), std::move(positives));
    return out;
}

// ---------------------------------------------------------------------
// Annotation sets: "entity_id<TAB>token1,token2,...". An empty token list is
// allowed and records an entity with no annotations.

inline SetAnnotations load_annotation_sets(const std::string& path) {
    auto in = detail::open_or_throw(path);
    SetAnnotations table;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = detail::split_char(line, '\t');
        if (fields.size() < 1 || fields.size() > 2 || fields[0].empty())
            throw detail::parse_error(path, lineno, "expected 'entity_id<TAB>tokens'");
        if (table.has(fields[0]))
            throw detail::parse_error(path, lineno, "duplicate entity '" + fields[0] + "'");
        std::vector<std::string> tokens;
        if (fields.size() == 2) {
            for (auto& t : detail::split_char(fields[1], ',')) {
                if (!t.empty()) tokens.push_back(t);
            }
        }
        table.sets[fields[0]] = make_token_set(std::move(tokens));
    }
    return table;
}

// Fingerprints: "entity_id<TAB>bitstring", uniform width.
inline FingerprintTable load_fingerprints(const std::string& path) {
    auto in = detail::open_or_throw(path);
    FingerprintTable table;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = detail::split_char(line, '\t');
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw detail::parse_error(path, lineno, "expected 'entity_id<TAB>bitstring'");
        try {
            table.insert(fields[0], BitVector::from_string(fields[1]));
        } catch (const std::invalid_argument& e) {
            throw detail::parse_error(path, lineno, e.what());
        }
    }
    return table;
}

// FASTA: ">entity_id[|tag]" headers, one or more records per entity.
inline SequenceTable load_sequences(const std::string& path,
                                    const std::string& alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ") {
    auto in = detail::open_or_throw(path);
    SequenceTable table;
    table.alphabet = alphabet;
    std::string line, current_id, current_seq;
    long lineno = 0, record_line = 0;
    auto flush = [&] {
        if (current_id.empty()) return;
        if (current_seq.empty())
            throw detail::parse_error(path, record_line, "empty sequence for '" + current_id + "'");
        try {
            table.insert(current_id, std::move(current_seq));
        } catch (const std::invalid_argument& e) {
            throw detail::parse_error(path, record_line, e.what());
        }
        current_seq.clear();
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        if (line[0] == '>') {
            flush();
            std::string header = line.substr(1);
            const auto bar = header.find('|');
            if (bar != std::string::npos) header = header.substr(0, bar);
            const auto ws = header.find_first_of(" \t");
            if (ws != std::string::npos) header = header.substr(0, ws);
            if (header.empty()) throw detail::parse_error(path, lineno, "empty FASTA header id");
            current_id = header;
            record_line = lineno;
        } else {
            if (current_id.empty())
                throw detail::parse_error(path, lineno, "sequence data before any FASTA header");
            current_seq += line;
        }
    }
    flush();
    return table;
}

// ---------------------------------------------------------------------
// Precomputed similarity: header row of ids, then "id cell ... cell" rows.
// Asymmetry beyond 1e-9 is an error; smaller asymmetry is averaged away.
// Cells may be 'nan'/'NA'/'-' for missing.

struct SimilarityLoad {
    SimilarityMatrix matrix;
    std::vector<std::string> unknown_ids;  // file ids absent from the catalog side
};

inline SimilarityLoad load_similarity_matrix(const std::string& path,
                                             const std::vector<std::string>& catalog_ids,
                                             Side side, std::string name) {
    auto in = detail::open_or_throw(path);
    std::string line;
    long lineno = 0;
    if (!std::getline(in, line)) throw detail::parse_error(path, 1, "missing header row");
    ++lineno;
    const auto header = detail::split_ws(detail::strip_cr(line));
    if (header.empty()) throw detail::parse_error(path, lineno, "empty header row");
    const std::size_t m = header.size();

    std::map<std::string, int> catalog_index;
    for (std::size_t i = 0; i < catalog_ids.size(); ++i)
        catalog_index[catalog_ids[i]] = static_cast<int>(i);

    // Raw file-order cells; 'missing' tracked separately.
    Matrix raw = Matrix::Zero(m, m);
    std::vector<std::uint8_t> present(m * m, 0);
    std::vector<std::string> row_ids;
    long row = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const auto fields = detail::split_ws(line);
        if (row >= static_cast<long>(m))
            throw detail::parse_error(path, lineno, "more rows than header columns");
        if (fields.size() != m + 1)
            throw detail::parse_error(path, lineno,
                                      "expected id plus " + std::to_string(m) + " cells");
        if (fields[0] != header[row])
            throw detail::parse_error(path, lineno, "row id '" + fields[0] +
                                                        "' does not match header order ('" +
                                                        header[row] + "' expected)");
        row_ids.push_back(fields[0]);
        for (std::size_t c = 0; c < m; ++c) {
            const std::string& tok = fields[c + 1];
            if (detail::is_missing_cell(tok)) continue;
            const double v = detail::parse_double(tok, path, lineno);
            if (!(v >= 0.0 && v <= 1.0))
                throw detail::parse_error(path, lineno, "similarity value " + tok +
                                                            " outside [0,1] in column " +
                                                            std::to_string(c + 1));
            raw(row, c) = v;
            present[row * m + c] = 1;
        }
        ++row;
    }
    if (row != static_cast<long>(m))
        throw detail::parse_error(path, lineno, "expected " + std::to_string(m) + " rows, got " +
                                                    std::to_string(row));

    // Symmetrize with a tolerance gate, then project onto the catalog.
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const bool pij = present[i * m + j], pji = present[j * m + i];
            if (pij != pji) {
                present[i * m + j] = present[j * m + i] = 0;
                continue;
            }
            if (!pij) continue;
            if (std::abs(raw(i, j) - raw(j, i)) > 1e-9)
                throw std::runtime_error(path + ": asymmetric entries for '" + row_ids[i] +
                                         "'/'" + row_ids[j] + "' (" +
                                         detail::format_double(raw(i, j)) + " vs " +
                                         detail::format_double(raw(j, i)) + ")");
            const double v = (raw(i, j) + raw(j, i)) / 2.0;
            raw(i, j) = v;
            raw(j, i) = v;
        }
    }

    const int n = static_cast<int>(catalog_ids.size());
    Matrix values = Matrix::Zero(n, n);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
    SimilarityLoad out{SimilarityMatrix(side, name, Matrix::Zero(1, 1), {0}), {}};
    std::vector<int> file_to_catalog(m, -1);
    for (std::size_t i = 0; i < m; ++i) {
        auto it = catalog_index.find(row_ids[i]);
        if (it == catalog_index.end())
            out.unknown_ids.push_back(row_ids[i]);
        else
            file_to_catalog[i] = it->second;
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (file_to_catalog[i] < 0) continue;
        for (std::size_t j = 0; j < m; ++j) {
            if (file_to_catalog[j] < 0 || !present[i * m + j]) continue;
            const int a = file_to_catalog[i], b = file_to_catalog[j];
            values(a, b) = raw(i, j);
            mask[static_cast<std::size_t>(a) * n + b] = 1;
        }
    }
    out.matrix = SimilarityMatrix(side, std::move(name), std::move(values), std::move(mask));
    return out;
}

inline std::string serialize_similarity_matrix(const SimilarityMatrix& sim,
                                               const std::vector<std::string>& ids) {
    if (static_cast<int>(ids.size()) != sim.size())
        throw std::invalid_argument("serialize_similarity_matrix: id count mismatch");
    std::ostringstream out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out << ' ';
        out << ids[i];
    }
    out << '\n';
    for (int i = 0; i < sim.size(); ++i) {
        out << ids[i];
        for (int j = 0; j < sim.size(); ++j) {
            out << ' ';
            if (sim.defined(i, j))
                out << detail::format_double(sim.at(i, j));
            else
                out << "nan";
        }
        out << '\n';
    }
    return out.str();
}

// Substitution table: "charA charB score" lines; unlisted pairs fall back to
// the match/mismatch constants.
inline std::map<std::pair<char, char>, double> load_substitution_table(const std::string& path) {
    auto in = detail::open_or_throw(path);
    std::map<std::pair<char, char>, double> table;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = detail::split_ws(line);
        if (fields.size() != 3 || fields[0].size() != 1 || fields[1].size() != 1)
            throw detail::parse_error(path, lineno, "expected 'charA charB score'");
        table[{fields[0][0], fields[1][0]}] = detail::parse_double(fields[2], path, lineno);
    }
    return table;
}

// ---------------------------------------------------------------------
// Catalog alignment

struct DropRecord {
    std::string id;
    Side side = Side::drug;
    std::string reason;
};

struct AlignmentReport {
    std::vector<DropRecord> drops;
    int n_drugs_raw = 0, n_drugs_final = 0;
    int n_diseases_raw = 0, n_diseases_final = 0;
    // input label -> number of final entities covered (entities missing from
    // an input stay in the catalog; their similarity entries are masked)
    std::map<std::string, int> coverage;
    std::vector<std::string> warnings;
};

// The embedding is the one required input: entities without a vector are
// discarded; everything else only masks.
inline std::pair<EntityCatalog, AlignmentReport> align_catalog(const EntityCatalog& raw,
                                                               const EmbeddingSet& drug_vectors,
                                                               const EmbeddingSet& disease_vectors) {
    AlignmentReport report;
    report.n_drugs_raw = raw.n_drugs();
    report.n_diseases_raw = raw.n_diseases();

    std::vector<std::string> drugs, diseases;
    for (const auto& id : raw.drug_ids()) {
        if (drug_vectors.contains(id))
            drugs.push_back(id);
        else
            report.drops.push_back({id, Side::drug, "no embedding vector"});
    }
    for (const auto& id : raw.disease_ids()) {
        if (disease_vectors.contains(id))
            diseases.push_back(id);
        else
            report.drops.push_back({id, Side::disease, "no embedding vector"});
    }
    report.n_drugs_final = static_cast<int>(drugs.size());
    report.n_diseases_final = static_cast<int>(diseases.size());
    if (drugs.empty()) throw std::runtime_error("align_catalog: no drugs retain an embedding");
    if (diseases.empty())
        throw std::runtime_error("align_catalog: no diseases retain an embedding");
    return {EntityCatalog(std::move(drugs), std::move(diseases)), std::move(report)};
}

template <typename Table>
void record_coverage(AlignmentReport& report, const std::string& label,
                     const std::vector<std::string>& ids, const Table& table) {
    int covered = 0;
    for (const auto& id : ids)
        if (table.has(id)) ++covered;
    report.coverage[label] = covered;
}

}  // namespace repolearn
