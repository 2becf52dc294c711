#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "repolearn/ingest.hpp"
#include "repolearn/rng.hpp"

using namespace repolearn;
namespace fs = std::filesystem;

namespace {

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() /
              ("repolearn_ingest_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const std::string& content) {
        const fs::path p = dir / name;
        std::ofstream out(p);
        out << content;
        return p.string();
    }
};

bool message_mentions(const std::exception& e, const std::string& needle) {
    return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("load_embeddings parses the plain word-vector format") {
    Scratch s;
    const auto emb = load_embeddings(s.file("v.vec", "2 3\na 1 0 0\nb 0 1 0\n"), Side::drug);
    REQUIRE(emb.size() == 2);
    REQUIRE(emb.dim() == 3);
    REQUIRE(emb.tokens() == std::vector<std::string>{"a", "b"});
    REQUIRE(emb.vec(1)(1) == 1.0);
}

TEST_CASE("load_embeddings rejects malformed files with line numbers") {
    Scratch s;
    try {
        load_embeddings(s.file("arity.vec", "1 2\na 1 0 0\n"), Side::drug);
        FAIL("expected arity error");
    } catch (const std::runtime_error& e) {
        REQUIRE(message_mentions(e, ":2:"));
    }
    REQUIRE_THROWS_WITH(load_embeddings(s.file("zero.vec", "1 3\na 0 0 0\n"), Side::drug),
                        Catch::Matchers::ContainsSubstring("zero-norm"));
    REQUIRE_THROWS_WITH(load_embeddings(s.file("dup.vec", "2 2\na 1 0\na 0 1\n"), Side::drug),
                        Catch::Matchers::ContainsSubstring("duplicate token"));
    REQUIRE_THROWS_WITH(load_embeddings(s.file("nan.vec", "1 2\na 1 zzz\n"), Side::drug),
                        Catch::Matchers::ContainsSubstring("expected a number"));
    REQUIRE_THROWS_WITH(load_embeddings(s.file("hdr.vec", "x y\n"), Side::drug),
                        Catch::Matchers::ContainsSubstring("header"));
    REQUIRE_THROWS_WITH(load_embeddings(s.file("short.vec", "2 2\na 1 0\n"), Side::drug),
                        Catch::Matchers::ContainsSubstring("declared"));
    REQUIRE_THROWS_WITH(
        load_embeddings(s.file("long.vec", "1 2\na 1 0\nb 0 1\n"), Side::drug),
        Catch::Matchers::ContainsSubstring("more vector rows"));
}

TEST_CASE("embedding serialization round-trips bitwise") {
    auto gen = rng::substream(301, "test.ingest.roundtrip");
    Matrix m(4, 5);
    for (int i = 0; i < 4; ++i)
        for (int d = 0; d < 5; ++d) m(i, d) = rng::normal(gen) * std::pow(10.0, i - 2);
    EmbeddingSet emb(Side::disease, {"w", "x", "y", "z"}, m);
    Scratch s;
    const auto path = s.file("rt.vec", serialize_embeddings(emb));
    const auto back = load_embeddings(path, Side::disease);
    REQUIRE(back.matrix() == emb.matrix());
    REQUIRE(back.tokens() == emb.tokens());
}

TEST_CASE("aggregate_concept_vectors averages found concepts and reports misses") {
    Matrix m(3, 2);
    m << 1, 0, 0, 1, 2, 2;
    EmbeddingSet raw(Side::disease, {"a", "b", "c"}, m);

    ConceptMap cm;
    cm.insert("X", {"a", "b"});
    cm.insert("Y", {"a"});
    cm.insert("Z", {"a", "b", "missing"});
    cm.insert("W", {"gone"});
    const auto agg = aggregate_concept_vectors(cm, raw);

    REQUIRE(agg.vectors.size() == 3);
    REQUIRE(agg.vectors.vec(agg.vectors.index_of("X"))(0) == 0.5);
    REQUIRE(agg.vectors.vec(agg.vectors.index_of("X"))(1) == 0.5);
    REQUIRE(agg.vectors.vec(agg.vectors.index_of("Y")) == raw.vec(0));
    REQUIRE(agg.vectors.vec(agg.vectors.index_of("Z"))(0) == 0.5);
    REQUIRE(agg.missing_concepts == std::vector<std::string>{"Z: missing", "W: gone"});
    REQUIRE(agg.omitted == std::vector<std::string>{"W"});
}

TEST_CASE("load_concept_map enforces per-disease uniqueness") {
    Scratch s;
    const auto cm = load_concept_map(s.file("cm.tsv", "X\ta,b\nY\tc\n"));
    REQUIRE(cm.entries.size() == 2);
    REQUIRE(cm.entries[0].second == std::vector<std::string>{"a", "b"});
    REQUIRE_THROWS_WITH(load_concept_map(s.file("bad.tsv", "X\ta,a\n")),
                        Catch::Matchers::ContainsSubstring("duplicate concept"));
}

TEST_CASE("load_associations collapses duplicates and skips unknown ids") {
    Scratch s;
    EntityCatalog catalog({"D1", "D2"}, {"S1", "S2"});
    const auto path = s.file("assoc.tsv",
                             "# comment\n"
                             "D1\tS1\n"
                             "D1\tS1\n"
                             "D9\tS1\n"
                             "D2\tS2\n");
    const auto load = load_associations(path, catalog);
    REQUIRE(load.matrix.count() == 2);
    REQUIRE(load.duplicates_collapsed == 1);
    REQUIRE(load.skipped_unknown == 1);
    REQUIRE(load.skipped == std::vector<std::string>{"D9\tS1"});

    const auto empty = load_associations(s.file("empty.tsv", "# nothing\n"), catalog);
    REQUIRE(empty.matrix.count() == 0);

    REQUIRE_THROWS_WITH(load_associations(s.file("bad.tsv", "D1 S1\n"), catalog),
                        Catch::Matchers::ContainsSubstring("drug_id<TAB>disease_id"));
}

TEST_CASE("load_annotation_sets parses token lists, allowing empty sets") {
    Scratch s;
    const auto table = load_annotation_sets(
        s.file("se.tsv", "D1\tnausea,rash\nD2\trash\nD3\t\n"));
    REQUIRE(table.at("D1") == TokenSet{"nausea", "rash"});
    REQUIRE(table.at("D2") == TokenSet{"rash"});
    REQUIRE(table.at("D3").empty());
    REQUIRE_THROWS_WITH(load_annotation_sets(s.file("dup.tsv", "D1\ta\nD1\tb\n")),
                        Catch::Matchers::ContainsSubstring("duplicate entity"));
}

TEST_CASE("load_fingerprints enforces uniform width and binary digits") {
    Scratch s;
    const auto table = load_fingerprints(s.file("fp.tsv", "D1\t1100\nD2\t1010\n"));
    REQUIRE(table.width == 4);
    REQUIRE(table.at("D1").to_string() == "1100");

    REQUIRE_THROWS_WITH(load_fingerprints(s.file("w.tsv", "D1\t1100\nD2\t10\n")),
                        Catch::Matchers::ContainsSubstring("width"));
    REQUIRE_THROWS_WITH(load_fingerprints(s.file("c.tsv", "D1\t10x0\n")),
                        Catch::Matchers::ContainsSubstring("not 0/1"));
}

TEST_CASE("load_sequences reads FASTA with repeated entities and tags") {
    Scratch s;
    const auto table = load_sequences(s.file("seq.fasta",
                                             ">D1|0\nACGT\nACGT\n"
                                             ">D1|1\nTTTT\n"
                                             ">D2 some comment\nGG\n"));
    REQUIRE(table.at("D1").size() == 2);
    REQUIRE(table.at("D1")[0] == "ACGTACGT");
    REQUIRE(table.at("D1")[1] == "TTTT");
    REQUIRE(table.at("D2") == std::vector<std::string>{"GG"});

    REQUIRE_THROWS_WITH(load_sequences(s.file("a.fasta", ">D1\nAC1T\n")),
                        Catch::Matchers::ContainsSubstring("outside alphabet"));
    REQUIRE_THROWS_WITH(load_sequences(s.file("h.fasta", "ACGT\n")),
                        Catch::Matchers::ContainsSubstring("before any FASTA header"));
    REQUIRE_THROWS_WITH(load_sequences(s.file("e.fasta", ">D1\n>D2\nAC\n")),
                        Catch::Matchers::ContainsSubstring("empty sequence"));
}

TEST_CASE("load_similarity_matrix validates, symmetrizes, and masks") {
    Scratch s;
    const std::vector<std::string> ids{"S1", "S2", "S3"};

    const auto ok = load_similarity_matrix(
        s.file("ok.sim",
               "S1 S2 S3\n"
               "S1 1 0.5 nan\n"
               "S2 0.5 1 0.25\n"
               "S3 nan 0.25 1\n"),
        ids, Side::disease, "pheno");
    REQUIRE(ok.matrix.at(0, 1) == 0.5);
    REQUIRE_FALSE(ok.matrix.defined(0, 2));
    REQUIRE(ok.matrix.defined(1, 2));
    REQUIRE(ok.unknown_ids.empty());

    // tiny asymmetry is averaged away; large asymmetry is an error
    const auto avg = load_similarity_matrix(
        s.file("avg.sim", "S1 S2\nS1 1 0.5000000001\nS2 0.4999999999 1\n"), {"S1", "S2"},
        Side::disease, "pheno");
    REQUIRE(avg.matrix.at(0, 1) == 0.5);
    REQUIRE_THROWS_WITH(
        load_similarity_matrix(s.file("asym.sim", "S1 S2\nS1 1 0.7\nS2 0.2 1\n"), {"S1", "S2"},
                               Side::disease, "pheno"),
        Catch::Matchers::ContainsSubstring("asymmetric"));

    REQUIRE_THROWS_WITH(
        load_similarity_matrix(s.file("range.sim", "S1 S2\nS1 1 1.2\nS2 1.2 1\n"), {"S1", "S2"},
                               Side::disease, "pheno"),
        Catch::Matchers::ContainsSubstring("outside [0,1]"));

    // ids absent from the catalog are reported; catalog entities absent from
    // the file stay masked
    const auto partial = load_similarity_matrix(
        s.file("part.sim", "S1 SX\nS1 1 0.3\nSX 0.3 1\n"), ids, Side::disease, "pheno");
    REQUIRE(partial.unknown_ids == std::vector<std::string>{"SX"});
    REQUIRE(partial.matrix.defined(0, 0));
    REQUIRE_FALSE(partial.matrix.defined(1, 1));
    REQUIRE_FALSE(partial.matrix.defined(0, 1));
}

TEST_CASE("similarity serialization round-trips through the loader") {
    const std::vector<std::string> ids{"a", "b", "c"};
    Matrix v(3, 3);
    v << 1, 0.25, 0, 0.25, 1, 1.0 / 3.0, 0, 1.0 / 3.0, 1;
    std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1, 0, 1, 1};
    SimilarityMatrix sim(Side::drug, "x", v, mask);
    Scratch s;
    const auto path = s.file("rt.sim", serialize_similarity_matrix(sim, ids));
    const auto back = load_similarity_matrix(path, ids, Side::drug, "x");
    REQUIRE(back.matrix.values() == sim.values());
    REQUIRE(back.matrix.mask() == sim.mask());
}

TEST_CASE("load_substitution_table parses pair scores") {
    Scratch s;
    const auto table = load_substitution_table(s.file("sub.tsv", "A G 1.5\nC T -0.5\n"));
    REQUIRE(table.size() == 2);
    REQUIRE(table.at({'A', 'G'}) == 1.5);
    AlignmentScoring sc;
    sc.substitutions = table;
    REQUIRE(sc.score('T', 'C') == -0.5);
}

TEST_CASE("align_catalog drops only entities without embeddings") {
    Matrix dm(2, 2);
    dm << 1, 0, 0, 1;
    EmbeddingSet drug_emb(Side::drug, {"D1", "D3"}, dm);
    Matrix sm(2, 2);
    sm << 1, 1, 2, 0;
    EmbeddingSet disease_emb(Side::disease, {"S1", "S2"}, sm);

    EntityCatalog raw({"D1", "D2", "D3"}, {"S1", "S2", "S3"});
    const auto [catalog, report] = align_catalog(raw, drug_emb, disease_emb);
    REQUIRE(catalog.drug_ids() == std::vector<std::string>{"D1", "D3"});
    REQUIRE(catalog.disease_ids() == std::vector<std::string>{"S1", "S2"});
    REQUIRE(report.n_drugs_raw == 3);
    REQUIRE(report.n_drugs_final == 2);
    REQUIRE(report.drops.size() == 2);
    REQUIRE(report.drops[0].id == "D2");
    REQUIRE(report.drops[1].id == "S3");

    // idempotent: aligning the aligned catalog drops nothing
    const auto [again, report2] = align_catalog(catalog, drug_emb, disease_emb);
    REQUIRE(again.drug_ids() == catalog.drug_ids());
    REQUIRE(again.disease_ids() == catalog.disease_ids());
    REQUIRE(report2.drops.empty());

    Matrix empty_emb(1, 2);
    empty_emb << 1, 0;
    EmbeddingSet unrelated(Side::drug, {"NOPE"}, empty_emb);
    REQUIRE_THROWS_WITH(align_catalog(raw, unrelated, disease_emb),
                        Catch::Matchers::ContainsSubstring("no drugs"));
}

TEST_CASE("align_catalog at catalog scale: 593 drugs with 9 vectorless drop to 584") {
    auto make_ids = [](const char* p, int n) {
        std::vector<std::string> out;
        for (int i = 0; i < n; ++i) out.push_back(p + std::to_string(i));
        return out;
    };
    const auto raw_drugs = make_ids("D", 593);
    const auto raw_diseases = make_ids("S", 313);
    // every 66th drug and every 17th disease lacks a vector
    std::vector<std::string> drug_tokens, disease_tokens;
    for (int i = 0; i < 593; ++i)
        if (i % 66 != 13) drug_tokens.push_back(raw_drugs[i]);
    for (int j = 0; j < 313; ++j)
        if (j % 17 != 5) disease_tokens.push_back(raw_diseases[j]);
    REQUIRE(drug_tokens.size() == 584);
    REQUIRE(disease_tokens.size() == 294);
    EmbeddingSet demb(Side::drug, drug_tokens,
                      Matrix::Ones(static_cast<int>(drug_tokens.size()), 2));
    EmbeddingSet semb(Side::disease, disease_tokens,
                      Matrix::Ones(static_cast<int>(disease_tokens.size()), 2));

    EntityCatalog raw(raw_drugs, raw_diseases);
    const auto [catalog, report] = align_catalog(raw, demb, semb);
    REQUIRE(report.n_drugs_raw == 593);
    REQUIRE(report.n_drugs_final == 584);
    REQUIRE(report.n_diseases_raw == 313);
    REQUIRE(report.n_diseases_final == 294);
    REQUIRE(report.drops.size() == 9 + 19);
}

TEST_CASE("loading is deterministic: identical bytes give identical structures") {
    Scratch s;
    const std::string content = "3 2\nt1 0.125 -7\nt2 1e-3 4.5\nt3 -0.25 0.5\n";
    const auto a = load_embeddings(s.file("a.vec", content), Side::drug);
    const auto b = load_embeddings(s.file("b.vec", content), Side::drug);
    REQUIRE(a.matrix() == b.matrix());
    REQUIRE(a.tokens() == b.tokens());
}
