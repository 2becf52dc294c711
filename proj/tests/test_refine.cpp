#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "repolearn/refine.hpp"
#include "repolearn/rng.hpp"

using namespace repolearn;

namespace {

EmbeddingSet random_embeddings(int n, int dim, std::uint64_t seed, const char* stream) {
    auto gen = rng::substream(seed, stream);
    Matrix m(n, dim);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d) m(i, d) = rng::normal(gen);
    std::vector<std::string> tokens;
    for (int i = 0; i < n; ++i) tokens.push_back("e" + std::to_string(i));
    return EmbeddingSet(Side::drug, std::move(tokens), std::move(m));
}

SimilarityMatrix random_similarity(int n, std::uint64_t seed, const char* stream,
                                   double mask_rate = 0.0) {
    auto gen = rng::substream(seed, stream);
    Matrix values = Matrix::Zero(n, n);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            if (rng::uniform01(gen) < mask_rate) continue;
            const double v = (i == j) ? 1.0 : rng::uniform01(gen);
            values(i, j) = values(j, i) = v;
            mask[static_cast<std::size_t>(i) * n + j] = 1;
            mask[static_cast<std::size_t>(j) * n + i] = 1;
        }
    }
    return SimilarityMatrix(Side::drug, "random", std::move(values), std::move(mask));
}

double cosine(const Vector& x, const Vector& y) { return y.dot(x) / (x.norm() * y.norm()); }

}  // namespace

TEST_CASE("objective_value on a single matched term is (1-t)^2") {
    Matrix m(2, 3);
    m << 1, 2, 2, 3, 0, 4;
    EmbeddingSet raw(Side::drug, {"a", "b"}, m);

    const double t = 0.4;
    Matrix values = Matrix::Zero(2, 2);
    values(0, 1) = values(1, 0) = t;
    std::vector<std::uint8_t> mask{0, 1, 1, 0};
    SimilarityMatrix sim(Side::drug, "s", values, mask);

    // candidate parallel to the neighbor: cosine is 1 up to rounding
    const Vector candidate = 2.0 * raw.vec(1);
    const double got = objective_value(0, candidate, raw, {sim});
    REQUIRE(got == Catch::Approx((1.0 - t) * (1.0 - t)).margin(1e-12));

    // target equal to the current cosine zeroes the objective exactly
    const Vector x = raw.vec(0);
    const double c = cosine(x, raw.vec(1));
    Matrix exact = Matrix::Zero(2, 2);
    exact(0, 1) = exact(1, 0) = c;
    SimilarityMatrix sim_exact(Side::drug, "s", exact, mask);
    REQUIRE(objective_value(0, x, raw, {sim_exact}) == 0.0);
}

TEST_CASE("objective_value matches an independent term-by-term recomputation") {
    auto gen = rng::substream(21, "test.refine.obj");
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + static_cast<int>(rng::below(gen, 6));
        const int dim = 2 + static_cast<int>(rng::below(gen, 6));
        const auto raw = random_embeddings(n, dim, 100 + trial, "test.refine.obj.emb");
        const std::vector<SimilarityMatrix> sims{
            random_similarity(n, 200 + trial, "test.refine.obj.s1", 0.2),
            random_similarity(n, 300 + trial, "test.refine.obj.s2", 0.4)};
        const int entity = static_cast<int>(rng::below(gen, n));
        Vector x(dim);
        for (int d = 0; d < dim; ++d) x(d) = rng::normal(gen);

        double expected = 0.0;
        for (const auto& sim : sims) {
            for (int j = 0; j < n; ++j) {
                if (j == entity || !sim.defined(entity, j)) continue;
                const double r = cosine(x, raw.vec(j)) - sim.at(entity, j);
                expected += r * r;
            }
        }
        REQUIRE(objective_value(entity, x, raw, sims) ==
                Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("objective is scale-invariant: doubling the candidate changes nothing") {
    const auto raw = random_embeddings(6, 5, 31, "test.refine.scale");
    const auto sim = random_similarity(6, 32, "test.refine.scale.s");
    auto gen = rng::substream(33, "test.refine.scale.x");
    for (int trial = 0; trial < 10; ++trial) {
        Vector x(5);
        for (int d = 0; d < 5; ++d) x(d) = rng::normal(gen);
        REQUIRE(objective_value(0, x, raw, {sim}) == objective_value(0, 2.0 * x, raw, {sim}));
    }
}

TEST_CASE("objective_gradient vanishes at an exactly matched target") {
    Matrix m(2, 4);
    m << 1, 0, 2, -1, 0, 3, 1, 1;
    EmbeddingSet raw(Side::drug, {"a", "b"}, m);
    const Vector x = raw.vec(0);
    Matrix values = Matrix::Zero(2, 2);
    values(0, 1) = values(1, 0) = cosine(x, raw.vec(1));
    std::vector<std::uint8_t> mask{0, 1, 1, 0};
    SimilarityMatrix sim(Side::drug, "s", values, mask);
    REQUIRE(objective_gradient(0, x, raw, {sim}).isZero(0.0));
}

TEST_CASE("objective_gradient matches central finite differences") {
    auto gen = rng::substream(22, "test.refine.fd");
    for (int trial = 0; trial < 25; ++trial) {
        const int dim = 4 + static_cast<int>(rng::below(gen, 29));  // 4..32
        const int n = 4 + static_cast<int>(rng::below(gen, 8));
        const auto raw = random_embeddings(n, dim, 400 + trial, "test.refine.fd.emb");
        const std::vector<SimilarityMatrix> sims{
            random_similarity(n, 500 + trial, "test.refine.fd.s1"),
            random_similarity(n, 600 + trial, "test.refine.fd.s2", 0.3)};
        const int entity = static_cast<int>(rng::below(gen, n));
        Vector x(dim);
        for (int d = 0; d < dim; ++d) x(d) = rng::normal(gen);

        const Vector analytic = objective_gradient(entity, x, raw, sims);
        const Vector numeric = oracle::central_finite_difference(
            [&](const Vector& v) { return objective_value(entity, v, raw, sims); }, x);
        double worst = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double denom = std::max({1.0, std::abs(analytic(d)), std::abs(numeric(d))});
            worst = std::max(worst, std::abs(analytic(d) - numeric(d)) / denom);
        }
        REQUIRE(worst < 1e-5);
    }
}

TEST_CASE("cosine gradient is orthogonal to the candidate") {
    const auto raw = random_embeddings(5, 8, 41, "test.refine.orth");
    auto gen = rng::substream(42, "test.refine.orth.x");
    // a zero-target objective's gradient is a weighted sum of cosine
    // gradients, each orthogonal to x
    Matrix values = Matrix::Zero(5, 5);
    for (int i = 0; i < 5; ++i) values(i, i) = 1.0;
    SimilarityMatrix sim(Side::drug, "zeros", values, SimilarityMatrix::full_mask(5));
    for (int trial = 0; trial < 10; ++trial) {
        Vector x(8);
        for (int d = 0; d < 8; ++d) x(d) = rng::normal(gen);
        const Vector g = objective_gradient(0, x, raw, {sim});
        REQUIRE(std::abs(g.dot(x)) / std::max(1.0, g.norm() * x.norm()) < 1e-12);
    }
}

TEST_CASE("refine_vector returns the raw vector when already optimal") {
    Matrix m(2, 3);
    m << 1, 0, 0, 0, 1, 0;
    EmbeddingSet raw(Side::drug, {"a", "b"}, m);
    const Vector x = raw.vec(0);
    Matrix values = Matrix::Zero(2, 2);
    values(0, 1) = values(1, 0) = cosine(x, raw.vec(1));
    std::vector<std::uint8_t> mask{0, 1, 1, 0};
    SimilarityMatrix sim(Side::drug, "s", values, mask);

    const auto res = refine_vector(0, raw, {sim});
    REQUIRE(res.vector == x);
    REQUIRE(res.iterations == 0);
    REQUIRE(res.final_objective == res.initial_objective);
}

TEST_CASE("refine_vector improves cosine towards a unit target") {
    Matrix m(2, 4);
    m << 1, 0.2, -0.5, 0.3, 0.1, 1, 0.4, -0.2;
    EmbeddingSet raw(Side::drug, {"a", "b"}, m);
    Matrix values = Matrix::Zero(2, 2);
    values(0, 1) = values(1, 0) = 1.0;
    std::vector<std::uint8_t> mask{0, 1, 1, 0};
    SimilarityMatrix sim(Side::drug, "ones", values, mask);

    RefineOptions opts;
    opts.max_iters = 5000;
    opts.rel_tol = 1e-12;
    const auto res = refine_vector(0, raw, {sim}, opts);
    REQUIRE_FALSE(res.no_terms);
    REQUIRE(res.final_objective <= res.initial_objective);
    REQUIRE(cosine(res.vector, raw.vec(1)) >= cosine(raw.vec(0), raw.vec(1)));
    REQUIRE(cosine(res.vector, raw.vec(1)) > 0.99);
}

TEST_CASE("refine_vector objective is non-increasing in the iteration budget") {
    const auto raw = random_embeddings(10, 6, 51, "test.refine.mono");
    const std::vector<SimilarityMatrix> sims{random_similarity(10, 52, "test.refine.mono.s1"),
                                             random_similarity(10, 53, "test.refine.mono.s2")};
    RefineOptions opts;
    double prev = std::numeric_limits<double>::infinity();
    for (int budget = 1; budget <= 25; ++budget) {
        opts.max_iters = budget;
        const auto res = refine_vector(3, raw, sims, opts);
        REQUIRE(res.final_objective <= prev);
        prev = res.final_objective;
    }
}

TEST_CASE("refine_vector flags an entity with no defined term") {
    Matrix m(2, 3);
    m << 1, 0, 0, 0, 1, 0;
    EmbeddingSet raw(Side::drug, {"a", "b"}, m);
    Matrix values = Matrix::Zero(2, 2);
    std::vector<std::uint8_t> mask(4, 0);
    SimilarityMatrix sim(Side::drug, "empty", values, mask);
    const auto res = refine_vector(0, raw, {sim});
    REQUIRE(res.no_terms);
    REQUIRE(res.vector == raw.vec(0));
}

TEST_CASE("refine_all with no similarity stack returns the input set") {
    const auto raw = random_embeddings(7, 5, 61, "test.refine.noop");
    const auto [refined, report] = refine_all(raw, {});
    REQUIRE(refined.matrix() == raw.matrix());
    REQUIRE(report.untouched.size() == 7);
}

TEST_CASE("refine_all is deterministic and thread-count independent") {
    const auto raw = random_embeddings(12, 6, 62, "test.refine.det");
    const std::vector<SimilarityMatrix> sims{random_similarity(12, 63, "test.refine.det.s")};
    const auto [a, ra] = refine_all(raw, sims, {}, 1);
    const auto [b, rb] = refine_all(raw, sims, {}, 4);
    const auto [c, rc] = refine_all(raw, sims, {}, 1);
    REQUIRE(a.matrix() == b.matrix());
    REQUIRE(a.matrix() == c.matrix());
    REQUIRE(ra.iterations == rb.iterations);
}

TEST_CASE("refine_all commutes with entity permutation") {
    const int n = 8, dim = 5;
    const auto raw = random_embeddings(n, dim, 64, "test.refine.perm");
    const auto sim = random_similarity(n, 65, "test.refine.perm.s");

    std::vector<int> perm{3, 1, 7, 0, 5, 2, 6, 4};
    Matrix pm(n, dim);
    Matrix pv(n, n);
    std::vector<std::uint8_t> pmask(static_cast<std::size_t>(n) * n);
    std::vector<std::string> ptokens(n);
    for (int i = 0; i < n; ++i) {
        pm.row(i) = raw.matrix().row(perm[i]);
        ptokens[i] = raw.tokens()[perm[i]];
        for (int j = 0; j < n; ++j) {
            pv(i, j) = sim.values()(perm[i], perm[j]);
            pmask[static_cast<std::size_t>(i) * n + j] = sim.defined(perm[i], perm[j]) ? 1 : 0;
        }
    }
    EmbeddingSet praw(Side::drug, ptokens, pm);
    SimilarityMatrix psim(Side::drug, "perm", pv, pmask);

    const auto [refined, r1] = refine_all(raw, {sim});
    const auto [prefined, r2] = refine_all(praw, {psim});
    for (int i = 0; i < n; ++i) {
        REQUIRE((prefined.matrix().row(i) - refined.matrix().row(perm[i])).cwiseAbs().maxCoeff() <
                1e-12);
    }
}

TEST_CASE("refinement reduces the residual against planted similarity targets") {
    // planted two-cluster instance: targets say 'high within, low across'
    const int n = 10, dim = 8;
    const auto raw = random_embeddings(n, dim, 66, "test.refine.planted");
    Matrix values(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            values(i, j) = (i == j) ? 1.0 : ((i % 2) == (j % 2) ? 0.9 : 0.1);
    SimilarityMatrix sim(Side::drug, "planted", values, SimilarityMatrix::full_mask(n));

    const auto [refined, report] = refine_all(raw, {sim});
    auto mean_residual = [&](const EmbeddingSet& e) {
        double acc = 0.0;
        int count = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                acc += std::abs(cosine(e.vec(i), raw.vec(j)) - sim.at(i, j));
                ++count;
            }
        return acc / count;
    };
    REQUIRE(mean_residual(refined) < mean_residual(raw));
    for (int i = 0; i < n; ++i)
        REQUIRE(report.final_objective[i] <= report.initial_objective[i]);
}
