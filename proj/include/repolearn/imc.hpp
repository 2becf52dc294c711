#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "repolearn/model.hpp"
#include "repolearn/rng.hpp"

namespace repolearn {

struct ImcOptions {
    int rank = 50;  // capped at the feature dimension when fitting
    double lambda = 1.0;
    int max_sweeps = 100;
    double sweep_tol = 1e-7;
    double cg_tol = 1e-8;
    int cg_max_iters = 200;
    std::uint64_t seed = 0;

    void validate() const {
        if (rank < 1) throw std::invalid_argument("ImcOptions: rank must be >= 1");
        if (lambda < 0.0) throw std::invalid_argument("ImcOptions: lambda must be >= 0");
        if (max_sweeps < 1) throw std::invalid_argument("ImcOptions: max_sweeps must be >= 1");
        if (!(sweep_tol > 0.0)) throw std::invalid_argument("ImcOptions: sweep_tol must be > 0");
        if (!(cg_tol > 0.0)) throw std::invalid_argument("ImcOptions: cg_tol must be > 0");
        if (cg_max_iters < 1) throw std::invalid_argument("ImcOptions: cg_max_iters must be >= 1");
    }
};

namespace detail {

inline void check_imc_dims(const EmbeddingSet& drugs, const EmbeddingSet& diseases,
                           const AssociationMatrix& assoc) {
    if (drugs.dim() != diseases.dim())
        throw std::invalid_argument("imc: drug and disease feature dimensions differ");
    if (drugs.size() != assoc.n_drugs() || diseases.size() != assoc.n_diseases())
        throw std::invalid_argument("imc: association dims do not match feature counts");
}

// Objective as a function of one factor is quadratic with the SPD operator
//   F ||-> LtL * F * RtR + half_lambda * F
// (Frobenius inner product). Plain CG; iteration order is fixed, so the
// result is bitwise reproducible.
inline Matrix cg_solve(const Matrix& LtL, const Matrix& RtR, double half_lambda,
                       const Matrix& rhs, Matrix init, double tol, int max_iters) {
    auto apply = [&](const Matrix& f) -> Matrix {
        return LtL * f * RtR + half_lambda * f;
    };
    Matrix x = std::move(init);
    Matrix r = rhs - apply(x);
    Matrix p = r;
    double rs = r.squaredNorm();
    const double stop = tol * std::max(1.0, rhs.norm());
    for (int it = 0; it < max_iters && std::sqrt(rs) > stop; ++it) {
        const Matrix ap = apply(p);
        const double denom = (p.array() * ap.array()).sum();
        if (!(denom > 0.0)) break;  // operator numerically indefinite; keep best iterate
        const double alpha = rs / denom;
        x += alpha * p;
        r -= alpha * ap;
        const double rs_new = r.squaredNorm();
        p = r + (rs_new / rs) * p;
        rs = rs_new;
    }
    return x;
}

inline double min_max_eig_ratio(const Matrix& gram) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    return lo / std::max(hi, 1e-300);
}

inline bool gram_rank_deficient(const Matrix& gram) {
    return min_max_eig_ratio(gram) <= 1e-12;
}

}  // namespace detail

// Dense squared loss over every (drug, disease) cell -- unknown pairs count
// as zeros -- plus (lambda/2) * (|G|_F^2 + |H|_F^2).
inline double imc_objective(const FactorModel& model, const EmbeddingSet& drugs,
                            const EmbeddingSet& diseases, const AssociationMatrix& assoc) {
    detail::check_imc_dims(drugs, diseases, assoc);
    if (model.dim() != drugs.dim())
        throw std::invalid_argument("imc_objective: model dimension mismatch");
    const Matrix predicted = (drugs.matrix() * model.G) * (diseases.matrix() * model.H).transpose();
    const Matrix residual = dense_view(assoc) - predicted;
    return residual.squaredNorm() +
           0.5 * model.lambda * (model.G.squaredNorm() + model.H.squaredNorm());
}

struct FitResult {
    FactorModel model;
    std::vector<double> objective_trace;  // value before sweeps, then after each sweep
    int sweeps = 0;
    bool lambda_fallback = false;  // lambda=0 subproblem was rank-deficient; refit with 1e-8
    double lambda_requested = 0.0;
};

// Alternating minimization. Each half-sweep solves its regularized
// least-squares subproblem by warm-started CG, which cannot increase the
// objective, so the trace is non-increasing (up to CG inexactness).
// With lambda=0 a rank-deficient subproblem aborts the attempt and the whole
// fit restarts (same seeded init) at lambda=1e-8, keeping the reported
// objective trace consistent under a single lambda.
inline FitResult fit_imc(const AssociationMatrix& assoc, const EmbeddingSet& drugs,
                         const EmbeddingSet& diseases, const ImcOptions& opts = {}) {
    opts.validate();
    detail::check_imc_dims(drugs, diseases, assoc);
    if (assoc.count() == 0)
        throw std::invalid_argument("fit_imc: at least one positive association required");

    const Matrix& X = drugs.matrix();     // N_d x N
    const Matrix& Y = diseases.matrix();  // N_s x N
    const int N = drugs.dim();
    const int K = std::min(opts.rank, N);

    const Matrix I = dense_view(assoc);
    const Matrix XtX = X.transpose() * X;
    const Matrix YtY = Y.transpose() * Y;
    const Matrix XtI = X.transpose() * I;               // N x N_s
    const Matrix YtIt = Y.transpose() * I.transpose();  // N x N_d

    auto attempt = [&](double lambda_eff, FitResult& out) -> bool {
        const bool guard = (lambda_eff == 0.0);
        if (guard && (detail::gram_rank_deficient(XtX) || detail::gram_rank_deficient(YtY)))
            return false;

        auto gen = rng::substream(opts.seed, "imc.init");
        const double sd = 1.0 / std::sqrt(static_cast<double>(K));
        Matrix G(N, K), H(N, K);
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < K; ++k) G(i, k) = sd * rng::normal(gen);
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < K; ++k) H(i, k) = sd * rng::normal(gen);

        auto objective = [&](const Matrix& g, const Matrix& h) {
            const Matrix residual = I - (X * g) * (Y * h).transpose();
            return residual.squaredNorm() + 0.5 * lambda_eff * (g.squaredNorm() + h.squaredNorm());
        };

        out.objective_trace.clear();
        out.sweeps = 0;
        double J = objective(G, H);
        out.objective_trace.push_back(J);

        for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
            {
                const Matrix B = Y * H;  // N_s x K
                const Matrix BtB = B.transpose() * B;
                if (guard && detail::gram_rank_deficient(BtB)) return false;
                G = detail::cg_solve(XtX, BtB, 0.5 * lambda_eff, XtI * B, std::move(G),
                                     opts.cg_tol, opts.cg_max_iters);
            }
            {
                const Matrix A = X * G;  // N_d x K
                const Matrix AtA = A.transpose() * A;
                if (guard && detail::gram_rank_deficient(AtA)) return false;
                H = detail::cg_solve(YtY, AtA, 0.5 * lambda_eff, YtIt * A, std::move(H),
                                     opts.cg_tol, opts.cg_max_iters);
            }
            const double J_new = objective(G, H);
            out.objective_trace.push_back(J_new);
            out.sweeps = sweep + 1;
            const double drop = J - J_new;
            J = J_new;
            if (drop <= opts.sweep_tol * (1.0 + std::abs(J))) break;
        }
        out.model = FactorModel(std::move(G), std::move(H), lambda_eff);
        return true;
    };

    FitResult res{FactorModel(Matrix::Zero(N, K), Matrix::Zero(N, K), 0.0), {}, 0, false,
                  opts.lambda};
    if (!attempt(opts.lambda, res)) {
        res.lambda_fallback = true;
        if (!attempt(1e-8, res))
            throw std::runtime_error("fit_imc: subproblem remained ill-conditioned after fallback");
    }
    return res;
}

inline double score_pair(const FactorModel& model, const Vector& drug_vec,
                         const Vector& disease_vec) {
    if (drug_vec.size() != model.dim() || disease_vec.size() != model.dim())
        throw std::invalid_argument("score_pair: dimension mismatch");
    return (model.G.transpose() * drug_vec).dot(model.H.transpose() * disease_vec);
}

inline ScoreMatrix score_all(const FactorModel& model, const EmbeddingSet& drugs,
                             const EmbeddingSet& diseases) {
    if (drugs.dim() != model.dim() || diseases.dim() != model.dim())
        throw std::invalid_argument("score_all: dimension mismatch");
    return ScoreMatrix((drugs.matrix() * model.G) * (diseases.matrix() * model.H).transpose());
}

// Drugs sorted by descending score; ties broken by ascending drug index.
inline std::vector<std::pair<int, double>> rank_drugs_for_disease(
    const ScoreMatrix& scores, int disease, const std::set<int>& exclude = {}) {
    if (disease < 0 || disease >= scores.n_diseases())
        throw std::invalid_argument("rank_drugs_for_disease: disease index out of range");
    std::vector<std::pair<int, double>> ranked;
    ranked.reserve(scores.n_drugs());
    for (int i = 0; i < scores.n_drugs(); ++i) {
        if (exclude.count(i)) continue;
        ranked.emplace_back(i, scores.values(i, disease));
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ranked;
}

// --- model persistence -------------------------------------------------
// Text format with hexfloat payloads so reload is bit-exact. The catalog
// hash pins the entity ordering the factors were trained against.

namespace detail {

inline std::string hexdouble(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

inline double parse_hexdouble(const std::string& tok, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == nullptr || *end != '\0')
        throw std::runtime_error("model file: bad " + what + " value '" + tok + "'");
    return v;
}

}  // namespace detail

inline std::string serialize_model(const FactorModel& model, std::uint64_t catalog_hash) {
    std::ostringstream out;
    out << "repolearn-model 1\n";
    out << "catalog_hash " << catalog_hash << "\n";
    out << "dim " << model.dim() << "\n";
    out << "rank " << model.rank() << "\n";
    out << "lambda " << detail::hexdouble(model.lambda) << "\n";
    for (const char* name : {"G", "H"}) {
        const Matrix& m = (name[0] == 'G') ? model.G : model.H;
        out << name << "\n";
        for (int i = 0; i < m.rows(); ++i) {
            for (int k = 0; k < m.cols(); ++k) {
                if (k) out << ' ';
                out << detail::hexdouble(m(i, k));
            }
            out << "\n";
        }
    }
    return out.str();
}

inline FactorModel deserialize_model(std::istream& in, std::uint64_t expected_catalog_hash) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "repolearn-model" || version != 1)
        throw std::runtime_error("model file: unrecognized header");
    std::string key;
    std::uint64_t hash = 0;
    int dim = 0, rank = 0;
    std::string lambda_tok;
    if (!(in >> key >> hash) || key != "catalog_hash")
        throw std::runtime_error("model file: missing catalog_hash");
    if (hash != expected_catalog_hash)
        throw std::runtime_error("model file: catalog hash mismatch (model was trained against a "
                                 "different catalog)");
    if (!(in >> key >> dim) || key != "dim") throw std::runtime_error("model file: missing dim");
    if (!(in >> key >> rank) || key != "rank") throw std::runtime_error("model file: missing rank");
    if (!(in >> key >> lambda_tok) || key != "lambda")
        throw std::runtime_error("model file: missing lambda");
    const double lambda = detail::parse_hexdouble(lambda_tok, "lambda");

    auto read_matrix = [&](const char* name) {
        if (!(in >> key) || key != name)
            throw std::runtime_error(std::string("model file: missing matrix ") + name);
        Matrix m(dim, rank);
        std::string tok;
        for (int i = 0; i < dim; ++i)
            for (int k = 0; k < rank; ++k) {
                if (!(in >> tok))
                    throw std::runtime_error(std::string("model file: truncated matrix ") + name);
                m(i, k) = detail::parse_hexdouble(tok, name);
            }
        return m;
    };
    Matrix G = read_matrix("G");
    Matrix H = read_matrix("H");
    return FactorModel(std::move(G), std::move(H), lambda);
}

inline FactorModel load_model(const std::string& path, std::uint64_t expected_catalog_hash) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    return deserialize_model(in, expected_catalog_hash);
}

}  // namespace repolearn
