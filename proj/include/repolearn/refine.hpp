#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "repolearn/model.hpp"
#include "repolearn/parallel.hpp"

namespace repolearn {

struct RefineOptions {
    double step_size = 0.01;
    int max_iters = 500;
    double rel_tol = 1e-8;
    bool include_self_pairs = false;

    void validate() const {
        if (!(step_size > 0.0)) throw std::invalid_argument("RefineOptions: step_size must be > 0");
        if (max_iters < 1) throw std::invalid_argument("RefineOptions: max_iters must be >= 1");
        if (!(rel_tol > 0.0)) throw std::invalid_argument("RefineOptions: rel_tol must be > 0");
    }
};

namespace detail {

// Flattened (neighbor, target) terms for one entity, targets grouped per
// neighbor so the cosine is evaluated once per neighbor.
struct TermSet {
    std::vector<int> neighbors;
    std::vector<std::vector<double>> targets;  // parallel to neighbors

    static TermSet build(int entity, int n, const std::vector<SimilarityMatrix>& sims,
                         bool include_self) {
        TermSet t;
        for (int j = 0; j < n; ++j) {
            if (j == entity && !include_self) continue;
            std::vector<double> ts;
            for (const auto& sim : sims) {
                if (sim.defined(entity, j)) ts.push_back(sim.at(entity, j));
            }
            if (!ts.empty()) {
                t.neighbors.push_back(j);
                t.targets.push_back(std::move(ts));
            }
        }
        return t;
    }

    bool empty() const { return neighbors.empty(); }
};

inline void check_refine_inputs(int entity, const Vector& candidate, const EmbeddingSet& raw,
                                const std::vector<SimilarityMatrix>& sims) {
    if (entity < 0 || entity >= raw.size())
        throw std::invalid_argument("refine: entity index out of range");
    if (candidate.size() != raw.dim())
        throw std::invalid_argument("refine: candidate dimension mismatch");
    if (!(candidate.norm() > 0.0))
        throw std::invalid_argument("refine: zero-norm candidate");
    for (const auto& sim : sims) {
        if (sim.size() != raw.size())
            throw std::invalid_argument("refine: similarity matrix '" + sim.name() +
                                        "' size does not match embedding count");
    }
}

inline double objective_on_terms(const Vector& x, const Matrix& raw_rows,
                                 const std::vector<double>& raw_norms, const TermSet& terms) {
    const double xn = x.norm();
    double acc = 0.0;
    for (std::size_t t = 0; t < terms.neighbors.size(); ++t) {
        const int j = terms.neighbors[t];
        const double c = raw_rows.row(j).dot(x) / (xn * raw_norms[j]);
        for (double target : terms.targets[t]) {
            const double r = c - target;
            acc += r * r;
        }
    }
    return acc;
}

inline Vector gradient_on_terms(const Vector& x, const Matrix& raw_rows,
                                const std::vector<double>& raw_norms, const TermSet& terms) {
    const double xn = x.norm();
    const double xn2 = xn * xn;
    Vector grad = Vector::Zero(x.size());
    for (std::size_t t = 0; t < terms.neighbors.size(); ++t) {
        const int j = terms.neighbors[t];
        const double c = raw_rows.row(j).dot(x) / (xn * raw_norms[j]);
        double coef = 0.0;
        for (double target : terms.targets[t]) coef += 2.0 * (c - target);
        // d/dx cos(x,y) = y / (|x||y|) - cos(x,y) * x / |x|^2
        grad += coef * (raw_rows.row(j).transpose() / (xn * raw_norms[j]) - (c / xn2) * x);
    }
    return grad;
}

inline std::vector<double> row_norms(const Matrix& m) {
    std::vector<double> norms(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) norms[i] = m.row(i).norm();
    return norms;
}

}  // namespace detail

// Sum over masked-in neighbors j and measures k of
// (cos(candidate, raw_j) - Sim_k(i, j))^2. Self pairs excluded by default.
inline double objective_value(int entity, const Vector& candidate, const EmbeddingSet& raw,
                              const std::vector<SimilarityMatrix>& sims,
                              bool include_self_pairs = false) {
    detail::check_refine_inputs(entity, candidate, raw, sims);
    const auto terms = detail::TermSet::build(entity, raw.size(), sims, include_self_pairs);
    return detail::objective_on_terms(candidate, raw.matrix(), detail::row_norms(raw.matrix()),
                                      terms);
}

inline Vector objective_gradient(int entity, const Vector& candidate, const EmbeddingSet& raw,
                                 const std::vector<SimilarityMatrix>& sims,
                                 bool include_self_pairs = false) {
    detail::check_refine_inputs(entity, candidate, raw, sims);
    const auto terms = detail::TermSet::build(entity, raw.size(), sims, include_self_pairs);
    return detail::gradient_on_terms(candidate, raw.matrix(), detail::row_norms(raw.matrix()),
                                     terms);
}

struct RefineResult {
    Vector vector;
    int iterations = 0;
    double initial_objective = 0.0;
    double final_objective = 0.0;
    bool no_terms = false;  // entity had no defined similarity term; vector returned unchanged
};

// Fixed-step gradient descent from the raw vector, with per-iteration step
// halving (up to 30) whenever a step fails to decrease the objective.
// Guarantees final objective <= initial objective.
inline RefineResult refine_vector(int entity, const EmbeddingSet& raw,
                                  const std::vector<SimilarityMatrix>& sims,
                                  const RefineOptions& opts = {}) {
    opts.validate();
    Vector x = raw.vec(entity);
    detail::check_refine_inputs(entity, x, raw, sims);

    RefineResult res;
    const auto terms = detail::TermSet::build(entity, raw.size(), sims, opts.include_self_pairs);
    if (terms.empty()) {
        res.vector = x;
        res.no_terms = true;
        return res;
    }

    const auto norms = detail::row_norms(raw.matrix());
    double J = detail::objective_on_terms(x, raw.matrix(), norms, terms);
    res.initial_objective = J;

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        const Vector grad = detail::gradient_on_terms(x, raw.matrix(), norms, terms);
        double step = opts.step_size;
        bool accepted = false;
        Vector candidate;
        double J_new = J;
        for (int halving = 0; halving <= 30; ++halving) {
            candidate = x - step * grad;
            if (candidate.norm() > 0.0 && candidate.allFinite()) {
                J_new = detail::objective_on_terms(candidate, raw.matrix(), norms, terms);
                if (J_new < J) {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;
        x = candidate;
        res.iterations = iter + 1;
        const double drop = J - J_new;
        J = J_new;
        if (drop <= opts.rel_tol * (1.0 + J)) break;
    }

    res.vector = x;
    res.final_objective = J;
    return res;
}

struct RefineReport {
    std::vector<int> iterations;
    std::vector<double> initial_objective;
    std::vector<double> final_objective;
    std::vector<int> untouched;  // entities with no defined similarity term
    long total_iterations = 0;
};

// Refines every entity independently against the fixed raw vectors; safe to
// run entities concurrently, output identical for any thread count.
inline std::pair<EmbeddingSet, RefineReport> refine_all(const EmbeddingSet& raw,
                                                        const std::vector<SimilarityMatrix>& sims,
                                                        const RefineOptions& opts = {},
                                                        int threads = 1) {
    opts.validate();
    for (const auto& sim : sims) {
        if (sim.size() != raw.size())
            throw std::invalid_argument("refine_all: similarity matrix '" + sim.name() +
                                        "' size does not match embedding count");
    }
    const int n = raw.size();
    Matrix out(n, raw.dim());
    RefineReport report;
    report.iterations.resize(n);
    report.initial_objective.resize(n);
    report.final_objective.resize(n);
    std::vector<std::uint8_t> no_terms(n, 0);

    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RefineResult r = refine_vector(static_cast<int>(i), raw, sims, opts);
        out.row(i) = r.vector.transpose();
        report.iterations[i] = r.iterations;
        report.initial_objective[i] = r.initial_objective;
        report.final_objective[i] = r.final_objective;
        no_terms[i] = r.no_terms ? 1 : 0;
    });

    for (int i = 0; i < n; ++i) {
        if (no_terms[i]) report.untouched.push_back(i);
        report.total_iterations += report.iterations[i];
    }
    return {EmbeddingSet(raw.side(), raw.tokens(), std::move(out)), std::move(report)};
}

}  // namespace repolearn
