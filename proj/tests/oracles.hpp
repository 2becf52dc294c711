// Test-only reference implementations, kept independent of the library code
// paths they check: naive counting, a full-table alignment DP, central
// finite differences, and brute-force pair counting for AUC.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "repolearn/model.hpp"
#include "repolearn/simkit.hpp"

namespace oracle {

inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end()), uni, inter;
    uni = sa;
    uni.insert(sb.begin(), sb.end());
    for (const auto& t : sa)
        if (sb.count(t)) inter.insert(t);
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

inline double tanimoto(const std::string& a, const std::string& b) {
    int inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool ba = a[i] == '1', bb = b[i] == '1';
        if (ba && bb) ++inter;
        if (ba || bb) ++uni;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// Full-table Smith-Waterman, no row recycling.
inline double smith_waterman(const std::string& a, const std::string& b,
                             const repolearn::AlignmentScoring& sc = {}) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<double>> H(n + 1, std::vector<double>(m + 1, 0.0));
    double best = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const double diag = H[i - 1][j - 1] + sc.score(a[i - 1], b[j - 1]);
            const double up = H[i - 1][j] + sc.gap;
            const double left = H[i][j - 1] + sc.gap;
            H[i][j] = std::max({0.0, diag, up, left});
            best = std::max(best, H[i][j]);
        }
    }
    return best;
}

inline repolearn::Vector central_finite_difference(
    const std::function<double(const repolearn::Vector&)>& f, const repolearn::Vector& x,
    double h = 1e-6) {
    repolearn::Vector g(x.size());
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        repolearn::Vector lo = x, hi = x;
        lo(d) -= h;
        hi(d) += h;
        g(d) = (f(hi) - f(lo)) / (2.0 * h);
    }
    return g;
}

inline double auc_pair_counting(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0.0;
    for (double p : pos) {
        for (double n : neg) {
            if (p > n)
                wins += 1.0;
            else if (p == n)
                wins += 0.5;
        }
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace oracle
