#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "repolearn/model.hpp"
#include "repolearn/parallel.hpp"
#include "repolearn/tables.hpp"

namespace repolearn {

// Local-alignment scoring: positive match reward, penalized mismatches and
// gaps (linear, per symbol). An optional substitution table overrides the
// match/mismatch constants for listed character pairs.
struct AlignmentScoring {
    double match = 3.0;
    double mismatch = -3.0;
    double gap = -2.0;
    std::map<std::pair<char, char>, double> substitutions;

    void validate() const {
        if (!(match > 0.0)) throw std::invalid_argument("AlignmentScoring: match must be > 0");
        if (!(gap < 0.0)) throw std::invalid_argument("AlignmentScoring: gap must be < 0");
    }

    double score(char a, char b) const {
        if (!substitutions.empty()) {
            auto it = substitutions.find({a, b});
            if (it == substitutions.end()) it = substitutions.find({b, a});
            if (it != substitutions.end()) return it->second;
        }
        return a == b ? match : mismatch;
    }
};

// |A ∩ B| / |A ∪ B|; undefined when both sets are empty. Inputs are sorted
// token sets (see make_token_set).
inline std::optional<double> jaccard_similarity(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) return std::nullopt;
    std::size_t inter = 0, ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        const int c = a[ia].compare(b[ib]);
        if (c == 0) {
            ++inter;
            ++ia;
            ++ib;
        } else if (c < 0) {
            ++ia;
        } else {
            ++ib;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// popcount(A and B) / popcount(A or B); undefined when both are all-zero.
inline std::optional<double> tanimoto_similarity(const BitVector& a, const BitVector& b) {
    if (a.width() != b.width())
        throw std::invalid_argument("tanimoto: fingerprint widths differ (" +
                                    std::to_string(a.width()) + " vs " +
                                    std::to_string(b.width()) + ")");
    const int uni = BitVector::or_popcount(a, b);
    if (uni == 0) return std::nullopt;
    return static_cast<double>(BitVector::and_popcount(a, b)) / static_cast<double>(uni);
}

// Smith-Waterman optimal local alignment score with linear gaps:
//   H[i][j] = max(0, H[i-1][j-1] + s(a_i, b_j), H[i-1][j] + gap, H[i][j-1] + gap)
inline double smith_waterman(std::string_view a, std::string_view b,
                             const AlignmentScoring& sc = {}) {
    sc.validate();
    if (a.empty() || b.empty())
        throw std::invalid_argument("smith_waterman: sequences must be non-empty");
    const std::size_t m = b.size();
    std::vector<double> prev(m + 1, 0.0), cur(m + 1, 0.0);
    double best = 0.0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = 0.0;
        for (std::size_t j = 1; j <= m; ++j) {
            double h = prev[j - 1] + sc.score(a[i - 1], b[j - 1]);
            h = std::max(h, prev[j] + sc.gap);
            h = std::max(h, cur[j - 1] + sc.gap);
            h = std::max(h, 0.0);
            cur[j] = h;
            best = std::max(best, h);
        }
        std::swap(prev, cur);
    }
    return best;
}

// SW(a,b) / sqrt(SW(a,a) * SW(b,b)); self-scores are positive because match
// rewards are, so the result lands in [0, 1].
inline double normalized_sw(std::string_view a, std::string_view b,
                            const AlignmentScoring& sc = {}) {
    const double saa = smith_waterman(a, a, sc);
    const double sbb = smith_waterman(b, b, sc);
    return smith_waterman(a, b, sc) / std::sqrt(saa * sbb);
}

// Mean normalized SW over all cross pairs of the two sequence sets; undefined
// when either set is empty.
inline std::optional<double> setwise_mean_similarity(const std::vector<std::string>& set_i,
                                                     const std::vector<std::string>& set_j,
                                                     const AlignmentScoring& sc = {}) {
    if (set_i.empty() || set_j.empty()) return std::nullopt;
    double acc = 0.0;
    for (const auto& x : set_i)
        for (const auto& y : set_j) acc += normalized_sw(x, y, sc);
    return acc / (static_cast<double>(set_i.size()) * static_cast<double>(set_j.size()));
}

namespace detail {

// Shared cell-wise builder: computes the upper triangle once (rows in
// parallel) and mirrors it. `kernel(i, j)` runs only when both entities are
// present in the source; cells where the kernel is undefined stay masked.
// A defined diagonal is forced to 1.
template <typename HasData, typename Kernel>
SimilarityMatrix build_symmetric(Side side, std::string name,
                                 const std::vector<std::string>& ids, HasData&& has_data,
                                 Kernel&& kernel, int threads) {
    const int n = static_cast<int>(ids.size());
    Matrix values = Matrix::Zero(n, n);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
    std::vector<char> covered(n);
    for (int i = 0; i < n; ++i) covered[i] = has_data(ids[i]) ? 1 : 0;

    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
        const int i = static_cast<int>(row);
        if (!covered[i]) return;
        for (int j = i; j < n; ++j) {
            if (!covered[j]) continue;
            const std::optional<double> v = kernel(ids[i], ids[j]);
            if (!v) continue;
            const double cell = (i == j) ? 1.0 : *v;
            values(i, j) = cell;
            values(j, i) = cell;
            mask[static_cast<std::size_t>(i) * n + j] = 1;
            mask[static_cast<std::size_t>(j) * n + i] = 1;
        }
    });
    return SimilarityMatrix(side, std::move(name), std::move(values), std::move(mask));
}

}  // namespace detail

inline SimilarityMatrix build_similarity_matrix(Side side, const std::vector<std::string>& ids,
                                                const SetAnnotations& source, std::string name,
                                                int threads = 1) {
    return detail::build_symmetric(
        side, std::move(name), ids, [&](const std::string& id) { return source.has(id); },
        [&](const std::string& a, const std::string& b) {
            return jaccard_similarity(source.at(a), source.at(b));
        },
        threads);
}

inline SimilarityMatrix build_similarity_matrix(Side side, const std::vector<std::string>& ids,
                                                const FingerprintTable& source, std::string name,
                                                int threads = 1) {
    return detail::build_symmetric(
        side, std::move(name), ids, [&](const std::string& id) { return source.has(id); },
        [&](const std::string& a, const std::string& b) {
            return tanimoto_similarity(source.at(a), source.at(b));
        },
        threads);
}

inline SimilarityMatrix build_similarity_matrix(Side side, const std::vector<std::string>& ids,
                                                const SequenceTable& source,
                                                const AlignmentScoring& sc, std::string name,
                                                int threads = 1) {
    sc.validate();
    return detail::build_symmetric(
        side, std::move(name), ids, [&](const std::string& id) { return source.has(id); },
        [&](const std::string& a, const std::string& b) {
            return setwise_mean_similarity(source.at(a), source.at(b), sc);
        },
        threads);
}

}  // namespace repolearn
