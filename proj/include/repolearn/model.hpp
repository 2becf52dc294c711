#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "repolearn/rng.hpp"

namespace repolearn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Side { drug, disease };

inline const char* side_name(Side s) { return s == Side::drug ? "drug" : "disease"; }

// Ordered identifier registries; list order is the canonical index mapping
// shared by every matrix in the pipeline.
class EntityCatalog {
public:
    EntityCatalog(std::vector<std::string> drugs, std::vector<std::string> diseases)
        : drug_ids_(std::move(drugs)), disease_ids_(std::move(diseases)) {
        if (drug_ids_.empty() || disease_ids_.empty())
            throw std::invalid_argument("EntityCatalog: both sides must be non-empty");
        index_or_throw(drug_ids_, drug_index_, "drug");
        index_or_throw(disease_ids_, disease_index_, "disease");
    }

    const std::vector<std::string>& drug_ids() const { return drug_ids_; }
    const std::vector<std::string>& disease_ids() const { return disease_ids_; }
    const std::vector<std::string>& ids(Side s) const {
        return s == Side::drug ? drug_ids_ : disease_ids_;
    }

    int n_drugs() const { return static_cast<int>(drug_ids_.size()); }
    int n_diseases() const { return static_cast<int>(disease_ids_.size()); }

    // -1 when the identifier is unknown.
    int index_of(Side s, const std::string& id) const {
        const auto& m = (s == Side::drug) ? drug_index_ : disease_index_;
        auto it = m.find(id);
        return it == m.end() ? -1 : it->second;
    }

    std::uint64_t hash() const {
        std::uint64_t h = rng::fnv1a("catalog");
        for (const auto& id : drug_ids_) h = rng::splitmix64(h ^ rng::fnv1a(id));
        h = rng::splitmix64(h ^ 0x5eed);
        for (const auto& id : disease_ids_) h = rng::splitmix64(h ^ rng::fnv1a(id));
        return h;
    }

private:
    static void index_or_throw(const std::vector<std::string>& ids,
                               std::unordered_map<std::string, int>& out, const char* side) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!out.emplace(ids[i], static_cast<int>(i)).second)
                throw std::invalid_argument(std::string("EntityCatalog: duplicate ") + side +
                                            " id '" + ids[i] + "'");
        }
    }

    std::vector<std::string> drug_ids_;
    std::vector<std::string> disease_ids_;
    std::unordered_map<std::string, int> drug_index_;
    std::unordered_map<std::string, int> disease_index_;
};

// Dense per-entity vectors of a common dimension. Tokens are entity ids (or
// concept tokens before aggregation); row order is the index mapping.
class EmbeddingSet {
public:
    EmbeddingSet(Side side, std::vector<std::string> tokens, Matrix vectors)
        : side_(side), tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
        if (vectors_.rows() != static_cast<Eigen::Index>(tokens_.size()))
            throw std::invalid_argument("EmbeddingSet: token/row count mismatch");
        if (vectors_.cols() < 1)
            throw std::invalid_argument("EmbeddingSet: dimension must be positive");
        for (Eigen::Index i = 0; i < vectors_.rows(); ++i) {
            if (!vectors_.row(i).allFinite())
                throw std::invalid_argument("EmbeddingSet: non-finite vector for token '" +
                                            tokens_[i] + "'");
            if (vectors_.row(i).norm() <= 0.0)
                throw std::invalid_argument("EmbeddingSet: zero-norm vector for token '" +
                                            tokens_[i] + "'");
        }
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
                throw std::invalid_argument("EmbeddingSet: duplicate token '" + tokens_[i] + "'");
        }
    }

    Side side() const { return side_; }
    int dim() const { return static_cast<int>(vectors_.cols()); }
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const Matrix& matrix() const { return vectors_; }
    Vector vec(int i) const { return vectors_.row(i).transpose(); }

    bool contains(const std::string& token) const { return index_.count(token) > 0; }
    int index_of(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? -1 : it->second;
    }

    // Rows reordered to the given token order (all must be present).
    EmbeddingSet reindexed(const std::vector<std::string>& order) const {
        Matrix out(order.size(), vectors_.cols());
        for (std::size_t i = 0; i < order.size(); ++i) {
            const int r = index_of(order[i]);
            if (r < 0)
                throw std::invalid_argument("EmbeddingSet: token '" + order[i] +
                                            "' missing during reindex");
            out.row(i) = vectors_.row(r);
        }
        return EmbeddingSet(side_, order, std::move(out));
    }

private:
    Side side_;
    std::vector<std::string> tokens_;
    Matrix vectors_;
    std::unordered_map<std::string, int> index_;
};

// Symmetric entity-by-entity scores in [0, 1] with a missing-entry mask.
// The diagonal is forced to 1 wherever it is masked in.
class SimilarityMatrix {
public:
    SimilarityMatrix(Side side, std::string name, Matrix values,
                     std::vector<std::uint8_t> mask)
        : side_(side), name_(std::move(name)), values_(std::move(values)),
          mask_(std::move(mask)) {
        const Eigen::Index n = values_.rows();
        if (values_.cols() != n)
            throw std::invalid_argument("SimilarityMatrix: matrix must be square");
        if (mask_.size() != static_cast<std::size_t>(n * n))
            throw std::invalid_argument("SimilarityMatrix: mask size mismatch");
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                if (mask_[i * n + j] != mask_[j * n + i])
                    throw std::invalid_argument("SimilarityMatrix: asymmetric mask at (" +
                                                std::to_string(i) + "," + std::to_string(j) + ")");
                if (!mask_[i * n + j]) continue;
                const double v = values_(i, j);
                if (v != values_(j, i))
                    throw std::invalid_argument("SimilarityMatrix: asymmetric values at (" +
                                                std::to_string(i) + "," + std::to_string(j) + ")");
                if (!(v >= 0.0 && v <= 1.0))
                    throw std::invalid_argument("SimilarityMatrix '" + name_ + "': value " +
                                                std::to_string(v) + " outside [0,1] at (" +
                                                std::to_string(i) + "," + std::to_string(j) + ")");
            }
            if (mask_[i * n + i]) values_(i, i) = 1.0;
        }
    }

    Side side() const { return side_; }
    const std::string& name() const { return name_; }
    int size() const { return static_cast<int>(values_.rows()); }
    const Matrix& values() const { return values_; }

    bool defined(int i, int j) const { return mask_[static_cast<std::size_t>(i) * size() + j] != 0; }
    double at(int i, int j) const { return values_(i, j); }
    const std::vector<std::uint8_t>& mask() const { return mask_; }

    static std::vector<std::uint8_t> full_mask(int n) {
        return std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 1);
    }

private:
    Side side_;
    std::string name_;
    Matrix values_;
    std::vector<std::uint8_t> mask_;
};

// Sparse list of known (drug, disease) positives over catalog indices.
class AssociationMatrix {
public:
    AssociationMatrix(int n_drugs, int n_diseases, std::vector<std::pair<int, int>> positives)
        : n_drugs_(n_drugs), n_diseases_(n_diseases), positives_(std::move(positives)) {
        if (n_drugs_ < 1 || n_diseases_ < 1)
            throw std::invalid_argument("AssociationMatrix: dims must be positive");
        for (auto [i, j] : positives_) {
            if (i < 0 || i >= n_drugs_ || j < 0 || j >= n_diseases_)
                throw std::invalid_argument("AssociationMatrix: pair (" + std::to_string(i) + "," +
                                            std::to_string(j) + ") out of range");
        }
        std::sort(positives_.begin(), positives_.end());
        positives_.erase(std::unique(positives_.begin(), positives_.end()), positives_.end());
    }

    int n_drugs() const { return n_drugs_; }
    int n_diseases() const { return n_diseases_; }
    const std::vector<std::pair<int, int>>& positives() const { return positives_; }
    std::size_t count() const { return positives_.size(); }

    bool contains(int i, int j) const {
        return std::binary_search(positives_.begin(), positives_.end(), std::make_pair(i, j));
    }

private:
    int n_drugs_;
    int n_diseases_;
    std::vector<std::pair<int, int>> positives_;
};

inline Matrix dense_view(const AssociationMatrix& assoc) {
    Matrix out = Matrix::Zero(assoc.n_drugs(), assoc.n_diseases());
    for (auto [i, j] : assoc.positives()) out(i, j) = 1.0;
    return out;
}

// Bilinear factors; the induced projection Z = G * H^T maps the drug vector
// space onto the disease vector space.
struct FactorModel {
    Matrix G;
    Matrix H;
    double lambda = 0.0;

    FactorModel(Matrix g, Matrix h, double lam) : G(std::move(g)), H(std::move(h)), lambda(lam) {
        if (G.rows() != H.rows() || G.cols() != H.cols())
            throw std::invalid_argument("FactorModel: G and H must share dimensions");
        if (G.cols() < 1 || G.cols() > G.rows())
            throw std::invalid_argument("FactorModel: rank must be in [1, dim]");
        if (lambda < 0.0) throw std::invalid_argument("FactorModel: lambda must be non-negative");
    }

    int dim() const { return static_cast<int>(G.rows()); }
    int rank() const { return static_cast<int>(G.cols()); }
    Matrix projection() const { return G * H.transpose(); }
};

struct ScoreMatrix {
    Matrix values;

    ScoreMatrix() = default;
    explicit ScoreMatrix(Matrix v) : values(std::move(v)) {
        if (!values.allFinite()) throw std::invalid_argument("ScoreMatrix: non-finite entries");
    }

    int n_drugs() const { return static_cast<int>(values.rows()); }
    int n_diseases() const { return static_cast<int>(values.cols()); }
};

}  // namespace repolearn
