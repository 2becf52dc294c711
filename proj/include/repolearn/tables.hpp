#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace repolearn {

// Sorted, duplicate-free token set (side-effect identifiers and the like).
using TokenSet = std::vector<std::string>;

inline TokenSet make_token_set(std::vector<std::string> tokens) {
    for (const auto& t : tokens) {
        if (t.empty()) throw std::invalid_argument("token set: empty token");
    }
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

// entity_id -> annotation token set; empty sets are allowed and simply yield
// masked-out similarity entries downstream.
struct SetAnnotations {
    std::map<std::string, TokenSet> sets;

    bool has(const std::string& id) const { return sets.count(id) > 0; }
    const TokenSet& at(const std::string& id) const { return sets.at(id); }
};

// Fixed-width chemical fingerprint.
class BitVector {
public:
    BitVector() = default;

    static BitVector from_string(const std::string& bits) {
        BitVector v;
        v.width_ = static_cast<int>(bits.size());
        v.words_.assign((bits.size() + 63) / 64, 0);
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (bits[i] == '1')
                v.words_[i / 64] |= std::uint64_t{1} << (i % 64);
            else if (bits[i] != '0')
                throw std::invalid_argument("fingerprint: character '" + std::string(1, bits[i]) +
                                            "' is not 0/1");
        }
        return v;
    }

    int width() const { return width_; }

    int popcount() const {
        int n = 0;
        for (auto w : words_) n += std::popcount(w);
        return n;
    }

    static int and_popcount(const BitVector& a, const BitVector& b) {
        int n = 0;
        for (std::size_t k = 0; k < a.words_.size(); ++k) n += std::popcount(a.words_[k] & b.words_[k]);
        return n;
    }

    static int or_popcount(const BitVector& a, const BitVector& b) {
        int n = 0;
        for (std::size_t k = 0; k < a.words_.size(); ++k) n += std::popcount(a.words_[k] | b.words_[k]);
        return n;
    }

    std::string to_string() const {
        std::string s(width_, '0');
        for (int i = 0; i < width_; ++i)
            if (words_[i / 64] >> (i % 64) & 1) s[i] = '1';
        return s;
    }

private:
    int width_ = 0;
    std::vector<std::uint64_t> words_;
};

struct FingerprintTable {
    std::map<std::string, BitVector> fingerprints;
    int width = 0;  // uniform across entries

    bool has(const std::string& id) const { return fingerprints.count(id) > 0; }
    const BitVector& at(const std::string& id) const { return fingerprints.at(id); }

    void insert(const std::string& id, BitVector v) {
        if (v.width() < 1) throw std::invalid_argument("fingerprint: width must be >= 1");
        if (width == 0) width = v.width();
        if (v.width() != width)
            throw std::invalid_argument("fingerprint for '" + id + "': width " +
                                        std::to_string(v.width()) + " != table width " +
                                        std::to_string(width));
        if (!fingerprints.emplace(id, std::move(v)).second)
            throw std::invalid_argument("fingerprint: duplicate entity '" + id + "'");
    }
};

// entity_id -> set of biological sequences (drug targets / disease genes).
struct SequenceTable {
    std::map<std::string, std::vector<std::string>> sequences;
    std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

    bool has(const std::string& id) const { return sequences.count(id) > 0; }
    const std::vector<std::string>& at(const std::string& id) const { return sequences.at(id); }

    void insert(const std::string& id, std::string seq) {
        if (seq.empty()) throw std::invalid_argument("sequence for '" + id + "' is empty");
        for (char c : seq) {
            if (alphabet.find(c) == std::string::npos)
                throw std::invalid_argument("sequence for '" + id + "': character '" +
                                            std::string(1, c) + "' outside alphabet");
        }
        auto& bucket = sequences[id];
        if (std::find(bucket.begin(), bucket.end(), seq) == bucket.end())
            bucket.push_back(std::move(seq));
    }
};

// disease_id -> concept tokens whose vectors are averaged into the disease
// vector; tokens unique per disease, file order preserved.
struct ConceptMap {
    std::vector<std::pair<std::string, std::vector<std::string>>> entries;

    void insert(const std::string& disease, std::vector<std::string> concepts) {
        if (concepts.empty())
            throw std::invalid_argument("concept map: no concepts for '" + disease + "'");
        std::vector<std::string> seen = concepts;
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
            throw std::invalid_argument("concept map: duplicate concept for '" + disease + "'");
        for (const auto& e : entries) {
            if (e.first == disease)
                throw std::invalid_argument("concept map: duplicate disease '" + disease + "'");
        }
        entries.emplace_back(disease, std::move(concepts));
    }
};

}  // namespace repolearn
