#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "engram/errors.hpp"
#include "engram/text.hpp"

namespace engram {

using EmbeddingVector = std::vector<double>;

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

inline void l2_normalize(EmbeddingVector& v) {
    double n = l2_norm(v);
    if (n <= 0.0) {
        if (!v.empty()) v[0] = 1.0;  // degenerate input gets a fixed unit basis vector
        return;
    }
    for (auto& x : v) x /= n;
}

inline bool is_unit_norm(const EmbeddingVector& v, double tol = 1e-6) {
    return !v.empty() && std::abs(l2_norm(v) - 1.0) <= tol;
}

// Cosine of two provider-normalized vectors.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double na = l2_norm(a), nb = l2_norm(b);
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

class Embedder {
public:
    virtual ~Embedder() = default;

    // Deterministic per implementation: same text, same vector. Unit norm.
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::size_t dimension() const = 0;
};

using EmbedderPtr = std::shared_ptr<Embedder>;

namespace detail {
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}
} // namespace detail

// Dependency-free signed feature hashing over word unigrams and bigrams.
// Lowercases, splits on non-alphanumerics, hashes each feature into one of D
// buckets with a hash-derived sign, then L2-normalizes. Rough lexical
// similarity is preserved, which is all the offline pipeline needs.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dim = 768) : dim_(dim) {
        if (dim_ == 0) throw validation_error("embedding dimension must be positive");
    }

    EmbeddingVector embed(const std::string& text) override {
        if (trim(text).empty()) throw validation_error("cannot embed empty text");
        EmbeddingVector v(dim_, 0.0);
        auto words = tokenize_words(text);
        auto add_feature = [&](const std::string& feature) {
            std::uint64_t h = detail::fnv1a64(feature);
            std::size_t bucket = static_cast<std::size_t>(h % dim_);
            double sign = ((h >> 32) & 1u) ? 1.0 : -1.0;
            v[bucket] += sign;
        };
        for (std::size_t i = 0; i < words.size(); ++i) {
            add_feature(words[i]);
            if (i + 1 < words.size()) add_feature(words[i] + "_" + words[i + 1]);
        }
        l2_normalize(v);
        return v;
    }

    std::size_t dimension() const override { return dim_; }

private:
    std::size_t dim_;
};

} // namespace engram
