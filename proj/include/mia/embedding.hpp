#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace mia {

// Unit-norm dense vector. Everything downstream (retrieval scores, the
// selection objective) assumes callers only construct these through
// normalize() or a provider, so cosine() can be a plain dot product.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

constexpr double kNormTolerance = 1e-6;

// Scales v to unit Euclidean norm. Throws ZeroVector when every element is
// zero (degenerate text or a provider fault).
EmbeddingVector normalize(std::span<const double> v);

// Dot product of two unit vectors. Throws DimMismatch.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

// Deterministic offline embedding: byte trigrams of `text` are feature-hashed
// into `dim` signed buckets, then normalized. Stable across runs and
// platforms. Empty text maps to the reserved basis vector e1 instead of
// erroring; dim must be >= 8.
EmbeddingVector hash_embed(std::string_view text, std::size_t dim);

}  // namespace mia
