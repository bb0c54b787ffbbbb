#include "mia/embedding.hpp"

#include <cmath>

#include "mia/error.hpp"
#include "mia/hashing.hpp"

namespace mia {

EmbeddingVector normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) {
    raise(ErrorCode::ZeroVector, "cannot normalize the all-zero vector");
  }
  const double inv = 1.0 / std::sqrt(sq);
  EmbeddingVector out;
  out.values.reserve(v.size());
  for (double x : v) out.values.push_back(x * inv);
  return out;
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim()) {
    raise(ErrorCode::DimMismatch,
          "cosine over dims " + std::to_string(u.dim()) + " vs " +
              std::to_string(v.dim()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < u.dim(); ++i) dot += u.values[i] * v.values[i];
  return dot;
}

EmbeddingVector hash_embed(std::string_view text, std::size_t dim) {
  if (dim < 8) {
    raise(ErrorCode::InvalidArgument, "hash_embed requires dim >= 8");
  }
  EmbeddingVector reserved;
  reserved.values.assign(dim, 0.0);
  reserved.values[0] = 1.0;
  if (text.empty()) return reserved;

  std::vector<double> acc(dim, 0.0);
  auto add_feature = [&](std::string_view gram) {
    const std::uint64_t h = fnv1a64(gram);
    const std::size_t bucket = static_cast<std::size_t>(h % dim);
    // Top bit picks the sign, as in signed feature hashing.
    acc[bucket] += (h >> 63) ? -1.0 : 1.0;
  };

  if (text.size() < 3) {
    add_feature(text);
  } else {
    for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
      add_feature(text.substr(i, 3));
    }
  }

  double sq = 0.0;
  for (double x : acc) sq += x * x;
  if (sq == 0.0) return reserved;  // signed buckets cancelled out exactly
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : acc) x *= inv;
  return EmbeddingVector{std::move(acc)};
}

}  // namespace mia
