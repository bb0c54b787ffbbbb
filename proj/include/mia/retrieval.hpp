#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "mia/embedding.hpp"
#include "mia/index.hpp"
#include "mia/signature.hpp"

namespace mia {

struct RankedEntry {
  std::uint32_t chunk_id = 0;
  double score = 0.0;
};

// Top-k retrieval result: scores non-increasing, chunk ids unique, ties
// broken toward the lower chunk id.
struct RankedList {
  std::vector<RankedEntry> entries;
  std::size_t requested_k = 0;

  std::vector<std::uint32_t> chunk_ids() const;
};

constexpr std::uint32_t kStepZeroCandidates = 50;  // query-only slate size
constexpr std::uint32_t kStepRetrieveK = 20;       // per-step retrieval size
constexpr double kDefaultAlpha = 0.5;

// Ranks every chunk by cosine(query, chunk), exhaustively. Throws EmptyIndex.
RankedList query_only_retrieve(const EmbeddingVector& query,
                               const MindscapeIndex& index, std::size_t k);
RankedList query_only_retrieve(const std::string& query_text,
                               EmbeddingProvider& embedder,
                               const MindscapeIndex& index, std::size_t k);

// Dual-signal score: (1-alpha) * query similarity + alpha * signature
// similarity. alpha in [0,1].
double dual_score(const EmbeddingVector& chunk, const EmbeddingVector& query,
                  const EmbeddingVector& signature, double alpha);

// Signature-conditioned retrieval: the signature's rendered text is embedded
// once and every chunk is scored with dual_score. An empty signature falls
// back to query-only retrieval with a logged warning.
RankedList mia_retrieve(const std::string& query_text, const Signature& signature,
                        EmbeddingProvider& embedder, const MindscapeIndex& index,
                        std::size_t k, double alpha);

// |gold ∩ top-k| / |gold|. Throws EmptyGold.
double recall_at_k(const RankedList& retrieved,
                   const std::set<std::uint32_t>& gold_chunk_ids, std::size_t k);

}  // namespace mia
