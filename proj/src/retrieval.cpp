#include "mia/retrieval.hpp"

#include <algorithm>
#include <functional>

#include "mia/error.hpp"
#include "mia/log.hpp"

namespace mia {

std::vector<std::uint32_t> RankedList::chunk_ids() const {
  std::vector<std::uint32_t> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(e.chunk_id);
  return ids;
}

namespace {

RankedList rank_by(const MindscapeIndex& index, std::size_t k,
                   const std::function<double(const Chunk&)>& score) {
  if (index.chunks.empty()) raise(ErrorCode::EmptyIndex, "index has no chunks");
  RankedList list;
  list.requested_k = k;
  list.entries.reserve(index.chunks.size());
  for (const auto& chunk : index.chunks) {
    list.entries.push_back(RankedEntry{chunk.chunk_id, score(chunk)});
  }
  std::sort(list.entries.begin(), list.entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.chunk_id < b.chunk_id;
            });
  if (list.entries.size() > k) list.entries.resize(k);
  return list;
}

}  // namespace

RankedList query_only_retrieve(const EmbeddingVector& query,
                               const MindscapeIndex& index, std::size_t k) {
  return rank_by(index, k, [&](const Chunk& c) { return cosine(query, c.embedding); });
}

RankedList query_only_retrieve(const std::string& query_text,
                               EmbeddingProvider& embedder,
                               const MindscapeIndex& index, std::size_t k) {
  return query_only_retrieve(embedder.embed(query_text), index, k);
}

double dual_score(const EmbeddingVector& chunk, const EmbeddingVector& query,
                  const EmbeddingVector& signature, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) {
    raise(ErrorCode::InvalidArgument, "alpha must be in [0, 1]");
  }
  return (1.0 - alpha) * cosine(query, chunk) + alpha * cosine(signature, chunk);
}

RankedList mia_retrieve(const std::string& query_text, const Signature& signature,
                        EmbeddingProvider& embedder, const MindscapeIndex& index,
                        std::size_t k, double alpha) {
  if (signature.empty()) {
    log_warn("empty signature: falling back to query-only retrieval");
    return query_only_retrieve(query_text, embedder, index, k);
  }
  if (alpha < 0.0 || alpha > 1.0) {
    raise(ErrorCode::InvalidArgument, "alpha must be in [0, 1]");
  }
  const EmbeddingVector query = embedder.embed(query_text);
  const EmbeddingVector sig = embedder.embed(signature.rendered_text);
  return rank_by(index, k, [&](const Chunk& c) {
    return dual_score(c.embedding, query, sig, alpha);
  });
}

double recall_at_k(const RankedList& retrieved,
                   const std::set<std::uint32_t>& gold_chunk_ids, std::size_t k) {
  if (gold_chunk_ids.empty()) raise(ErrorCode::EmptyGold, "gold set is empty");
  std::size_t hits = 0;
  std::size_t seen = 0;
  for (const auto& e : retrieved.entries) {
    if (seen++ >= k) break;
    if (gold_chunk_ids.count(e.chunk_id)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gold_chunk_ids.size());
}

}  // namespace mia
