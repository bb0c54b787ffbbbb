#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mia/embedding.hpp"
#include "mia/prompts.hpp"
#include "mia/providers.hpp"

namespace mia {

// Fine-grained evidence unit. chunk_id is the 1-based source order within the
// indexed document and is contiguous from 1.
struct Chunk {
  std::uint32_t chunk_id = 0;
  std::string doc_id;
  std::string text;
  EmbeddingVector embedding;
};

// High-level memory unit covering one window of chunks. covered_chunks is
// exactly the window {l : ceil(l/W) == summary_id}; windows partition the
// chunk sequence.
struct SessionSummary {
  std::uint32_t summary_id = 0;
  std::string doc_id;
  std::string text;
  EmbeddingVector embedding;
  std::vector<std::uint32_t> covered_chunks;
};

// Provenance span for one source book inside a (possibly merged) index.
struct BookSpan {
  std::string book_id;
  std::uint32_t first_chunk = 0;  // 1-based id of the book's first chunk
  std::uint32_t chunk_count = 0;
};

struct MindscapeIndex {
  std::string doc_id;
  std::uint32_t window_size = 20;
  std::uint32_t chunk_words = 200;
  std::vector<Chunk> chunks;
  std::vector<SessionSummary> summaries;
  std::vector<BookSpan> books;
  std::string embedder_fingerprint;
  std::string summarizer_fingerprint;
  std::string summary_prompt_hash;

  std::size_t chunk_count() const { return chunks.size(); }
  std::size_t summary_count() const { return summaries.size(); }

  const Chunk& chunk(std::uint32_t chunk_id) const;
  const SessionSummary& summary(std::uint32_t summary_id) const;

  // Window mapping for a chunk of this index; checks 1 <= chunk_id <= L.
  std::uint32_t summary_of(std::uint32_t chunk_id) const;
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

// Splits on whitespace into chunks of at most target_len words; the last
// chunk may be shorter. Throws EmptyDocument for whitespace-only input.
std::vector<std::string> chunk_document(const std::string& text,
                                        std::uint32_t target_len);

// ceil(chunk_id / W); the fixed chunk-to-summary mapping. chunk_id is
// 1-based; upper-bound checking is the index's job (it knows L).
std::uint32_t summary_id_for_chunk(std::uint32_t chunk_id, std::uint32_t window_size);

struct Window {
  std::uint32_t summary_id = 0;           // 1-based window index
  std::vector<std::uint32_t> chunk_ids;   // contiguous, source order
};

// Partitions chunk ids 1..L into ceil(L/W) non-overlapping contiguous
// windows of W chunks (last one may be partial).
std::vector<Window> sessionize(std::size_t chunk_count, std::uint32_t window_size);

struct DocumentText {
  std::string doc_id;
  std::string text;
};

// Corpus input: a directory of UTF-8 .txt files (one book each, merged in
// filename order) or a JSON-lines file of {"doc_id":..., "text":...}.
std::vector<DocumentText> load_corpus(const std::string& path);

struct IndexBuildOptions {
  std::uint32_t window_size = 20;
  std::uint32_t chunk_words = 200;
  // Overrides the index doc_id (defaults to the single book's id, or the
  // book ids joined with '+').
  std::string doc_id;
  // Summary cache directory; empty disables caching.
  std::string cache_dir;
  std::size_t max_parallel_windows = 4;
};

struct IndexBuildStats {
  std::size_t llm_calls = 0;
  std::size_t cache_hits = 0;
};

// Builds the full index for one logical document. Multiple books are merged
// in the given order into a single chunk sequence (series aggregation) with
// per-book spans recorded. Summaries are produced once per window with the
// session-summary prompt and cached to disk keyed by document, window,
// prompt hash and window text.
MindscapeIndex build_index(const std::vector<DocumentText>& books,
                           EmbeddingProvider& embedder,
                           LLMProvider& summarizer,
                           const PromptTemplate& summary_template,
                           const IndexBuildOptions& options,
                           IndexBuildStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Persistence: JSON manifest + packed float64 embeddings, CRC-checked.
// Round-trips are lossless including embedding bits.
// ---------------------------------------------------------------------------

void save_index(const MindscapeIndex& index, const std::string& path);
MindscapeIndex load_index(const std::string& path);

// Human-oriented description (used by `index inspect`).
std::string index_info_json(const MindscapeIndex& index);

}  // namespace mia
