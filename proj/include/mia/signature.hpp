#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mia/embedding.hpp"
#include "mia/index.hpp"

namespace mia {

// ---------------------------------------------------------------------------
// Candidate pool: the rank-ordered step-0 retrieval slate plus the distinct
// session summaries it touches. Self-contained so synthetic instances are
// easy to build in tests.
// ---------------------------------------------------------------------------

struct PoolChunk {
  std::uint32_t chunk_id = 0;
  std::uint32_t rank = 0;        // 1-based retrieval rank
  double weight = 0.0;           // 1 / (rank + 1)
  std::uint32_t summary_id = 0;  // covering summary under the window mapping
  EmbeddingVector embedding;
};

struct PoolSummary {
  std::uint32_t summary_id = 0;
  std::string text;
  EmbeddingVector embedding;
};

struct CandidatePool {
  std::vector<PoolChunk> ranked_chunks;     // rank order, rank 1 first
  std::vector<PoolSummary> pool_summaries;  // dedup, order of first appearance

  const PoolSummary& summary_by_id(std::uint32_t summary_id) const;
  bool contains_summary(std::uint32_t summary_id) const;
};

// Builds the pool from retrieved chunk ids (best first): assigns rank
// weights 1/(r+1) and deduplicates covering summaries in rank order.
CandidatePool make_candidate_pool(std::span<const std::uint32_t> ranked_chunk_ids,
                                  const MindscapeIndex& index);

// ---------------------------------------------------------------------------
// Signature
// ---------------------------------------------------------------------------

struct GainStep {
  std::uint32_t summary_id = 0;
  double gain = 0.0;
  double query_term = 0.0;
  double coverage_term = 0.0;
  double diversity_term = 0.0;
};

// Ordered selection of session summaries acting as the compact global state.
// After agent refinement the signature degenerates to free text: `selected`
// empties and only `rendered_text` carries meaning.
struct Signature {
  std::vector<std::uint32_t> selected;  // selection order
  std::string rendered_text;
  std::uint32_t size_bound = 0;
  std::vector<GainStep> gain_trace;     // filled by greedy_select

  bool empty() const { return rendered_text.empty(); }

  static Signature free_text(std::string text);
};

// Deterministic rendering: summary texts in selection order, separated by a
// blank line.
std::string render_signature_text(std::span<const std::uint32_t> selected,
                                  const CandidatePool& pool);

struct ObjectiveWeights {
  double lambda_q = 0.3;
  double lambda_c = 0.4;
  double lambda_d = 0.3;

  void validate() const;  // nonnegative, sum to 1 within 1e-9
};

// Pool maxima used to put the query and coverage terms on a common scale.
// Computed once per selection call; a maximum at or below the guard makes
// the corresponding normalized term 0 for every candidate.
struct PoolNormalizers {
  double query_max = 0.0;
  double coverage_max = 0.0;
};

constexpr double kNormalizerGuard = 1e-12;

PoolNormalizers compute_normalizers(const CandidatePool& pool,
                                    const EmbeddingVector& query);

// Per-summary raw coverage mass: sum over the summary's own chunks of
// w_c * m(s, c), with m(s, c) = max(0, e_s . e_c).
double summary_coverage_mass(const PoolSummary& summary, const CandidatePool& pool);

// ---------------------------------------------------------------------------
// Objective terms
// ---------------------------------------------------------------------------

// f_Q: sum of query-summary cosines over the selection. Modular; negative
// similarities are allowed.
double query_relevance(std::span<const std::uint32_t> selection,
                       const CandidatePool& pool, const EmbeddingVector& query);

// f_C: weighted max-coverage of the pool chunks by the selected summaries.
double coverage_value(std::span<const std::uint32_t> selection,
                      const CandidatePool& pool);

// f_D: 1 for an empty selection, else 1 minus the largest cosine between the
// candidate and any selected summary.
double diversity_gain(const PoolSummary& candidate,
                      std::span<const std::uint32_t> selection,
                      const CandidatePool& pool);

// Combined normalized marginal gain of adding `summary_id` to `selection`.
// Throws AlreadySelected.
double marginal_gain(std::uint32_t summary_id,
                     std::span<const std::uint32_t> selection,
                     const CandidatePool& pool, const EmbeddingVector& query,
                     const ObjectiveWeights& weights);

// Full set-function value of a selection under the same normalization as the
// greedy procedure. With include_diversity the order-dependent diversity sum
// is evaluated in the given selection order.
double objective_value(std::span<const std::uint32_t> selection,
                       const CandidatePool& pool, const EmbeddingVector& query,
                       const ObjectiveWeights& weights, bool include_diversity);

// ---------------------------------------------------------------------------
// Selectors
// ---------------------------------------------------------------------------

// Greedy maximization of the combined gain under a cardinality budget.
// Deterministic: candidates are scanned in ascending summary id and ties keep
// the lowest id. Chunks of a selected summary are marked covered and earn no
// further coverage credit.
Signature greedy_select(const CandidatePool& pool, const EmbeddingVector& query,
                        std::uint32_t budget, const ObjectiveWeights& weights);

// Relevance-only degenerate selector: walks the ranked chunks and keeps the
// first K distinct covering summaries.
Signature first_k_select(const CandidatePool& pool, std::uint32_t budget);

struct BruteForceResult {
  Signature signature;
  double value = 0.0;
};

// Exhaustive certification oracle over all subsets of size <= budget.
// monotone_only drops the diversity term (the monotone submodular
// sub-objective carries the greedy guarantee); otherwise diversity is
// evaluated in ascending-id insertion order. Pools above 15 summaries are
// rejected (PoolTooLarge).
BruteForceResult brute_force_select(const CandidatePool& pool,
                                    const EmbeddingVector& query,
                                    std::uint32_t budget,
                                    const ObjectiveWeights& weights,
                                    bool monotone_only);

}  // namespace mia
