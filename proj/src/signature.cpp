#include "mia/signature.hpp"

#include <algorithm>
#include <cmath>

#include "mia/error.hpp"

namespace mia {

const PoolSummary& CandidatePool::summary_by_id(std::uint32_t summary_id) const {
  for (const auto& s : pool_summaries) {
    if (s.summary_id == summary_id) return s;
  }
  raise(ErrorCode::OutOfRange,
        "summary " + std::to_string(summary_id) + " not in candidate pool");
}

bool CandidatePool::contains_summary(std::uint32_t summary_id) const {
  for (const auto& s : pool_summaries) {
    if (s.summary_id == summary_id) return true;
  }
  return false;
}

CandidatePool make_candidate_pool(std::span<const std::uint32_t> ranked_chunk_ids,
                                  const MindscapeIndex& index) {
  if (ranked_chunk_ids.empty()) {
    raise(ErrorCode::EmptyPool, "no candidate chunks");
  }
  CandidatePool pool;
  pool.ranked_chunks.reserve(ranked_chunk_ids.size());
  std::uint32_t rank = 1;
  for (std::uint32_t chunk_id : ranked_chunk_ids) {
    const Chunk& chunk = index.chunk(chunk_id);
    PoolChunk pc;
    pc.chunk_id = chunk_id;
    pc.rank = rank;
    pc.weight = 1.0 / (static_cast<double>(rank) + 1.0);
    pc.summary_id = index.summary_of(chunk_id);
    pc.embedding = chunk.embedding;
    pool.ranked_chunks.push_back(std::move(pc));
    if (!pool.contains_summary(pool.ranked_chunks.back().summary_id)) {
      const SessionSummary& s = index.summary(pool.ranked_chunks.back().summary_id);
      pool.pool_summaries.push_back(PoolSummary{s.summary_id, s.text, s.embedding});
    }
    ++rank;
  }
  return pool;
}

Signature Signature::free_text(std::string text) {
  Signature sig;
  sig.rendered_text = std::move(text);
  return sig;
}

std::string render_signature_text(std::span<const std::uint32_t> selected,
                                  const CandidatePool& pool) {
  std::string out;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (i) out += "\n\n";
    out += pool.summary_by_id(selected[i]).text;
  }
  return out;
}

void ObjectiveWeights::validate() const {
  if (lambda_q < 0 || lambda_c < 0 || lambda_d < 0) {
    raise(ErrorCode::InvalidArgument, "objective weights must be nonnegative");
  }
  if (std::abs(lambda_q + lambda_c + lambda_d - 1.0) > 1e-9) {
    raise(ErrorCode::InvalidArgument, "objective weights must sum to 1");
  }
}

double summary_coverage_mass(const PoolSummary& summary, const CandidatePool& pool) {
  double mass = 0.0;
  for (const auto& c : pool.ranked_chunks) {
    if (c.summary_id != summary.summary_id) continue;
    mass += c.weight * std::max(0.0, cosine(summary.embedding, c.embedding));
  }
  return mass;
}

PoolNormalizers compute_normalizers(const CandidatePool& pool,
                                    const EmbeddingVector& query) {
  PoolNormalizers norms;
  bool first = true;
  for (const auto& s : pool.pool_summaries) {
    const double qs = cosine(query, s.embedding);
    norms.query_max = first ? qs : std::max(norms.query_max, qs);
    norms.coverage_max = std::max(norms.coverage_max, summary_coverage_mass(s, pool));
    first = false;
  }
  return norms;
}

double query_relevance(std::span<const std::uint32_t> selection,
                       const CandidatePool& pool, const EmbeddingVector& query) {
  double sum = 0.0;
  for (std::uint32_t id : selection) {
    sum += cosine(query, pool.summary_by_id(id).embedding);
  }
  return sum;
}

double coverage_value(std::span<const std::uint32_t> selection,
                      const CandidatePool& pool) {
  double value = 0.0;
  for (const auto& c : pool.ranked_chunks) {
    double best = 0.0;  // zero when no selected summary covers the chunk
    for (std::uint32_t id : selection) {
      if (c.summary_id != id) continue;
      const double m =
          std::max(0.0, cosine(pool.summary_by_id(id).embedding, c.embedding));
      best = std::max(best, m);
    }
    value += c.weight * best;
  }
  return value;
}

double diversity_gain(const PoolSummary& candidate,
                      std::span<const std::uint32_t> selection,
                      const CandidatePool& pool) {
  if (selection.empty()) return 1.0;
  double max_sim = -1.0;
  for (std::uint32_t id : selection) {
    max_sim = std::max(max_sim,
                       cosine(candidate.embedding, pool.summary_by_id(id).embedding));
  }
  return 1.0 - max_sim;
}

namespace {

struct GainContext {
  const CandidatePool& pool;
  const EmbeddingVector& query;
  ObjectiveWeights weights;
  PoolNormalizers norms;
  // covered flags indexed like pool.ranked_chunks
  std::vector<char> covered;

  explicit GainContext(const CandidatePool& p, const EmbeddingVector& q,
                       const ObjectiveWeights& w)
      : pool(p), query(q), weights(w), norms(compute_normalizers(p, q)),
        covered(p.ranked_chunks.size(), 0) {}

  void mark_covered(std::uint32_t summary_id) {
    for (std::size_t i = 0; i < pool.ranked_chunks.size(); ++i) {
      if (pool.ranked_chunks[i].summary_id == summary_id) covered[i] = 1;
    }
  }

  GainStep evaluate(const PoolSummary& s,
                    std::span<const std::uint32_t> selection) const {
    GainStep step;
    step.summary_id = s.summary_id;
    if (norms.query_max > kNormalizerGuard) {
      step.query_term = cosine(query, s.embedding) / norms.query_max;
    }
    if (norms.coverage_max > kNormalizerGuard) {
      double mass = 0.0;
      for (std::size_t i = 0; i < pool.ranked_chunks.size(); ++i) {
        const auto& c = pool.ranked_chunks[i];
        if (c.summary_id != s.summary_id || covered[i]) continue;
        mass += c.weight * std::max(0.0, cosine(s.embedding, c.embedding));
      }
      step.coverage_term = mass / norms.coverage_max;
    }
    step.diversity_term = diversity_gain(s, selection, pool);
    step.gain = weights.lambda_q * step.query_term +
                weights.lambda_c * step.coverage_term +
                weights.lambda_d * step.diversity_term;
    return step;
  }
};

std::vector<const PoolSummary*> summaries_by_id(const CandidatePool& pool) {
  std::vector<const PoolSummary*> out;
  out.reserve(pool.pool_summaries.size());
  for (const auto& s : pool.pool_summaries) out.push_back(&s);
  std::sort(out.begin(), out.end(), [](const PoolSummary* a, const PoolSummary* b) {
    return a->summary_id < b->summary_id;
  });
  return out;
}

}  // namespace

double marginal_gain(std::uint32_t summary_id,
                     std::span<const std::uint32_t> selection,
                     const CandidatePool& pool, const EmbeddingVector& query,
                     const ObjectiveWeights& weights) {
  weights.validate();
  if (std::find(selection.begin(), selection.end(), summary_id) != selection.end()) {
    raise(ErrorCode::AlreadySelected,
          "summary " + std::to_string(summary_id) + " already selected");
  }
  GainContext ctx(pool, query, weights);
  for (std::uint32_t id : selection) ctx.mark_covered(id);
  return ctx.evaluate(pool.summary_by_id(summary_id), selection).gain;
}

double objective_value(std::span<const std::uint32_t> selection,
                       const CandidatePool& pool, const EmbeddingVector& query,
                       const ObjectiveWeights& weights, bool include_diversity) {
  const PoolNormalizers norms = compute_normalizers(pool, query);
  double value = 0.0;
  if (norms.query_max > kNormalizerGuard) {
    value += weights.lambda_q * query_relevance(selection, pool, query) /
             norms.query_max;
  }
  if (norms.coverage_max > kNormalizerGuard) {
    value += weights.lambda_c * coverage_value(selection, pool) /
             norms.coverage_max;
  }
  if (include_diversity) {
    for (std::size_t i = 0; i < selection.size(); ++i) {
      value += weights.lambda_d *
               diversity_gain(pool.summary_by_id(selection[i]),
                              selection.subspan(0, i), pool);
    }
  }
  return value;
}

Signature greedy_select(const CandidatePool& pool, const EmbeddingVector& query,
                        std::uint32_t budget, const ObjectiveWeights& weights) {
  weights.validate();
  if (budget < 1) raise(ErrorCode::InvalidArgument, "budget must be >= 1");
  if (pool.pool_summaries.empty()) raise(ErrorCode::EmptyPool, "empty candidate pool");

  GainContext ctx(pool, query, weights);
  const auto candidates = summaries_by_id(pool);

  Signature sig;
  sig.size_bound = budget;
  std::vector<char> taken(candidates.size(), 0);
  for (std::uint32_t k = 0; k < budget; ++k) {
    int best_idx = -1;
    GainStep best_step;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (taken[i]) continue;
      GainStep step = ctx.evaluate(*candidates[i], sig.selected);
      // ascending-id scan with strict improvement: ties keep the lowest id
      if (best_idx < 0 || step.gain > best_step.gain) {
        best_idx = static_cast<int>(i);
        best_step = step;
      }
    }
    if (best_idx < 0) break;  // pool exhausted
    taken[best_idx] = 1;
    sig.selected.push_back(best_step.summary_id);
    sig.gain_trace.push_back(best_step);
    ctx.mark_covered(best_step.summary_id);
  }
  sig.rendered_text = render_signature_text(sig.selected, pool);
  return sig;
}

Signature first_k_select(const CandidatePool& pool, std::uint32_t budget) {
  if (budget < 1) raise(ErrorCode::InvalidArgument, "budget must be >= 1");
  if (pool.pool_summaries.empty()) raise(ErrorCode::EmptyPool, "empty candidate pool");

  Signature sig;
  sig.size_bound = budget;
  for (const auto& c : pool.ranked_chunks) {
    if (sig.selected.size() >= budget) break;
    if (std::find(sig.selected.begin(), sig.selected.end(), c.summary_id) ==
        sig.selected.end()) {
      sig.selected.push_back(c.summary_id);
    }
  }
  sig.rendered_text = render_signature_text(sig.selected, pool);
  return sig;
}

BruteForceResult brute_force_select(const CandidatePool& pool,
                                    const EmbeddingVector& query,
                                    std::uint32_t budget,
                                    const ObjectiveWeights& weights,
                                    bool monotone_only) {
  weights.validate();
  if (budget < 1) raise(ErrorCode::InvalidArgument, "budget must be >= 1");
  if (pool.pool_summaries.empty()) raise(ErrorCode::EmptyPool, "empty candidate pool");
  const std::size_t n = pool.pool_summaries.size();
  if (n > 15) {
    raise(ErrorCode::PoolTooLarge,
          "brute force limited to 15 summaries, got " + std::to_string(n));
  }

  ObjectiveWeights eval_weights = weights;
  if (monotone_only) eval_weights.lambda_d = 0.0;

  const auto candidates = summaries_by_id(pool);
  std::vector<std::uint32_t> best_subset;  // empty set scores 0
  double best_value = 0.0;

  for (std::uint64_t mask = 1; mask < (1ULL << n); ++mask) {
    if (static_cast<std::uint32_t>(__builtin_popcountll(mask)) > budget) continue;
    std::vector<std::uint32_t> subset;  // ascending-id insertion order
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1ULL << i)) subset.push_back(candidates[i]->summary_id);
    }
    const double value =
        objective_value(subset, pool, query, eval_weights, !monotone_only);
    if (value > best_value) {
      best_value = value;
      best_subset = std::move(subset);
    }
  }

  BruteForceResult result;
  result.value = best_value;
  result.signature.size_bound = budget;
  result.signature.selected = std::move(best_subset);
  result.signature.rendered_text =
      render_signature_text(result.signature.selected, pool);
  return result;
}

}  // namespace mia
