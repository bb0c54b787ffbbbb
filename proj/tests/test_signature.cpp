#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mia/error.hpp"
#include "mia/signature.hpp"

#include "support/test_instances.hpp"

using namespace mia;

namespace {

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

// Straight-line re-evaluation of the coverage objective: for every chunk,
// scan every selected summary. Written independently of coverage_value.
double oracle_coverage(const std::vector<std::uint32_t>& selection,
                       const CandidatePool& pool) {
  double total = 0.0;
  for (const auto& chunk : pool.ranked_chunks) {
    double best = 0.0;
    for (std::uint32_t sid : selection) {
      if (chunk.summary_id != sid) continue;
      double m = dot(pool.summary_by_id(sid).embedding, chunk.embedding);
      if (m < 0.0) m = 0.0;
      if (m > best) best = m;
    }
    total += chunk.weight * best;
  }
  return total;
}

// From-scratch recomputation of the combined normalized gain.
double oracle_gain(std::uint32_t candidate, const std::vector<std::uint32_t>& selection,
                   const CandidatePool& pool, const EmbeddingVector& query,
                   const ObjectiveWeights& w) {
  double zq = -1e300, zc = 0.0;
  for (const auto& s : pool.pool_summaries) {
    zq = std::max(zq, dot(query, s.embedding));
    double mass = 0.0;
    for (const auto& c : pool.ranked_chunks) {
      if (c.summary_id != s.summary_id) continue;
      mass += c.weight * std::max(0.0, dot(s.embedding, c.embedding));
    }
    zc = std::max(zc, mass);
  }
  const PoolSummary& s = pool.summary_by_id(candidate);
  double dq = 0.0;
  if (zq > 1e-12) dq = dot(query, s.embedding) / zq;
  double dc = 0.0;
  if (zc > 1e-12) {
    double mass = 0.0;
    for (const auto& c : pool.ranked_chunks) {
      if (c.summary_id != candidate) continue;
      bool covered = false;
      for (std::uint32_t sel : selection) {
        if (pool.summary_by_id(sel).summary_id == c.summary_id) covered = true;
      }
      if (!covered) mass += c.weight * std::max(0.0, dot(s.embedding, c.embedding));
    }
    dc = mass / zc;
  }
  double dd = 1.0;
  if (!selection.empty()) {
    double max_sim = -1.0;
    for (std::uint32_t sel : selection) {
      max_sim = std::max(max_sim, dot(s.embedding, pool.summary_by_id(sel).embedding));
    }
    dd = 1.0 - max_sim;
  }
  return w.lambda_q * dq + w.lambda_c * dc + w.lambda_d * dd;
}

// Direct pool with hand-picked embeddings; summary ids 1..n.
CandidatePool fixed_pool(const std::vector<EmbeddingVector>& summary_vecs,
                         const std::vector<std::pair<std::uint32_t, EmbeddingVector>>&
                             chunk_summary_and_vec) {
  CandidatePool pool;
  for (std::size_t j = 0; j < summary_vecs.size(); ++j) {
    pool.pool_summaries.push_back(PoolSummary{static_cast<std::uint32_t>(j + 1),
                                              "s" + std::to_string(j + 1),
                                              summary_vecs[j]});
  }
  std::uint32_t rank = 1;
  for (const auto& [sid, vec] : chunk_summary_and_vec) {
    PoolChunk c;
    c.chunk_id = rank;
    c.rank = rank;
    c.weight = 1.0 / (rank + 1.0);
    c.summary_id = sid;
    c.embedding = vec;
    pool.ranked_chunks.push_back(std::move(c));
    ++rank;
  }
  return pool;
}

EmbeddingVector unit2(double x, double y) {
  return normalize(std::vector<double>{x, y});
}

}  // namespace

TEST_CASE("candidate pools carry rank weights and dedup summaries in rank order") {
  const MindscapeIndex index =
      test::build_test_index("book", test::synthetic_text(120, "w"), 3, 10);
  // ranks: chunks 5, 4, 1 -> summaries 2, 2, 1
  const std::vector<std::uint32_t> ids{5, 4, 1};
  const CandidatePool pool = make_candidate_pool(ids, index);
  REQUIRE(pool.ranked_chunks.size() == 3);
  CHECK(pool.ranked_chunks[0].weight == 0.5);
  CHECK(pool.ranked_chunks[1].weight == doctest::Approx(1.0 / 3.0));
  CHECK(pool.ranked_chunks[2].weight == 0.25);
  REQUIRE(pool.pool_summaries.size() == 2);
  CHECK(pool.pool_summaries[0].summary_id == 2);  // first appearance order
  CHECK(pool.pool_summaries[1].summary_id == 1);
}

TEST_CASE("query relevance is an additive sum of cosines") {
  const EmbeddingVector q = unit2(1.0, 0.0);
  // exact similarities 0.9 and 0.8
  const auto pool = fixed_pool(
      {unit2(0.9, std::sqrt(1.0 - 0.81)), unit2(0.8, std::sqrt(1.0 - 0.64))},
      {{1, unit2(1, 0)}, {2, unit2(0, 1)}});
  CHECK(query_relevance(std::vector<std::uint32_t>{}, pool, q) == 0.0);
  CHECK(query_relevance(std::vector<std::uint32_t>{1, 2}, pool, q) ==
        doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("query relevance marginals are selection independent") {
  std::mt19937 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const CandidatePool pool = test::random_pool(rng, 6, 12, 16);
    const EmbeddingVector q = test::random_unit_vector(rng, 16);
    // A strictly inside B, candidate s outside B
    const std::vector<std::uint32_t> a{2};
    const std::vector<std::uint32_t> b{2, 3, 5};
    const std::uint32_t s = 6;
    const double da = query_relevance(std::vector<std::uint32_t>{2, 6}, pool, q) -
                      query_relevance(a, pool, q);
    const double db = query_relevance(std::vector<std::uint32_t>{2, 3, 5, 6}, pool, q) -
                      query_relevance(b, pool, q);
    CHECK(std::abs(da - db) <= 1e-9);
    CHECK(da == doctest::Approx(cosine(q, pool.summary_by_id(s).embedding)));
  }
}

TEST_CASE("coverage of rank-weighted chunks matches the direct sum") {
  // one summary covering three chunks with perfect match scores
  const EmbeddingVector e = unit2(1.0, 0.0);
  const auto pool = fixed_pool({e}, {{1, e}, {1, e}, {1, e}});
  CHECK(coverage_value(std::vector<std::uint32_t>{}, pool) == 0.0);
  CHECK(coverage_value(std::vector<std::uint32_t>{1}, pool) ==
        doctest::Approx(0.5 + 1.0 / 3.0 + 0.25).epsilon(1e-12));  // = 13/12
}

TEST_CASE("coverage equals the double-loop oracle on random instances") {
  std::mt19937 rng(202);
  for (int trial = 0; trial < 50; ++trial) {
    const CandidatePool pool = test::random_pool(rng, 4, 8, 16);
    std::vector<std::uint32_t> selection;
    for (std::uint32_t sid = 1; sid <= 4; ++sid) {
      if (rng() % 2) selection.push_back(sid);
    }
    CHECK(coverage_value(selection, pool) ==
          doctest::Approx(oracle_coverage(selection, pool)).epsilon(1e-12));
  }
}

TEST_CASE("coverage is monotone and submodular") {
  std::mt19937 rng(303);
  int trials = 0;
  while (trials < 500) {
    const CandidatePool pool = test::random_pool(rng, 6, 14, 16);
    // random nested pair A subset B and s outside B
    std::vector<std::uint32_t> b;
    for (std::uint32_t sid = 1; sid <= 6; ++sid) {
      if (rng() % 2) b.push_back(sid);
    }
    if (b.size() >= 6 || b.empty()) continue;
    std::vector<std::uint32_t> a;
    for (std::uint32_t sid : b) {
      if (rng() % 2) a.push_back(sid);
    }
    std::vector<std::uint32_t> rest;
    for (std::uint32_t sid = 1; sid <= 6; ++sid) {
      if (std::find(b.begin(), b.end(), sid) == b.end()) rest.push_back(sid);
    }
    const std::uint32_t s = rest[rng() % rest.size()];

    auto with = [](std::vector<std::uint32_t> v, std::uint32_t extra) {
      v.push_back(extra);
      return v;
    };
    const double delta_a =
        coverage_value(with(a, s), pool) - coverage_value(a, pool);
    const double delta_b =
        coverage_value(with(b, s), pool) - coverage_value(b, pool);
    CHECK(delta_a >= delta_b - 1e-9);   // diminishing returns
    CHECK(delta_b >= -1e-9);            // monotone
    ++trials;
  }
}

TEST_CASE("diversity gain cases") {
  const EmbeddingVector e1 = unit2(1.0, 0.0);
  const EmbeddingVector e2 = unit2(0.0, 1.0);
  const auto pool = fixed_pool({e1, e1, e2}, {{1, e1}, {2, e1}, {3, e2}});
  CHECK(diversity_gain(pool.pool_summaries[0], std::vector<std::uint32_t>{}, pool) ==
        1.0);
  // identical to an already selected summary
  CHECK(diversity_gain(pool.pool_summaries[1], std::vector<std::uint32_t>{1}, pool) ==
        doctest::Approx(0.0));
  // orthogonal to everything selected
  CHECK(diversity_gain(pool.pool_summaries[2], std::vector<std::uint32_t>{1}, pool) ==
        doctest::Approx(1.0));
}

TEST_CASE("marginal gain normalizes by the pool maxima") {
  const EmbeddingVector q = unit2(1.0, 0.0);
  // pool-max query similarity 0.8, candidate similarity 0.4
  const auto pool = fixed_pool(
      {unit2(0.4, std::sqrt(1.0 - 0.16)), unit2(0.8, std::sqrt(1.0 - 0.64))},
      {{1, unit2(1, 0)}, {2, unit2(0, 1)}});
  const ObjectiveWeights query_only{1.0, 0.0, 0.0};
  CHECK(marginal_gain(1, std::vector<std::uint32_t>{}, pool, q, query_only) ==
        doctest::Approx(0.5).epsilon(1e-12));

  const ObjectiveWeights diversity_only{0.0, 0.0, 1.0};
  CHECK(marginal_gain(1, std::vector<std::uint32_t>{}, pool, q, diversity_only) ==
        doctest::Approx(1.0));
}

TEST_CASE("marginal gain equals the from-scratch oracle on random instances") {
  std::mt19937 rng(404);
  const ObjectiveWeights w{0.3, 0.4, 0.3};
  for (int trial = 0; trial < 50; ++trial) {
    const CandidatePool pool = test::random_pool(rng, 5, 12, 16);
    const EmbeddingVector q = test::random_unit_vector(rng, 16);
    const std::vector<std::uint32_t> selection{2, 4};
    for (std::uint32_t candidate : {1u, 3u, 5u}) {
      CHECK(marginal_gain(candidate, selection, pool, q, w) ==
            doctest::Approx(oracle_gain(candidate, selection, pool, q, w))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("marginal gain rejects already-selected summaries") {
  std::mt19937 rng(1);
  const CandidatePool pool = test::random_pool(rng, 3, 6, 16);
  const EmbeddingVector q = test::random_unit_vector(rng, 16);
  try {
    marginal_gain(2, std::vector<std::uint32_t>{2}, pool, q, ObjectiveWeights{});
    FAIL("expected AlreadySelected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AlreadySelected);
  }
}

TEST_CASE("greedy selects everything when the budget covers the pool") {
  std::mt19937 rng(505);
  const CandidatePool pool = test::random_pool(rng, 4, 8, 16);
  const EmbeddingVector q = test::random_unit_vector(rng, 16);
  const Signature sig = greedy_select(pool, q, 10, ObjectiveWeights{});
  CHECK(sig.selected.size() == 4);
  CHECK(!sig.rendered_text.empty());
}

TEST_CASE("greedy picks the heavier coverage summary first under pure coverage") {
  const EmbeddingVector e = unit2(1.0, 0.0);
  const EmbeddingVector f = unit2(0.0, 1.0);
  // summary 1: one chunk at rank 4 (weight .2, match 1) -> mass 0.2
  // summary 2: chunks at ranks 1..3 with match 1       -> mass ~1.08
  const auto pool =
      fixed_pool({e, f}, {{2, f}, {2, f}, {2, f}, {1, e}});
  const ObjectiveWeights coverage_only{0.0, 1.0, 0.0};
  const EmbeddingVector q = unit2(1.0, 0.0);
  const Signature sig = greedy_select(pool, q, 1, coverage_only);
  REQUIRE(sig.selected.size() == 1);
  CHECK(sig.selected[0] == 2);
}

TEST_CASE("greedy is deterministic") {
  std::mt19937 rng(606);
  const CandidatePool pool = test::random_pool(rng, 8, 20, 16);
  const EmbeddingVector q = test::random_unit_vector(rng, 16);
  const ObjectiveWeights w{0.3, 0.4, 0.3};
  const Signature a = greedy_select(pool, q, 4, w);
  const Signature b = greedy_select(pool, q, 4, w);
  CHECK(a.selected == b.selected);
  CHECK(a.rendered_text == b.rendered_text);
}

TEST_CASE("greedy breaks exact ties toward the lower summary id") {
  const EmbeddingVector e = unit2(1.0, 0.0);
  // identical summaries, identical chunks: every gain ties exactly
  const auto pool = fixed_pool({e, e, e}, {{1, e}, {2, e}, {3, e}});
  const ObjectiveWeights w{1.0, 0.0, 0.0};
  const Signature sig = greedy_select(pool, e, 2, w);
  REQUIRE(sig.selected.size() == 2);
  CHECK(sig.selected[0] == 1);
  CHECK(sig.selected[1] == 2);
}

TEST_CASE("first-k walks ranks and deduplicates") {
  const EmbeddingVector e = unit2(1.0, 0.0);
  // ranked chunks map to summaries A=1, A=1, B=2, C=3, B=2
  const auto pool = fixed_pool({e, e, e},
                               {{1, e}, {1, e}, {2, e}, {3, e}, {2, e}});
  const Signature two = first_k_select(pool, 2);
  CHECK(two.selected == std::vector<std::uint32_t>{1, 2});
  const Signature all = first_k_select(pool, 10);
  CHECK(all.selected == std::vector<std::uint32_t>{1, 2, 3});
}

TEST_CASE("first-k agrees with rank-aligned query-only greedy when summaries are distinct") {
  // one chunk per summary, query similarity decreasing with rank, so the
  // rank order and the relevance order coincide
  std::vector<EmbeddingVector> summaries;
  std::vector<std::pair<std::uint32_t, EmbeddingVector>> chunks;
  for (int j = 0; j < 5; ++j) {
    const double sim = 0.9 - 0.15 * j;
    summaries.push_back(unit2(sim, std::sqrt(1.0 - sim * sim)));
    chunks.push_back({static_cast<std::uint32_t>(j + 1), unit2(1, 0)});
  }
  const auto pool = fixed_pool(summaries, chunks);
  const EmbeddingVector q = unit2(1.0, 0.0);
  const Signature fk = first_k_select(pool, 3);
  const Signature greedy = greedy_select(pool, q, 3, ObjectiveWeights{1.0, 0.0, 0.0});
  // greedy selects by relevance order; first-k by rank order; they coincide
  std::vector<std::uint32_t> greedy_sorted = greedy.selected;
  CHECK(fk.selected == greedy_sorted);
}

TEST_CASE("selectors reject empty pools and bad budgets") {
  CandidatePool empty;
  const EmbeddingVector q = unit2(1.0, 0.0);
  CHECK_THROWS_AS(greedy_select(empty, q, 3, ObjectiveWeights{}), Error);
  CHECK_THROWS_AS(first_k_select(empty, 3), Error);
  CHECK_THROWS_AS(brute_force_select(empty, q, 3, ObjectiveWeights{}, true), Error);
}

TEST_CASE("brute force returns the single summary of a singleton pool") {
  std::mt19937 rng(707);
  const CandidatePool pool = test::random_pool(rng, 1, 3, 16, /*nonnegative=*/true);
  const EmbeddingVector q = test::random_unit_vector(rng, 16, true);
  const BruteForceResult r =
      brute_force_select(pool, q, 4, ObjectiveWeights{}, false);
  CHECK(r.signature.selected == std::vector<std::uint32_t>{1});
}

TEST_CASE("brute force at K=1 agrees with the best empty-set marginal") {
  std::mt19937 rng(808);
  for (int trial = 0; trial < 20; ++trial) {
    const CandidatePool pool = test::random_pool(rng, 6, 10, 16, true);
    const EmbeddingVector q = test::random_unit_vector(rng, 16, true);
    const ObjectiveWeights w{0.3, 0.4, 0.3};
    const BruteForceResult r = brute_force_select(pool, q, 1, w, false);
    double best = -1e300;
    std::uint32_t best_id = 0;
    for (std::uint32_t sid = 1; sid <= 6; ++sid) {
      const double g = marginal_gain(sid, std::vector<std::uint32_t>{}, pool, q, w);
      if (g > best) {
        best = g;
        best_id = sid;
      }
    }
    REQUIRE(r.signature.selected.size() == 1);
    CHECK(r.signature.selected[0] == best_id);
    CHECK(r.value == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("brute force rejects oversized pools") {
  std::mt19937 rng(909);
  const CandidatePool pool = test::random_pool(rng, 16, 20, 8);
  const EmbeddingVector q = test::random_unit_vector(rng, 8);
  try {
    brute_force_select(pool, q, 3, ObjectiveWeights{}, true);
    FAIL("expected PoolTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PoolTooLarge);
  }
}

TEST_CASE("greedy meets the (1-1/e) bound against exhaustive enumeration") {
  // Similarities are kept non-negative so the combined objective stays
  // monotone, the regime the greedy bound speaks about.
  std::mt19937 rng(1010);
  const ObjectiveWeights w{0.3, 0.7, 0.0};
  const double bound = 1.0 - 1.0 / std::exp(1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n_summaries = 2 + rng() % 7;   // <= 8
    const std::size_t n_chunks = n_summaries + rng() % (41 - n_summaries);
    const CandidatePool pool =
        test::random_pool(rng, n_summaries, n_chunks, 16, true);
    const EmbeddingVector q = test::random_unit_vector(rng, 16, true);

    const Signature greedy = greedy_select(pool, q, 3, w);
    const double greedy_value = objective_value(greedy.selected, pool, q, w, false);
    const BruteForceResult opt = brute_force_select(pool, q, 3, w, true);
    CHECK(greedy_value >= bound * opt.value - 1e-9);
  }
}

TEST_CASE("signature rendering joins summary texts with blank lines") {
  const EmbeddingVector e = unit2(1.0, 0.0);
  auto pool = fixed_pool({e, e}, {{1, e}, {2, e}});
  pool.pool_summaries[0].text = "first summary";
  pool.pool_summaries[1].text = "second summary";
  CHECK(render_signature_text(std::vector<std::uint32_t>{2, 1}, pool) ==
        "second summary\n\nfirst summary");
}

TEST_CASE("objective weights validate") {
  CHECK_THROWS_AS((ObjectiveWeights{0.5, 0.5, 0.5}).validate(), Error);
  CHECK_THROWS_AS((ObjectiveWeights{-0.1, 0.6, 0.5}).validate(), Error);
  CHECK_NOTHROW((ObjectiveWeights{0.3, 0.4, 0.3}).validate());
}
