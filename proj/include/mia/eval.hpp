#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mia/agent.hpp"
#include "mia/index.hpp"
#include "mia/prompts.hpp"

namespace mia {

// ---------------------------------------------------------------------------
// Dataset model
// ---------------------------------------------------------------------------

struct QAExample {
  std::string example_id;
  std::string doc_id;                      // document or series the question targets
  std::string question;
  std::vector<std::string> options;        // A-D texts for multiple choice
  std::string gold_answer;                 // letter, phrase, or TRUE/FALSE
  std::set<std::uint32_t> gold_evidence;   // optional chunk ids in index coordinates
  std::string pair_id;                     // claim-verification pairs only
  std::string lang;                        // optional language tag
};

// JSON-lines loader; validates the gold-answer form against the task kind
// and that pair ids appear exactly on claim datasets.
std::vector<QAExample> load_examples(const std::string& jsonl_path, TaskKind kind);

// ---------------------------------------------------------------------------
// Series aggregation
// ---------------------------------------------------------------------------

struct ChunkedBook {
  std::string book_id;
  std::vector<std::string> chunk_texts;
};

struct MergedDocument {
  std::string series_id;
  std::vector<std::string> chunk_texts;        // books concatenated in order
  std::vector<std::string> book_order;
  std::map<std::string, std::uint32_t> offsets;  // book -> chunks before it

  // Book-local 1-based chunk id -> merged 1-based chunk id.
  std::uint32_t remap(const std::string& book_id, std::uint32_t local_chunk_id) const;
};

// Merges the books of a series, in the given order, into one long document;
// the recorded offsets keep gold evidence ids translatable.
MergedDocument aggregate_series(const std::vector<ChunkedBook>& books,
                                const std::string& series_id);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Token-overlap F1 of normalized bags of tokens (lowercase, punctuation
// stripped, articles dropped). Throws EmptyGold when gold normalizes away.
double token_f1(const std::string& prediction, const std::string& gold);

// Fraction of claim pairs with both members correct; every pair must have
// exactly two records.
double pair_accuracy(const std::vector<std::pair<std::string, bool>>& pair_flags);

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

enum class EvalMethod { QueryOnly, MiaEmb, MiaRag, Agent };

EvalMethod eval_method_from_string(const std::string& s);
const char* eval_method_name(EvalMethod m);

struct EvalConfig {
  std::string dataset_path;
  std::string index_path;
  EvalMethod method = EvalMethod::MiaRag;
  TaskKind task_kind = TaskKind::OpenQA;
  AnswerVariant variant = AnswerVariant::Chunks;
  double alpha = kDefaultAlpha;
  int steps = 3;
  bool rewrite = true;
  std::uint32_t retrieve_k = 10;
  std::uint32_t init_candidates = kStepZeroCandidates;
  std::uint32_t signature_budget = 5;
  std::optional<InitMode> init_mode;  // default: coverage (static), first-k (agent)
  ObjectiveWeights weights;
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  std::string fingerprint() const;  // hash of the semantic fields above
};

struct ExampleRecord {
  std::string example_id;
  std::string lang;
  std::string pair_id;
  std::string prediction;
  std::string gold;
  bool correct = false;
  double f1 = 0.0;                     // open-ended QA
  double recall_at_10 = -1.0;          // -1 when no gold evidence
  std::vector<std::uint32_t> retrieved_ids;
  std::string error;                   // per-example failure, run continues
};

struct LangStats {
  std::size_t n = 0;
  double accuracy = 0.0;
  double mean_f1 = 0.0;
  double mean_recall_at_10 = -1.0;
};

struct BenchAggregate {
  std::size_t examples = 0;
  std::size_t failures = 0;
  double accuracy = 0.0;
  double mean_f1 = 0.0;
  double pair_acc = -1.0;              // claim datasets only
  double mean_recall_at_10 = -1.0;     // over examples with gold evidence
  std::map<std::string, LangStats> per_lang;
  // Task metric averaged over language groups, when examples are tagged.
  double macro_metric = -1.0;
  std::size_t llm_calls = 0;
  std::string config_fingerprint;
};

struct BenchReport {
  std::vector<ExampleRecord> records;
  BenchAggregate aggregate;
};

// Recomputes the aggregate from the per-example records.
BenchAggregate aggregate_records(const std::vector<ExampleRecord>& records,
                                 TaskKind kind, const std::string& fingerprint,
                                 std::size_t llm_calls);

// Executes the selected pipeline for every example. Per-example failures are
// captured in the record; the run never aborts on one bad example. Records
// land in input order regardless of worker count.
BenchReport run_benchmark(const EvalConfig& config, const MindscapeIndex& index,
                          AgentServices services);

// JSONL persistence: one record per line, aggregate record last. Loading
// re-derives the aggregate and rejects a report whose stored aggregate does
// not match its records.
void write_report(const BenchReport& report, const std::string& path);
BenchReport read_report(const std::string& path, TaskKind kind);

// Table-shaped summary for terminals.
std::string render_report_table(const BenchReport& report, TaskKind kind);

}  // namespace mia
