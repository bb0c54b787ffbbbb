#include "mia/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mia/error.hpp"
#include "mia/hashing.hpp"
#include "mia/log.hpp"
#include "mia/retrieval.hpp"

namespace mia {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

namespace {

bool is_letter_answer(const std::string& s) {
  return s.size() == 1 && s[0] >= 'A' && s[0] <= 'D';
}

bool is_claim_answer(const std::string& s) { return s == "TRUE" || s == "FALSE"; }

void validate_example(const QAExample& ex, TaskKind kind) {
  switch (kind) {
    case TaskKind::Detective:
      if (!is_letter_answer(ex.gold_answer)) {
        raise(ErrorCode::ParseError, "example " + ex.example_id +
                                         ": detective gold answer must be A-D");
      }
      break;
    case TaskKind::Claim:
      if (!is_claim_answer(ex.gold_answer)) {
        raise(ErrorCode::ParseError, "example " + ex.example_id +
                                         ": claim gold answer must be TRUE/FALSE");
      }
      if (ex.pair_id.empty()) {
        raise(ErrorCode::ParseError,
              "example " + ex.example_id + ": claim examples need a pair_id");
      }
      break;
    case TaskKind::OpenQA:
      if (ex.gold_answer.empty()) {
        raise(ErrorCode::ParseError,
              "example " + ex.example_id + ": empty gold answer");
      }
      if (!ex.pair_id.empty()) {
        raise(ErrorCode::ParseError, "example " + ex.example_id +
                                         ": pair_id is only for claim datasets");
      }
      break;
  }
}

}  // namespace

std::vector<QAExample> load_examples(const std::string& jsonl_path, TaskKind kind) {
  std::ifstream in(jsonl_path);
  if (!in) raise(ErrorCode::IoError, "cannot open dataset " + jsonl_path);
  std::vector<QAExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      raise(ErrorCode::ParseError,
            "bad JSON on line " + std::to_string(line_no) + " of " + jsonl_path);
    }
    QAExample ex;
    ex.example_id = j.value("example_id", "ex" + std::to_string(line_no));
    ex.doc_id = j.value("doc_id", j.value("series_id", ""));
    ex.question = j.at("question").get<std::string>();
    if (j.contains("options")) {
      for (const auto& o : j["options"]) ex.options.push_back(o.get<std::string>());
    }
    ex.gold_answer = j.value("gold_answer", "");
    if (j.contains("gold_evidence")) {
      for (const auto& g : j["gold_evidence"]) {
        ex.gold_evidence.insert(g.get<std::uint32_t>());
      }
    }
    ex.pair_id = j.value("pair_id", "");
    ex.lang = j.value("lang", "");
    validate_example(ex, kind);
    examples.push_back(std::move(ex));
  }
  return examples;
}

// ---------------------------------------------------------------------------
// Series aggregation
// ---------------------------------------------------------------------------

std::uint32_t MergedDocument::remap(const std::string& book_id,
                                    std::uint32_t local_chunk_id) const {
  auto it = offsets.find(book_id);
  if (it == offsets.end()) {
    raise(ErrorCode::OutOfRange, "book '" + book_id + "' not in series");
  }
  return it->second + local_chunk_id;
}

MergedDocument aggregate_series(const std::vector<ChunkedBook>& books,
                                const std::string& series_id) {
  if (books.empty()) raise(ErrorCode::EmptySeries, "series has no books");
  MergedDocument merged;
  merged.series_id = series_id;
  std::uint32_t offset = 0;
  for (const auto& book : books) {
    merged.book_order.push_back(book.book_id);
    merged.offsets[book.book_id] = offset;
    merged.chunk_texts.insert(merged.chunk_texts.end(), book.chunk_texts.begin(),
                              book.chunk_texts.end());
    offset += static_cast<std::uint32_t>(book.chunk_texts.size());
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> normalize_tokens(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cleaned += static_cast<char>(std::tolower(u));
    } else {
      cleaned += ' ';
    }
  }
  std::istringstream in(cleaned);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    tokens.push_back(tok);
  }
  return tokens;
}

}  // namespace

double token_f1(const std::string& prediction, const std::string& gold) {
  const auto gold_tokens = normalize_tokens(gold);
  if (gold_tokens.empty()) {
    raise(ErrorCode::EmptyGold, "gold answer normalizes to nothing");
  }
  const auto pred_tokens = normalize_tokens(prediction);
  if (pred_tokens.empty()) return 0.0;

  std::map<std::string, int> gold_counts;
  for (const auto& t : gold_tokens) ++gold_counts[t];
  int overlap = 0;
  for (const auto& t : pred_tokens) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / pred_tokens.size();
  const double recall = static_cast<double>(overlap) / gold_tokens.size();
  return 2.0 * precision * recall / (precision + recall);
}

double pair_accuracy(const std::vector<std::pair<std::string, bool>>& pair_flags) {
  std::map<std::string, std::vector<bool>> groups;
  for (const auto& [pair_id, correct] : pair_flags) {
    groups[pair_id].push_back(correct);
  }
  if (groups.empty()) raise(ErrorCode::MalformedPair, "no pairs present");
  std::size_t both = 0;
  for (const auto& [pair_id, flags] : groups) {
    if (flags.size() != 2) {
      raise(ErrorCode::MalformedPair,
            "pair '" + pair_id + "' has " + std::to_string(flags.size()) +
                " members, expected 2");
    }
    if (flags[0] && flags[1]) ++both;
  }
  return static_cast<double>(both) / static_cast<double>(groups.size());
}

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

EvalMethod eval_method_from_string(const std::string& s) {
  if (s == "query-only") return EvalMethod::QueryOnly;
  if (s == "mia-emb") return EvalMethod::MiaEmb;
  if (s == "mia-rag") return EvalMethod::MiaRag;
  if (s == "agent") return EvalMethod::Agent;
  raise(ErrorCode::ConfigError, "unknown eval method '" + s + "'");
}

const char* eval_method_name(EvalMethod m) {
  switch (m) {
    case EvalMethod::QueryOnly: return "query-only";
    case EvalMethod::MiaEmb: return "mia-emb";
    case EvalMethod::MiaRag: return "mia-rag";
    case EvalMethod::Agent: return "agent";
  }
  return "?";
}

std::string EvalConfig::fingerprint() const {
  std::ostringstream s;
  s << eval_method_name(method) << '|' << task_kind_name(task_kind) << '|'
    << answer_variant_name(variant) << '|' << alpha << '|' << steps << '|'
    << rewrite << '|' << retrieve_k << '|' << init_candidates << '|'
    << signature_budget << '|'
    << (init_mode ? (*init_mode == InitMode::Coverage ? "coverage" : "first-k")
                  : "auto")
    << '|' << weights.lambda_q << ',' << weights.lambda_c << ','
    << weights.lambda_d << '|' << seed;
  return hex64(fnv1a64(s.str()));
}

namespace {

std::string render_options(const std::vector<std::string>& options) {
  std::string out;
  for (std::size_t i = 0; i < options.size() && i < 4; ++i) {
    if (i) out += '\n';
    out += static_cast<char>('A' + i);
    out += ". " + options[i];
  }
  return out;
}

struct PredictionOutcome {
  std::string prediction;
  std::vector<std::uint32_t> retrieved_ids;
  std::size_t llm_calls = 0;
};

PredictionOutcome evaluate_one(const QAExample& ex, const EvalConfig& config,
                               const MindscapeIndex& index,
                               AgentServices& services) {
  PredictionOutcome out;
  const std::string options_str = render_options(ex.options);

  if (config.method == EvalMethod::Agent) {
    AgentConfig agent_cfg;
    agent_cfg.n_stop = config.steps;
    agent_cfg.alpha = config.alpha;
    agent_cfg.init_candidates = config.init_candidates;
    agent_cfg.signature_budget = config.signature_budget;
    agent_cfg.init_mode = config.init_mode.value_or(InitMode::FirstK);
    agent_cfg.init_weights = config.weights;
    agent_cfg.rewrite_enabled = config.rewrite;
    agent_cfg.variant = config.variant;
    agent_cfg.task_kind = config.task_kind;
    agent_cfg.options_str = options_str;
    AgentRunResult result = run_agent(ex.question, index, services, agent_cfg);
    out.retrieved_ids = result.trace.final_chunk_ids;
    out.llm_calls = static_cast<std::size_t>(result.trace.update_calls) + 1;
    if (!result.parsed) {
      raise(ErrorCode::UnparseableAnswer,
            "generator reply not parseable: " + result.answer_text);
    }
    out.prediction = result.parsed->value;
    return out;
  }

  // Static pipelines: one retrieval pass, one generation call.
  RankedList retrieved;
  std::string signature_text;
  if (config.method == EvalMethod::QueryOnly) {
    retrieved = query_only_retrieve(ex.question, services.embedder, index,
                                    config.retrieve_k);
  } else {
    Signature sig = init_signature(
        ex.question, index, services.embedder,
        config.init_mode.value_or(InitMode::Coverage), config.init_candidates,
        config.signature_budget, config.weights);
    signature_text = sig.rendered_text;
    retrieved = mia_retrieve(ex.question, sig, services.embedder, index,
                             config.retrieve_k, config.alpha);
  }
  out.retrieved_ids = retrieved.chunk_ids();

  std::vector<std::string> chunk_texts;
  for (std::uint32_t id : out.retrieved_ids) {
    chunk_texts.push_back(index.chunk(id).text);
  }
  // MiA-RAG exposes the signature to the generator; MiA-Emb and query-only
  // pass retrieved chunks alone.
  const AnswerVariant variant = config.method == EvalMethod::MiaRag
                                    ? AnswerVariant::ChunksSig
                                    : AnswerVariant::Chunks;
  const std::string context =
      compose_answer_context(variant, chunk_texts, signature_text, {});

  Bindings bindings;
  if (config.task_kind == TaskKind::Detective) {
    bindings = {{"answer_context", context},
                {"question", ex.question},
                {"options_str", options_str}};
  } else if (config.task_kind == TaskKind::OpenQA) {
    bindings = {{"context", context}, {"question", ex.question}};
  } else {
    bindings = {{"context", context}, {"claim", ex.question}};
  }
  const std::string template_id = answer_template_id(config.task_kind);
  const RenderedPrompt prompt =
      render(services.templates.get(template_id), bindings);
  const std::string reply = complete(
      services.generator, ChatRequest{prompt.system, prompt.user, template_id});
  out.llm_calls = 1;
  out.prediction = parse_answer(reply, config.task_kind).value;
  return out;
}

bool prediction_correct(const std::string& prediction, const std::string& gold,
                        TaskKind kind) {
  if (kind == TaskKind::OpenQA) {
    const auto norm = [](const std::string& s) {
      std::string out;
      for (char c : s) {
        unsigned char u = static_cast<unsigned char>(c);
        out += static_cast<char>(std::tolower(u));
      }
      return out;
    };
    return norm(prediction) == norm(gold);
  }
  return prediction == gold;
}

}  // namespace

BenchAggregate aggregate_records(const std::vector<ExampleRecord>& records,
                                 TaskKind kind, const std::string& fingerprint,
                                 std::size_t llm_calls) {
  BenchAggregate agg;
  agg.examples = records.size();
  agg.config_fingerprint = fingerprint;
  agg.llm_calls = llm_calls;

  std::size_t correct = 0;
  double f1_sum = 0.0;
  double recall_sum = 0.0;
  std::size_t recall_n = 0;
  std::vector<std::pair<std::string, bool>> pair_flags;
  std::map<std::string, std::vector<const ExampleRecord*>> by_lang;

  for (const auto& r : records) {
    if (!r.error.empty()) ++agg.failures;
    if (r.correct) ++correct;
    f1_sum += r.f1;
    if (r.recall_at_10 >= 0.0) {
      recall_sum += r.recall_at_10;
      ++recall_n;
    }
    if (!r.pair_id.empty()) pair_flags.emplace_back(r.pair_id, r.correct);
    if (!r.lang.empty()) by_lang[r.lang].push_back(&r);
  }

  if (!records.empty()) {
    agg.accuracy = static_cast<double>(correct) / records.size();
    agg.mean_f1 = f1_sum / records.size();
  }
  if (recall_n) agg.mean_recall_at_10 = recall_sum / recall_n;
  if (kind == TaskKind::Claim && !pair_flags.empty()) {
    agg.pair_acc = pair_accuracy(pair_flags);
  }

  if (!by_lang.empty()) {
    double macro_sum = 0.0;
    for (const auto& [lang, rs] : by_lang) {
      LangStats st;
      st.n = rs.size();
      std::size_t c = 0;
      double f1 = 0.0, rec = 0.0;
      std::size_t rec_n = 0;
      for (const auto* r : rs) {
        if (r->correct) ++c;
        f1 += r->f1;
        if (r->recall_at_10 >= 0.0) {
          rec += r->recall_at_10;
          ++rec_n;
        }
      }
      st.accuracy = static_cast<double>(c) / rs.size();
      st.mean_f1 = f1 / rs.size();
      if (rec_n) st.mean_recall_at_10 = rec / rec_n;
      macro_sum += (kind == TaskKind::OpenQA) ? st.mean_f1 : st.accuracy;
      agg.per_lang[lang] = st;
    }
    agg.macro_metric = macro_sum / by_lang.size();
  }
  return agg;
}

BenchReport run_benchmark(const EvalConfig& config, const MindscapeIndex& index,
                          AgentServices services) {
  config.weights.validate();
  const auto examples = load_examples(config.dataset_path, config.task_kind);

  std::vector<ExampleRecord> records(examples.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> llm_calls{0};

  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < examples.size();
         i = next.fetch_add(1)) {
      const QAExample& ex = examples[i];
      ExampleRecord& rec = records[i];
      rec.example_id = ex.example_id;
      rec.lang = ex.lang;
      rec.pair_id = ex.pair_id;
      rec.gold = ex.gold_answer;
      try {
        PredictionOutcome outcome = evaluate_one(ex, config, index, services);
        llm_calls.fetch_add(outcome.llm_calls);
        rec.prediction = outcome.prediction;
        rec.retrieved_ids = std::move(outcome.retrieved_ids);
        rec.correct =
            prediction_correct(rec.prediction, ex.gold_answer, config.task_kind);
        if (config.task_kind == TaskKind::OpenQA) {
          rec.f1 = token_f1(rec.prediction, ex.gold_answer);
        }
        if (!ex.gold_evidence.empty()) {
          RankedList as_list;
          as_list.requested_k = rec.retrieved_ids.size();
          for (std::uint32_t id : rec.retrieved_ids) {
            as_list.entries.push_back(RankedEntry{id, 0.0});
          }
          rec.recall_at_10 = recall_at_k(as_list, ex.gold_evidence, 10);
        }
      } catch (const std::exception& e) {
        rec.error = e.what();
        log_warn("example " + ex.example_id + " failed: " + rec.error);
      }
    }
  };

  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min(config.workers, examples.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BenchReport report;
  report.records = std::move(records);
  report.aggregate = aggregate_records(report.records, config.task_kind,
                                       config.fingerprint(), llm_calls.load());
  return report;
}

// ---------------------------------------------------------------------------
// Report IO
// ---------------------------------------------------------------------------

namespace {

json record_to_json(const ExampleRecord& r) {
  json j{{"example_id", r.example_id}, {"prediction", r.prediction},
         {"gold", r.gold},             {"correct", r.correct},
         {"f1", r.f1},                 {"recall_at_10", r.recall_at_10},
         {"retrieved_ids", r.retrieved_ids}};
  if (!r.lang.empty()) j["lang"] = r.lang;
  if (!r.pair_id.empty()) j["pair_id"] = r.pair_id;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

ExampleRecord record_from_json(const json& j) {
  ExampleRecord r;
  r.example_id = j.at("example_id").get<std::string>();
  r.prediction = j.value("prediction", "");
  r.gold = j.value("gold", "");
  r.correct = j.value("correct", false);
  r.f1 = j.value("f1", 0.0);
  r.recall_at_10 = j.value("recall_at_10", -1.0);
  if (j.contains("retrieved_ids")) {
    for (const auto& id : j["retrieved_ids"]) {
      r.retrieved_ids.push_back(id.get<std::uint32_t>());
    }
  }
  r.lang = j.value("lang", "");
  r.pair_id = j.value("pair_id", "");
  r.error = j.value("error", "");
  return r;
}

json aggregate_to_json(const BenchAggregate& a) {
  json per_lang = json::object();
  for (const auto& [lang, st] : a.per_lang) {
    per_lang[lang] = {{"n", st.n},
                      {"accuracy", st.accuracy},
                      {"mean_f1", st.mean_f1},
                      {"mean_recall_at_10", st.mean_recall_at_10}};
  }
  return json{{"aggregate",
               {{"examples", a.examples},
                {"failures", a.failures},
                {"accuracy", a.accuracy},
                {"mean_f1", a.mean_f1},
                {"pair_accuracy", a.pair_acc},
                {"mean_recall_at_10", a.mean_recall_at_10},
                {"per_lang", std::move(per_lang)},
                {"macro_metric", a.macro_metric},
                {"llm_calls", a.llm_calls},
                {"config_fingerprint", a.config_fingerprint}}}};
}

bool close_enough(double a, double b) {
  return std::abs(a - b) <= 1e-9;
}

}  // namespace

void write_report(const BenchReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write report " + path);
  for (const auto& r : report.records) {
    out << record_to_json(r).dump() << '\n';
  }
  out << aggregate_to_json(report.aggregate).dump() << '\n';
}

BenchReport read_report(const std::string& path, TaskKind kind) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open report " + path);
  BenchReport report;
  bool saw_aggregate = false;
  BenchAggregate stored;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) raise(ErrorCode::ParseError, "bad report line");
    if (j.contains("aggregate")) {
      const json& a = j["aggregate"];
      stored.examples = a.at("examples").get<std::size_t>();
      stored.failures = a.at("failures").get<std::size_t>();
      stored.accuracy = a.at("accuracy").get<double>();
      stored.mean_f1 = a.at("mean_f1").get<double>();
      stored.pair_acc = a.at("pair_accuracy").get<double>();
      stored.mean_recall_at_10 = a.at("mean_recall_at_10").get<double>();
      stored.macro_metric = a.at("macro_metric").get<double>();
      stored.llm_calls = a.at("llm_calls").get<std::size_t>();
      stored.config_fingerprint = a.at("config_fingerprint").get<std::string>();
      saw_aggregate = true;
    } else {
      report.records.push_back(record_from_json(j));
    }
  }
  if (!saw_aggregate) {
    raise(ErrorCode::ParseError, "report has no aggregate record");
  }
  BenchAggregate derived = aggregate_records(
      report.records, kind, stored.config_fingerprint, stored.llm_calls);
  if (derived.examples != stored.examples || derived.failures != stored.failures ||
      !close_enough(derived.accuracy, stored.accuracy) ||
      !close_enough(derived.mean_f1, stored.mean_f1) ||
      !close_enough(derived.pair_acc, stored.pair_acc) ||
      !close_enough(derived.mean_recall_at_10, stored.mean_recall_at_10)) {
    raise(ErrorCode::ParseError,
          "stored aggregate does not match the per-example records");
  }
  report.aggregate = derived;
  return report;
}

std::string render_report_table(const BenchReport& report, TaskKind kind) {
  const BenchAggregate& a = report.aggregate;
  std::ostringstream out;
  char buf[160];

  auto metric_cell = [&](double v) {
    if (v < 0) return std::string("   -  ");
    std::snprintf(buf, sizeof(buf), "%6.3f", v);
    return std::string(buf);
  };

  out << "group      n    R@10   ";
  out << (kind == TaskKind::OpenQA ? "F1    " : "Acc   ");
  if (kind == TaskKind::Claim) out << " PairAcc";
  out << "\n";

  auto row = [&](const std::string& name, std::size_t n, double recall,
                 double metric, double pair) {
    std::snprintf(buf, sizeof(buf), "%-9s %4zu  ", name.c_str(), n);
    out << buf << metric_cell(recall) << "  " << metric_cell(metric);
    if (kind == TaskKind::Claim) out << "  " << metric_cell(pair);
    out << "\n";
  };

  for (const auto& [lang, st] : a.per_lang) {
    row(lang, st.n, st.mean_recall_at_10,
        kind == TaskKind::OpenQA ? st.mean_f1 : st.accuracy, -1.0);
  }
  row("all", a.examples, a.mean_recall_at_10,
      kind == TaskKind::OpenQA ? a.mean_f1 : a.accuracy, a.pair_acc);
  if (a.macro_metric >= 0) {
    std::snprintf(buf, sizeof(buf), "macro metric over languages: %.3f\n",
                  a.macro_metric);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "examples=%zu failures=%zu llm_calls=%zu config=%s\n",
                a.examples, a.failures, a.llm_calls, a.config_fingerprint.c_str());
  out << buf;
  return out.str();
}

}  // namespace mia
