#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mia/config.hpp"
#include "mia/error.hpp"
#include "mia/eval.hpp"
#include "mia/retrieval.hpp"

#include "support/test_instances.hpp"

using namespace mia;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("mia_eval_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_dataset(const fs::path& dir, const std::string& name,
                          const std::vector<nlohmann::json>& rows) {
  const fs::path path = dir / name;
  std::ofstream out(path);
  for (const auto& row : rows) out << row.dump() << "\n";
  return path.string();
}

struct EvalFixture {
  fs::path dir = temp_dir("run");
  MindscapeIndex index =
      test::build_test_index("book", test::synthetic_text(300, "w"), 4, 10);
  OfflineHashEmbedder embedder{64};
  OfflineResponder updater{16};
  OfflineResponder generator{16};
  TemplateSet templates = TemplateSet::load(MIA_TEMPLATE_SOURCE_DIR);

  AgentServices services() {
    return AgentServices{embedder, updater, generator, templates};
  }

  std::string open_qa_dataset(std::size_t n) {
    std::vector<nlohmann::json> rows;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({{"example_id", "e" + std::to_string(i)},
                      {"doc_id", "book"},
                      {"question", "where is w" + std::to_string(i)},
                      {"gold_answer", "w" + std::to_string(i)},
                      {"gold_evidence", {1 + i % index.chunks.size()}}});
    }
    return write_dataset(dir, "open.jsonl", rows);
  }
};

}  // namespace

TEST_CASE("aggregate_series merges books and remaps gold chunk ids") {
  SUBCASE("single book is the identity") {
    const MergedDocument merged =
        aggregate_series({{"a", {"c1", "c2", "c3"}}}, "solo");
    CHECK(merged.chunk_texts.size() == 3);
    CHECK(merged.offsets.at("a") == 0);
    CHECK(merged.remap("a", 2) == 2);
  }
  SUBCASE("offset arithmetic") {
    std::vector<ChunkedBook> books(2);
    books[0].book_id = "book1";
    books[0].chunk_texts.assign(100, "x");
    books[1].book_id = "book2";
    books[1].chunk_texts.assign(80, "y");
    const MergedDocument merged = aggregate_series(books, "series");
    CHECK(merged.chunk_texts.size() == 180);
    CHECK(merged.remap("book2", 5) == 105);
    CHECK(merged.remap("book1", 5) == 5);
  }
  SUBCASE("remapping is a bijection on chunk ids") {
    std::mt19937 rng(5);
    std::vector<ChunkedBook> books;
    std::size_t total = 0;
    for (int b = 0; b < 4; ++b) {
      ChunkedBook book;
      book.book_id = "b" + std::to_string(b);
      book.chunk_texts.assign(1 + rng() % 50, "t");
      total += book.chunk_texts.size();
      books.push_back(std::move(book));
    }
    const MergedDocument merged = aggregate_series(books, "s");
    std::set<std::uint32_t> seen;
    for (const auto& book : books) {
      for (std::uint32_t l = 1; l <= book.chunk_texts.size(); ++l) {
        seen.insert(merged.remap(book.book_id, l));
      }
    }
    CHECK(seen.size() == total);
    CHECK(*seen.begin() == 1);
    CHECK(*seen.rbegin() == total);
  }
  SUBCASE("empty series") {
    try {
      aggregate_series({}, "none");
      FAIL("expected EmptySeries");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptySeries);
    }
  }
}

TEST_CASE("token_f1 follows the normalized bag-of-tokens definition") {
  CHECK(token_f1("The Lighthouse", "the lighthouse") == doctest::Approx(1.0));
  // precision 2/3, recall 1 -> harmonic mean 0.8
  CHECK(token_f1("big red house", "red house") == doctest::Approx(0.8));
  // articles are dropped by normalization, so this is a perfect match
  CHECK(token_f1("the red house", "red house") == doctest::Approx(1.0));
  CHECK(token_f1("completely different", "red house") == doctest::Approx(0.0));
  CHECK(token_f1("Vault, guarded!", "vault guarded") == doctest::Approx(1.0));
  try {
    token_f1("anything", "the a an");
    FAIL("expected EmptyGold");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyGold);
  }
}

TEST_CASE("pair accuracy counts pairs with both members correct") {
  // pairs contribute 1, 0, 0 -> 1/3
  const double acc = pair_accuracy({{"p1", true},
                                    {"p1", true},
                                    {"p2", true},
                                    {"p2", false},
                                    {"p3", false},
                                    {"p3", false}});
  CHECK(acc == doctest::Approx(1.0 / 3.0));

  try {
    pair_accuracy({{"p1", true}});
    FAIL("expected MalformedPair");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedPair);
  }
}

TEST_CASE("pair accuracy never exceeds accuracy on claim records") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ExampleRecord> records;
    const std::size_t pairs = 2 + rng() % 6;
    for (std::size_t p = 0; p < pairs; ++p) {
      for (int member = 0; member < 2; ++member) {
        ExampleRecord r;
        r.example_id = "e" + std::to_string(p * 2 + member);
        r.pair_id = "p" + std::to_string(p);
        r.correct = rng() % 2 == 0;
        r.gold = "TRUE";
        records.push_back(std::move(r));
      }
    }
    const BenchAggregate agg = aggregate_records(records, TaskKind::Claim, "f", 0);
    CHECK(agg.pair_acc <= agg.accuracy + 1e-12);
  }
}

TEST_CASE("load_examples validates gold answers against the task kind") {
  const fs::path dir = temp_dir("load");
  SUBCASE("detective letters") {
    const std::string path = write_dataset(
        dir, "d.jsonl",
        {{{"example_id", "a"}, {"question", "q"}, {"gold_answer", "B"}}});
    CHECK(load_examples(path, TaskKind::Detective).size() == 1);
    const std::string bad = write_dataset(
        dir, "bad.jsonl",
        {{{"example_id", "a"}, {"question", "q"}, {"gold_answer", "maybe"}}});
    CHECK_THROWS_AS(load_examples(bad, TaskKind::Detective), Error);
  }
  SUBCASE("claim pairs require pair ids") {
    const std::string path = write_dataset(
        dir, "c.jsonl",
        {{{"example_id", "a"}, {"question", "q"}, {"gold_answer", "TRUE"}}});
    CHECK_THROWS_AS(load_examples(path, TaskKind::Claim), Error);
  }
  SUBCASE("open qa rejects stray pair ids") {
    const std::string path = write_dataset(
        dir, "o.jsonl",
        {{{"example_id", "a"}, {"question", "q"}, {"gold_answer", "x"},
          {"pair_id", "p"}}});
    CHECK_THROWS_AS(load_examples(path, TaskKind::OpenQA), Error);
  }
}

TEST_CASE("query-only benchmark produces records with both metric columns") {
  EvalFixture fx;
  EvalConfig cfg;
  cfg.dataset_path = fx.open_qa_dataset(5);
  cfg.method = EvalMethod::QueryOnly;
  cfg.task_kind = TaskKind::OpenQA;
  const BenchReport report = run_benchmark(cfg, fx.index, fx.services());
  CHECK(report.records.size() == 5);
  CHECK(report.aggregate.failures == 0);
  for (const auto& r : report.records) {
    CHECK(!r.retrieved_ids.empty());
    CHECK(r.recall_at_10 >= 0.0);  // gold evidence present on every example
  }
  CHECK(report.aggregate.mean_recall_at_10 >= 0.0);
  CHECK(report.aggregate.llm_calls == 5);
}

TEST_CASE("mia-rag at alpha zero retrieves exactly the query-only slate") {
  EvalFixture fx;
  EvalConfig base;
  base.dataset_path = fx.open_qa_dataset(4);
  base.task_kind = TaskKind::OpenQA;

  EvalConfig qo = base;
  qo.method = EvalMethod::QueryOnly;
  EvalConfig rag = base;
  rag.method = EvalMethod::MiaRag;
  rag.alpha = 0.0;

  const BenchReport a = run_benchmark(qo, fx.index, fx.services());
  const BenchReport b = run_benchmark(rag, fx.index, fx.services());
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].retrieved_ids == b.records[i].retrieved_ids);
  }
}

TEST_CASE("an always-ANSWER agent matches a static one-pass retrieval") {
  EvalFixture fx;
  EvalConfig cfg;
  cfg.dataset_path = fx.open_qa_dataset(3);
  cfg.method = EvalMethod::Agent;
  cfg.task_kind = TaskKind::OpenQA;
  cfg.steps = 3;
  const BenchReport agent_report = run_benchmark(cfg, fx.index, fx.services());

  // static counterpart: first-k signature, one dual retrieval of step size
  const auto examples = load_examples(cfg.dataset_path, TaskKind::OpenQA);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Signature sig =
        init_signature(examples[i].question, fx.index, fx.embedder,
                       InitMode::FirstK, cfg.init_candidates,
                       cfg.signature_budget, cfg.weights);
    const RankedList expect = mia_retrieve(examples[i].question, sig, fx.embedder,
                                           fx.index, kStepRetrieveK, cfg.alpha);
    CHECK(agent_report.records[i].retrieved_ids == expect.chunk_ids());
  }
}

TEST_CASE("per-example failures are recorded without aborting the run") {
  EvalFixture fx;
  // a generator that cannot be parsed as a detective answer
  EvalConfig cfg;
  std::vector<nlohmann::json> rows{
      {{"example_id", "good"}, {"question", "q1"}, {"gold_answer", "A"},
       {"options", {"w", "x", "y", "z"}}},
  };
  cfg.dataset_path = write_dataset(fx.dir, "det.jsonl", rows);
  cfg.method = EvalMethod::QueryOnly;
  cfg.task_kind = TaskKind::Detective;

  ScriptedProvider bad_generator({"no json here"});
  AgentServices services{fx.embedder, fx.updater, bad_generator, fx.templates};
  const BenchReport report = run_benchmark(cfg, fx.index, services);
  REQUIRE(report.records.size() == 1);
  CHECK(!report.records[0].error.empty());
  CHECK(report.aggregate.failures == 1);
  CHECK(!report.records[0].correct);
}

TEST_CASE("reports round-trip and reject tampered aggregates") {
  EvalFixture fx;
  EvalConfig cfg;
  cfg.dataset_path = fx.open_qa_dataset(4);
  cfg.method = EvalMethod::MiaEmb;
  cfg.task_kind = TaskKind::OpenQA;
  const BenchReport report = run_benchmark(cfg, fx.index, fx.services());

  const std::string path = (fx.dir / "report.jsonl").string();
  write_report(report, path);
  const BenchReport loaded = read_report(path, TaskKind::OpenQA);
  CHECK(loaded.records.size() == report.records.size());
  CHECK(loaded.aggregate.accuracy == doctest::Approx(report.aggregate.accuracy));
  CHECK(loaded.aggregate.mean_f1 == doctest::Approx(report.aggregate.mean_f1));

  // flip one correctness flag: the stored aggregate no longer matches
  std::vector<std::string> lines;
  {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  auto j = nlohmann::json::parse(lines[0]);
  j["correct"] = !j["correct"].get<bool>();
  j["f1"] = 0.73;
  lines[0] = j.dump();
  {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
  }
  CHECK_THROWS_AS(read_report(path, TaskKind::OpenQA), Error);
}

TEST_CASE("benchmark runs are deterministic") {
  EvalFixture fx;
  EvalConfig cfg;
  cfg.dataset_path = fx.open_qa_dataset(6);
  cfg.method = EvalMethod::MiaRag;
  cfg.task_kind = TaskKind::OpenQA;
  cfg.workers = 3;  // concurrency must not leak into record order

  const BenchReport a = run_benchmark(cfg, fx.index, fx.services());
  const BenchReport b = run_benchmark(cfg, fx.index, fx.services());
  const std::string pa = (fx.dir / "a.jsonl").string();
  const std::string pb = (fx.dir / "b.jsonl").string();
  write_report(a, pa);
  write_report(b, pb);
  std::ifstream fa(pa), fb(pb);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("claim datasets run end to end with pair accuracy") {
  EvalFixture fx;
  std::vector<nlohmann::json> rows;
  for (int p = 0; p < 3; ++p) {
    for (int m = 0; m < 2; ++m) {
      rows.push_back({{"example_id", "c" + std::to_string(p * 2 + m)},
                      {"question", "the keeper hid the relic variant " +
                                       std::to_string(p * 2 + m)},
                      {"gold_answer", m == 0 ? "TRUE" : "FALSE"},
                      {"pair_id", "p" + std::to_string(p)}});
    }
  }
  EvalConfig cfg;
  cfg.dataset_path = write_dataset(fx.dir, "claims.jsonl", rows);
  cfg.method = EvalMethod::MiaRag;
  cfg.task_kind = TaskKind::Claim;

  // offline generator always answers TRUE: every TRUE member is correct,
  // every FALSE member is wrong, so no pair has both members correct
  const BenchReport report = run_benchmark(cfg, fx.index, fx.services());
  CHECK(report.aggregate.failures == 0);
  CHECK(report.aggregate.accuracy == doctest::Approx(0.5));
  CHECK(report.aggregate.pair_acc == doctest::Approx(0.0));
  const std::string table = render_report_table(report, TaskKind::Claim);
  CHECK(table.find("PairAcc") != std::string::npos);
}

TEST_CASE("per-language aggregates appear when examples carry language tags") {
  EvalFixture fx;
  std::vector<nlohmann::json> rows;
  for (int i = 0; i < 4; ++i) {
    rows.push_back({{"example_id", "e" + std::to_string(i)},
                    {"question", "where is w" + std::to_string(i)},
                    {"gold_answer", "w"},
                    {"lang", i % 2 ? "en" : "zh"}});
  }
  EvalConfig cfg;
  cfg.dataset_path = write_dataset(fx.dir, "lang.jsonl", rows);
  cfg.method = EvalMethod::QueryOnly;
  cfg.task_kind = TaskKind::OpenQA;
  const BenchReport report = run_benchmark(cfg, fx.index, fx.services());
  CHECK(report.aggregate.per_lang.size() == 2);
  CHECK(report.aggregate.per_lang.count("en") == 1);
  CHECK(report.aggregate.per_lang.count("zh") == 1);
  CHECK(report.aggregate.macro_metric >= 0.0);
  const std::string table = render_report_table(report, TaskKind::OpenQA);
  CHECK(table.find("en") != std::string::npos);
  CHECK(table.find("zh") != std::string::npos);
}

TEST_CASE("eval YAML configs parse every knob") {
  const fs::path dir = temp_dir("config");
  const fs::path path = dir / "full.yaml";
  {
    std::ofstream out(path);
    out << "embedding:\n"
        << "  kind: offline-hash\n"
        << "  dim: 96\n"
        << "llm:\n"
        << "  updater: {kind: scripted, responses: [\"a\", \"b\"]}\n"
        << "  generator: {kind: offline, echo_words: 9}\n"
        << "eval:\n"
        << "  dataset: ds.jsonl\n"
        << "  index: idx.mia\n"
        << "  method: agent\n"
        << "  task: detective\n"
        << "  variant: chunks+sig\n"
        << "  alpha: 0.25\n"
        << "  steps: 2\n"
        << "  rewrite: false\n"
        << "  retrieve_k: 7\n"
        << "  init_candidates: 30\n"
        << "  signature_budget: 4\n"
        << "  init_mode: coverage\n"
        << "  weights: [0.2, 0.5, 0.3]\n"
        << "  workers: 3\n"
        << "  seed: 17\n";
  }
  const EvalConfig cfg = load_eval_config(path.string());
  CHECK(cfg.dataset_path == "ds.jsonl");
  CHECK(cfg.index_path == "idx.mia");
  CHECK(cfg.method == EvalMethod::Agent);
  CHECK(cfg.task_kind == TaskKind::Detective);
  CHECK(cfg.variant == AnswerVariant::ChunksSig);
  CHECK(cfg.alpha == doctest::Approx(0.25));
  CHECK(cfg.steps == 2);
  CHECK(cfg.rewrite == false);
  CHECK(cfg.retrieve_k == 7);
  CHECK(cfg.init_candidates == 30);
  CHECK(cfg.signature_budget == 4);
  REQUIRE(cfg.init_mode.has_value());
  CHECK(*cfg.init_mode == InitMode::Coverage);
  CHECK(cfg.weights.lambda_c == doctest::Approx(0.5));
  CHECK(cfg.workers == 3);
  CHECK(cfg.seed == 17);
  CHECK(!cfg.fingerprint().empty());

  const EngineConfig engine = load_engine_config(path.string());
  CHECK(engine.embedding.dim == 96);
  CHECK(engine.updater.kind == "scripted");
  CHECK(engine.updater.responses.size() == 2);
  CHECK(engine.generator.echo_words == 9);

  // bad weights are rejected at load time
  const fs::path bad = dir / "bad.yaml";
  {
    std::ofstream out(bad);
    out << "eval:\n  dataset: d\n  index: i\n  weights: [0.9, 0.9, 0.9]\n";
  }
  CHECK_THROWS_AS(load_eval_config(bad.string()), Error);
}
