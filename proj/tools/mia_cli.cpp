// Command-line front end. Everything goes through the C API in mia.h; this
// translation unit never touches the C++ core directly.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mia.h"

namespace {

struct EngineHandle {
  mia_engine* ptr = nullptr;
  ~EngineHandle() { mia_engine_destroy(ptr); }
};

struct IndexHandle {
  mia_index* ptr = nullptr;
  ~IndexHandle() { mia_index_close(ptr); }
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { mia_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

[[noreturn]] void die(const char* what, mia_status status) {
  std::fprintf(stderr, "mia: %s failed (%d): %s\n", what, static_cast<int>(status),
               mia_errmsg());
  std::exit(1);
}

void check(mia_status status, const char* what) {
  if (status != MIA_OK) die(what, status);
}

mia_engine* open_engine(const std::string& config_path) {
  mia_engine* engine = nullptr;
  check(mia_engine_create(config_path.empty() ? nullptr : config_path.c_str(),
                          &engine),
        "engine create");
  return engine;
}

mia_index* open_index(const std::string& path) {
  mia_index* index = nullptr;
  check(mia_index_open(path.c_str(), &index), "index open");
  return index;
}

// A --signature argument may point at `signature init --emit json` output or
// at a plain text file.
std::string read_signature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "mia: cannot open signature file %s\n", path.c_str());
    std::exit(1);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string raw = buf.str();
  auto parsed = nlohmann::json::parse(raw, nullptr, false);
  if (!parsed.is_discarded() && parsed.is_object() &&
      parsed.contains("rendered_text")) {
    return parsed["rendered_text"].get<std::string>();
  }
  return raw;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signature-conditioned retrieval over long documents"};
  app.require_subcommand(1);

  std::string config_path;
  int log_level = 2;
  app.add_option("--config", config_path, "engine/provider config YAML");
  app.add_option("--log-level", log_level, "0=debug .. 4=off")->default_val(2);

  // index build / inspect
  auto* index_cmd = app.add_subcommand("index", "build or inspect an index");
  index_cmd->require_subcommand(1);

  std::string corpus, out_path, cache_dir;
  uint32_t window = 20, chunk_words = 200;
  auto* build_cmd = index_cmd->add_subcommand("build", "index a corpus");
  build_cmd->add_option("--corpus", corpus, "corpus dir or JSONL file")->required();
  build_cmd->add_option("--out", out_path, "output index path")->required();
  build_cmd->add_option("--window", window, "chunks per session window");
  build_cmd->add_option("--chunk-words", chunk_words, "words per chunk");
  build_cmd->add_option("--cache-dir", cache_dir, "summary cache directory");

  std::string inspect_path;
  auto* inspect_cmd = index_cmd->add_subcommand("inspect", "describe an index");
  inspect_cmd->add_option("path", inspect_path, "index file")->required();

  // signature init
  auto* sig_cmd = app.add_subcommand("signature", "signature construction");
  sig_cmd->require_subcommand(1);
  std::string sig_index, sig_query, sig_mode = "coverage", sig_weights, sig_emit = "json";
  uint32_t sig_k = 5;
  auto* sig_init = sig_cmd->add_subcommand("init", "build the step-0 signature");
  sig_init->add_option("--index", sig_index)->required();
  sig_init->add_option("--query", sig_query)->required();
  sig_init->add_option("--k", sig_k, "summary budget");
  sig_init->add_option("--mode", sig_mode, "coverage|first-k");
  sig_init->add_option("--weights", sig_weights, "lambda_q,lambda_c,lambda_d");
  sig_init->add_option("--emit", sig_emit, "output format (json)");

  // retrieve
  std::string ret_index, ret_query, ret_signature_file, ret_emit = "json";
  uint32_t ret_k = 10;
  double ret_alpha = 0.5;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "rank chunks for a query");
  retrieve_cmd->add_option("--index", ret_index)->required();
  retrieve_cmd->add_option("--query", ret_query)->required();
  retrieve_cmd->add_option("--signature", ret_signature_file,
                           "signature file (init output or plain text)");
  retrieve_cmd->add_option("--k", ret_k);
  retrieve_cmd->add_option("--alpha", ret_alpha, "signature strength in [0,1]");
  retrieve_cmd->add_option("--emit", ret_emit, "output format (json)");

  // agent run
  auto* agent_cmd = app.add_subcommand("agent", "iterative agent");
  agent_cmd->require_subcommand(1);
  std::string ag_index, ag_question, ag_options, ag_variant = "chunks+sig+evi";
  std::string ag_rewrite = "on", ag_task = "open_qa", ag_trace, ag_init_mode = "first-k";
  int ag_steps = 3;
  double ag_alpha = 0.5;
  uint32_t ag_k = 20;
  auto* agent_run = agent_cmd->add_subcommand("run", "answer one question");
  agent_run->add_option("--index", ag_index)->required();
  agent_run->add_option("--question", ag_question)->required();
  agent_run->add_option("--options", ag_options, "comma-separated A-D texts");
  agent_run->add_option("--steps", ag_steps, "refinement budget");
  agent_run->add_option("--alpha", ag_alpha);
  agent_run->add_option("--k", ag_k, "chunks per retrieval step");
  agent_run->add_option("--variant", ag_variant,
                        "chunks|chunks+sig|chunks+evi|chunks+sig+evi");
  agent_run->add_option("--rewrite", ag_rewrite, "on|off query rewriting");
  agent_run->add_option("--task", ag_task, "detective|open_qa|claim");
  agent_run->add_option("--init-mode", ag_init_mode, "coverage|first-k");
  agent_run->add_option("--trace", ag_trace, "write the run trace JSON here");

  // eval run / table
  auto* eval_cmd = app.add_subcommand("eval", "benchmark harness");
  eval_cmd->require_subcommand(1);
  std::string eval_config, eval_out = "report.jsonl";
  auto* eval_run = eval_cmd->add_subcommand("run", "run a benchmark config");
  eval_run->add_option("--config", eval_config, "YAML config")->required();
  eval_run->add_option("--out", eval_out, "report JSONL path");

  std::string table_report, table_task = "open_qa";
  auto* eval_table = eval_cmd->add_subcommand("table", "summarize a report");
  eval_table->add_option("report", table_report, "report JSONL")->required();
  eval_table->add_option("--task", table_task, "detective|open_qa|claim");

  CLI11_PARSE(app, argc, argv);
  mia_set_log_level(log_level);

  if (build_cmd->parsed()) {
    EngineHandle engine{open_engine(config_path)};
    OwnedString info;
    check(mia_index_build(engine.ptr, corpus.c_str(), out_path.c_str(), window,
                          chunk_words, cache_dir.empty() ? nullptr : cache_dir.c_str(),
                          &info.ptr),
          "index build");
    std::cout << info.str() << "\n";
    return 0;
  }

  if (inspect_cmd->parsed()) {
    IndexHandle index{open_index(inspect_path)};
    OwnedString info;
    check(mia_index_info(index.ptr, &info.ptr), "index inspect");
    std::cout << info.str() << "\n";
    return 0;
  }

  if (sig_init->parsed()) {
    EngineHandle engine{open_engine(config_path)};
    IndexHandle index{open_index(sig_index)};
    OwnedString out;
    check(mia_signature_init(engine.ptr, index.ptr, sig_query.c_str(), sig_k,
                             sig_mode.c_str(),
                             sig_weights.empty() ? nullptr : sig_weights.c_str(),
                             &out.ptr),
          "signature init");
    std::cout << out.str() << "\n";
    return 0;
  }

  if (retrieve_cmd->parsed()) {
    EngineHandle engine{open_engine(config_path)};
    IndexHandle index{open_index(ret_index)};
    std::string signature_text;
    if (!ret_signature_file.empty()) {
      signature_text = read_signature_file(ret_signature_file);
    }
    OwnedString out;
    check(mia_retrieve(engine.ptr, index.ptr, ret_query.c_str(),
                       signature_text.empty() ? nullptr : signature_text.c_str(),
                       ret_k, ret_alpha, &out.ptr),
          "retrieve");
    std::cout << out.str() << "\n";
    return 0;
  }

  if (agent_run->parsed()) {
    EngineHandle engine{open_engine(config_path)};
    IndexHandle index{open_index(ag_index)};

    nlohmann::json params{{"steps", ag_steps},       {"alpha", ag_alpha},
                          {"k", ag_k},               {"variant", ag_variant},
                          {"rewrite", ag_rewrite == "on"},
                          {"task", ag_task},         {"init_mode", ag_init_mode}};
    if (!ag_options.empty()) {
      nlohmann::json options = nlohmann::json::array();
      std::istringstream in(ag_options);
      std::string item;
      while (std::getline(in, item, ',')) options.push_back(item);
      params["options"] = std::move(options);
    }
    OwnedString out;
    check(mia_agent_run(engine.ptr, index.ptr, ag_question.c_str(),
                        params.dump().c_str(), &out.ptr),
          "agent run");
    auto result = nlohmann::json::parse(out.str());
    if (!ag_trace.empty()) {
      std::ofstream trace_out(ag_trace, std::ios::binary | std::ios::trunc);
      trace_out << result["trace"].dump(2) << "\n";
    }
    std::cout << "answer: " << result["answer"].get<std::string>() << "\n";
    if (!result["parsed"].is_null()) {
      std::cout << "parsed: " << result["parsed"].get<std::string>() << "\n";
    }
    return 0;
  }

  if (eval_run->parsed()) {
    OwnedString summary;
    check(mia_eval_run(eval_config.c_str(), eval_out.c_str(), &summary.ptr),
          "eval run");
    std::cout << summary.str() << "\n";
    return 0;
  }

  if (eval_table->parsed()) {
    OwnedString text;
    check(mia_eval_table(table_report.c_str(), table_task.c_str(), &text.ptr),
          "eval table");
    std::cout << text.str();
    return 0;
  }

  return 0;
}
