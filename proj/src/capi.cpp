#include "mia.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "mia/agent.hpp"
#include "mia/config.hpp"
#include "mia/engine.hpp"
#include "mia/error.hpp"
#include "mia/eval.hpp"
#include "mia/index.hpp"
#include "mia/log.hpp"
#include "mia/retrieval.hpp"
#include "mia/signature.hpp"

using nlohmann::json;

struct mia_engine {
  mia::Engine impl;
};

struct mia_index {
  mia::MindscapeIndex impl;
};

namespace {

thread_local std::string t_errmsg = "no error";

mia_status status_of(mia::ErrorCode code) {
  using EC = mia::ErrorCode;
  switch (code) {
    case EC::InvalidArgument:
    case EC::ZeroVector:
    case EC::DimMismatch:
    case EC::AlreadySelected:
    case EC::PoolTooLarge:
      return MIA_ERR_INVALID_ARG;
    case EC::IoError:
      return MIA_ERR_IO;
    case EC::ConfigError:
    case EC::MissingPlaceholder:
    case EC::UnknownPlaceholder:
      return MIA_ERR_CONFIG;
    case EC::CorruptIndex:
      return MIA_ERR_CORRUPT_INDEX;
    case EC::VersionMismatch:
      return MIA_ERR_VERSION_MISMATCH;
    case EC::EmptyDocument:
    case EC::EmptyPool:
    case EC::EmptyIndex:
    case EC::EmptyGold:
    case EC::EmptySeries:
      return MIA_ERR_EMPTY_INPUT;
    case EC::ProviderFailure:
    case EC::Timeout:
    case EC::EmptySummary:
      return MIA_ERR_PROVIDER;
    case EC::ParseError:
    case EC::MissingAction:
    case EC::InvalidAction:
    case EC::MissingRefinement:
    case EC::UnparseableAnswer:
    case EC::MalformedPair:
      return MIA_ERR_PARSE;
    case EC::OutOfRange:
      return MIA_ERR_OUT_OF_RANGE;
    default:
      return MIA_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
mia_status guarded(Fn&& fn) {
  try {
    fn();
    return MIA_OK;
  } catch (const mia::Error& e) {
    t_errmsg = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    t_errmsg = e.what();
    return MIA_ERR_INTERNAL;
  } catch (...) {
    t_errmsg = "unknown error";
    return MIA_ERR_INTERNAL;
  }
}

mia::ObjectiveWeights parse_weights_csv(const char* csv) {
  mia::ObjectiveWeights w;
  if (!csv || !*csv) return w;
  double q, c, d;
  if (std::sscanf(csv, "%lf,%lf,%lf", &q, &c, &d) != 3) {
    mia::raise(mia::ErrorCode::InvalidArgument,
               "weights must be 'q,c,d', got '" + std::string(csv) + "'");
  }
  w.lambda_q = q;
  w.lambda_c = c;
  w.lambda_d = d;
  w.validate();
  return w;
}

json signature_to_json(const mia::Signature& sig, const mia::CandidatePool& pool,
                       const mia::EmbeddingVector& query,
                       const mia::ObjectiveWeights& weights) {
  json gain_trace = json::array();
  for (const auto& step : sig.gain_trace) {
    gain_trace.push_back({{"summary_id", step.summary_id},
                          {"gain", step.gain},
                          {"query_term", step.query_term},
                          {"coverage_term", step.coverage_term},
                          {"diversity_term", step.diversity_term}});
  }
  return json{
      {"selected", sig.selected},
      {"values",
       {{"fq", mia::query_relevance(sig.selected, pool, query)},
        {"fc", mia::coverage_value(sig.selected, pool)},
        {"gain_trace", std::move(gain_trace)}}},
      {"rendered_text", sig.rendered_text}};
}

}  // namespace

extern "C" {

const char* mia_errmsg(void) { return t_errmsg.c_str(); }

void mia_string_free(char* s) { std::free(s); }

void mia_set_log_level(int level) {
  if (level < 0) level = 0;
  if (level > 4) level = 4;
  mia::set_log_level(static_cast<mia::LogLevel>(level));
}

mia_status mia_engine_create(const char* config_path, mia_engine** out) {
  return guarded([&] {
    if (!out) mia::raise(mia::ErrorCode::InvalidArgument, "null out pointer");
    mia::EngineConfig config =
        mia::load_engine_config(config_path ? config_path : "");
    auto* handle = new mia_engine{mia::Engine::create(config)};
    *out = handle;
  });
}

void mia_engine_destroy(mia_engine* engine) { delete engine; }

mia_status mia_index_build(mia_engine* engine, const char* corpus_path,
                           const char* out_path, uint32_t window_size,
                           uint32_t chunk_words, const char* cache_dir,
                           char** info_json_out) {
  return guarded([&] {
    if (!engine || !corpus_path || !out_path) {
      mia::raise(mia::ErrorCode::InvalidArgument, "null argument");
    }
    auto docs = mia::load_corpus(corpus_path);
    mia::IndexBuildOptions options;
    options.window_size = window_size ? window_size : 20;
    options.chunk_words = chunk_words ? chunk_words : 200;
    if (cache_dir && *cache_dir) options.cache_dir = cache_dir;
    mia::MindscapeIndex index = mia::build_index(
        docs, engine->impl.embedder(), engine->impl.llm(mia::LLMRole::Summarizer),
        engine->impl.templates().get("session_summary"), options);
    mia::save_index(index, out_path);
    if (info_json_out) *info_json_out = dup_string(mia::index_info_json(index));
  });
}

mia_status mia_index_open(const char* path, mia_index** out) {
  return guarded([&] {
    if (!path || !out) mia::raise(mia::ErrorCode::InvalidArgument, "null argument");
    auto* handle = new mia_index{mia::load_index(path)};
    *out = handle;
  });
}

void mia_index_close(mia_index* index) { delete index; }

mia_status mia_index_info(const mia_index* index, char** json_out) {
  return guarded([&] {
    if (!index || !json_out) {
      mia::raise(mia::ErrorCode::InvalidArgument, "null argument");
    }
    *json_out = dup_string(mia::index_info_json(index->impl));
  });
}

mia_status mia_signature_init(mia_engine* engine, const mia_index* index,
                              const char* query, uint32_t k, const char* mode,
                              const char* weights_csv, char** json_out) {
  return guarded([&] {
    if (!engine || !index || !query || !json_out) {
      mia::raise(mia::ErrorCode::InvalidArgument, "null argument");
    }
    const mia::ObjectiveWeights weights = parse_weights_csv(weights_csv);
    const mia::InitMode init_mode =
        mia::init_mode_from_string(mode && *mode ? mode : "coverage");
    const mia::EmbeddingVector q = engine->impl.embedder().embed(query);
    mia::RankedList slate = mia::query_only_retrieve(
        q, index->impl, mia::kStepZeroCandidates);
    const auto ids = slate.chunk_ids();
    mia::CandidatePool pool = mia::make_candidate_pool(ids, index->impl);
    const uint32_t budget = k ? k : 5;
    mia::Signature sig = init_mode == mia::InitMode::Coverage
                             ? mia::greedy_select(pool, q, budget, weights)
                             : mia::first_k_select(pool, budget);
    *json_out = dup_string(signature_to_json(sig, pool, q, weights).dump(2));
  });
}

mia_status mia_retrieve(mia_engine* engine, const mia_index* index,
                        const char* query, const char* signature_text,
                        uint32_t k, double alpha, char** json_out) {
  return guarded([&] {
    if (!engine || !index || !query || !json_out) {
      mia::raise(mia::ErrorCode::InvalidArgument, "null argument");
    }
    const std::string sig_text = signature_text ? signature_text : "";
    mia::RankedList list = mia::mia_retrieve(
        query, mia::Signature::free_text(sig_text), engine->impl.embedder(),
        index->impl, k ? k : 10, alpha);
    json entries = json::array();
    for (const auto& e : list.entries) {
      entries.push_back({{"chunk_id", e.chunk_id}, {"score", e.score}});
    }
    *json_out = dup_string(json{{"entries", std::move(entries)}}.dump(2));
  });
}

mia_status mia_agent_run(mia_engine* engine, const mia_index* index,
                         const char* question, const char* params_json,
                         char** result_json_out) {
  return guarded([&] {
    if (!engine || !index || !question || !result_json_out) {
      mia::raise(mia::ErrorCode::InvalidArgument, "null argument");
    }
    mia::AgentConfig config;
    if (params_json && *params_json) {
      json params = json::parse(params_json, nullptr, false);
      if (params.is_discarded()) {
        mia::raise(mia::ErrorCode::InvalidArgument, "params_json is not JSON");
      }
      if (params.contains("steps")) config.n_stop = params["steps"].get<int>();
      if (params.contains("alpha")) config.alpha = params["alpha"].get<double>();
      if (params.contains("k")) config.step_k = params["k"].get<uint32_t>();
      if (params.contains("init_candidates")) {
        config.init_candidates = params["init_candidates"].get<uint32_t>();
      }
      if (params.contains("signature_budget")) {
        config.signature_budget = params["signature_budget"].get<uint32_t>();
      }
      if (params.contains("variant")) {
        config.variant =
            mia::answer_variant_from_string(params["variant"].get<std::string>());
      }
      if (params.contains("rewrite")) {
        config.rewrite_enabled = params["rewrite"].get<bool>();
      }
      if (params.contains("task")) {
        config.task_kind =
            mia::task_kind_from_string(params["task"].get<std::string>());
      }
      if (params.contains("init_mode")) {
        config.init_mode =
            mia::init_mode_from_string(params["init_mode"].get<std::string>());
      }
      if (params.contains("options")) {
        std::string options_str;
        std::size_t i = 0;
        for (const auto& o : params["options"]) {
          if (i) options_str += '\n';
          options_str += static_cast<char>('A' + i);
          options_str += ". " + o.get<std::string>();
          ++i;
        }
        config.options_str = options_str;
      }
    }
    mia::AgentRunResult result = mia::run_agent(
        question, index->impl, engine->impl.agent_services(), config);
    json out{{"answer", result.answer_text},
             {"parsed", result.parsed ? json(result.parsed->value) : json()},
             {"trace", json::parse(mia::trace_to_json(result.trace))}};
    *result_json_out = dup_string(out.dump(2));
  });
}

mia_status mia_eval_run(const char* config_path, const char* report_path,
                        char** summary_json_out) {
  return guarded([&] {
    if (!config_path || !report_path) {
      mia::raise(mia::ErrorCode::InvalidArgument, "null argument");
    }
    mia::EngineConfig engine_config = mia::load_engine_config(config_path);
    mia::EvalConfig eval_config = mia::load_eval_config(config_path);
    mia::Engine engine = mia::Engine::create(engine_config);
    mia::MindscapeIndex index = mia::load_index(eval_config.index_path);
    mia::BenchReport report =
        mia::run_benchmark(eval_config, index, engine.agent_services());
    mia::write_report(report, report_path);
    if (summary_json_out) {
      json agg{{"examples", report.aggregate.examples},
               {"failures", report.aggregate.failures},
               {"accuracy", report.aggregate.accuracy},
               {"mean_f1", report.aggregate.mean_f1},
               {"pair_accuracy", report.aggregate.pair_acc},
               {"mean_recall_at_10", report.aggregate.mean_recall_at_10},
               {"llm_calls", report.aggregate.llm_calls},
               {"config_fingerprint", report.aggregate.config_fingerprint}};
      *summary_json_out = dup_string(agg.dump(2));
    }
  });
}

mia_status mia_eval_table(const char* report_path, const char* task_kind,
                          char** text_out) {
  return guarded([&] {
    if (!report_path || !text_out) {
      mia::raise(mia::ErrorCode::InvalidArgument, "null argument");
    }
    const mia::TaskKind kind =
        mia::task_kind_from_string(task_kind && *task_kind ? task_kind : "open_qa");
    mia::BenchReport report = mia::read_report(report_path, kind);
    *text_out = dup_string(mia::render_report_table(report, kind));
  });
}

}  // extern "C"
