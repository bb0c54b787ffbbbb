#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mia/eval.hpp"

namespace mia {

struct ProviderConfig {
  std::string kind;   // embedding: offline-hash | http; llm: offline | scripted | http
  // embedding
  std::size_t dim = 256;
  std::size_t batch_size = 16;
  // http
  std::string endpoint;
  std::string auth_env;   // name of the env var holding the token
  std::string model;
  int timeout_ms = 30000;
  // scripted
  std::vector<std::string> responses;
  std::string responses_file;  // JSON array of strings
  // offline responder
  std::size_t echo_words = 50;
  // shared
  int max_retries = 2;
  std::size_t max_in_flight = 4;
};

inline ProviderConfig default_provider(std::string kind) {
  ProviderConfig cfg;
  cfg.kind = std::move(kind);
  return cfg;
}

struct EngineConfig {
  ProviderConfig embedding = default_provider("offline-hash");
  ProviderConfig summarizer = default_provider("offline");
  ProviderConfig updater = default_provider("offline");
  ProviderConfig generator = default_provider("offline");
  std::string templates_dir;  // empty: MIA_TEMPLATES_DIR, then built-in default
};

// Parses the engine section (providers, templates) of a YAML config file.
// A missing file or empty path yields the all-offline defaults.
EngineConfig load_engine_config(const std::string& yaml_path);

// Parses the eval section of the same file. Fields: dataset, index, method,
// task, variant, alpha, steps, rewrite, retrieve_k, init_candidates,
// signature_budget, init_mode, weights, workers, seed.
EvalConfig load_eval_config(const std::string& yaml_path);

}  // namespace mia
