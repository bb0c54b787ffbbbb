#include "mia/config.hpp"

#include <filesystem>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mia/error.hpp"

namespace mia {

namespace {

ProviderConfig parse_provider(const YAML::Node& node, ProviderConfig defaults) {
  if (!node) return defaults;
  ProviderConfig cfg = defaults;
  if (node["kind"]) cfg.kind = node["kind"].as<std::string>();
  if (node["dim"]) cfg.dim = node["dim"].as<std::size_t>();
  if (node["batch_size"]) cfg.batch_size = node["batch_size"].as<std::size_t>();
  if (node["endpoint"]) cfg.endpoint = node["endpoint"].as<std::string>();
  if (node["auth_env"]) cfg.auth_env = node["auth_env"].as<std::string>();
  if (node["model"]) cfg.model = node["model"].as<std::string>();
  if (node["timeout_ms"]) cfg.timeout_ms = node["timeout_ms"].as<int>();
  if (node["responses"]) {
    for (const auto& r : node["responses"]) {
      cfg.responses.push_back(r.as<std::string>());
    }
  }
  if (node["responses_file"]) {
    cfg.responses_file = node["responses_file"].as<std::string>();
  }
  if (node["echo_words"]) cfg.echo_words = node["echo_words"].as<std::size_t>();
  if (node["max_retries"]) cfg.max_retries = node["max_retries"].as<int>();
  if (node["max_in_flight"]) {
    cfg.max_in_flight = node["max_in_flight"].as<std::size_t>();
  }
  return cfg;
}

YAML::Node load_root(const std::string& yaml_path) {
  if (yaml_path.empty()) return YAML::Node();
  if (!std::filesystem::exists(yaml_path)) {
    raise(ErrorCode::IoError, "config file not found: " + yaml_path);
  }
  try {
    return YAML::LoadFile(yaml_path);
  } catch (const YAML::Exception& e) {
    raise(ErrorCode::ConfigError, "cannot parse " + yaml_path + ": " + e.what());
  }
}

}  // namespace

EngineConfig load_engine_config(const std::string& yaml_path) {
  EngineConfig cfg;
  YAML::Node root = load_root(yaml_path);
  if (!root) return cfg;

  cfg.embedding = parse_provider(root["embedding"], cfg.embedding);
  if (root["llm"]) {
    const YAML::Node llm = root["llm"];
    cfg.summarizer = parse_provider(llm["summarizer"], cfg.summarizer);
    cfg.updater = parse_provider(llm["updater"], cfg.updater);
    cfg.generator = parse_provider(llm["generator"], cfg.generator);
  }
  if (root["templates_dir"]) {
    cfg.templates_dir = root["templates_dir"].as<std::string>();
  }
  return cfg;
}

EvalConfig load_eval_config(const std::string& yaml_path) {
  YAML::Node root = load_root(yaml_path);
  if (!root || !root["eval"]) {
    raise(ErrorCode::ConfigError, "config has no eval section: " + yaml_path);
  }
  const YAML::Node e = root["eval"];
  EvalConfig cfg;
  if (!e["dataset"]) raise(ErrorCode::ConfigError, "eval.dataset is required");
  cfg.dataset_path = e["dataset"].as<std::string>();
  if (!e["index"]) raise(ErrorCode::ConfigError, "eval.index is required");
  cfg.index_path = e["index"].as<std::string>();
  if (e["method"]) cfg.method = eval_method_from_string(e["method"].as<std::string>());
  if (e["task"]) cfg.task_kind = task_kind_from_string(e["task"].as<std::string>());
  if (e["variant"]) {
    cfg.variant = answer_variant_from_string(e["variant"].as<std::string>());
  }
  if (e["alpha"]) cfg.alpha = e["alpha"].as<double>();
  if (e["steps"]) cfg.steps = e["steps"].as<int>();
  if (e["rewrite"]) cfg.rewrite = e["rewrite"].as<bool>();
  if (e["retrieve_k"]) cfg.retrieve_k = e["retrieve_k"].as<std::uint32_t>();
  if (e["init_candidates"]) {
    cfg.init_candidates = e["init_candidates"].as<std::uint32_t>();
  }
  if (e["signature_budget"]) {
    cfg.signature_budget = e["signature_budget"].as<std::uint32_t>();
  }
  if (e["init_mode"]) {
    cfg.init_mode = init_mode_from_string(e["init_mode"].as<std::string>());
  }
  if (e["weights"]) {
    const YAML::Node w = e["weights"];
    if (w.IsSequence() && w.size() == 3) {
      cfg.weights.lambda_q = w[0].as<double>();
      cfg.weights.lambda_c = w[1].as<double>();
      cfg.weights.lambda_d = w[2].as<double>();
    } else {
      raise(ErrorCode::ConfigError, "eval.weights must be a 3-element sequence");
    }
  }
  if (e["workers"]) cfg.workers = e["workers"].as<std::size_t>();
  if (e["seed"]) cfg.seed = e["seed"].as<std::uint64_t>();
  cfg.weights.validate();
  return cfg;
}

}  // namespace mia
