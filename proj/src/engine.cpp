#include "mia/engine.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "mia/error.hpp"

namespace mia {

namespace {

// In-flight limiting wrappers. Capacity 1 for single-flight providers, so
// callers never have to care which kind they hold.
class LimitedEmbedder final : public EmbeddingProvider {
 public:
  LimitedEmbedder(std::shared_ptr<EmbeddingProvider> inner, std::size_t max_in_flight)
      : inner_(std::move(inner)),
        limiter_(inner_->single_flight() ? 1 : max_in_flight) {}

  const std::string& name() const override { return inner_->name(); }
  std::size_t dim() const override { return inner_->dim(); }
  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) override {
    auto ticket = limiter_.acquire();
    return inner_->embed_batch(texts);
  }

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  ProviderLimiter limiter_;
};

class LimitedLLM final : public LLMProvider {
 public:
  LimitedLLM(std::shared_ptr<LLMProvider> inner, std::size_t max_in_flight)
      : inner_(std::move(inner)),
        limiter_(inner_->single_flight() ? 1 : max_in_flight) {
    retry_policy = inner_->retry_policy;
  }

  const std::string& name() const override { return inner_->name(); }
  std::string complete_once(const ChatRequest& request) override {
    auto ticket = limiter_.acquire();
    return inner_->complete_once(request);
  }
  bool single_flight() const override { return inner_->single_flight(); }

 private:
  std::shared_ptr<LLMProvider> inner_;
  ProviderLimiter limiter_;
};

std::vector<std::string> read_responses_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open responses file " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_array()) {
    raise(ErrorCode::ConfigError, "responses file must be a JSON array: " + path);
  }
  std::vector<std::string> out;
  for (const auto& r : j) out.push_back(r.get<std::string>());
  return out;
}

}  // namespace

std::shared_ptr<EmbeddingProvider> make_embedding_provider(
    const ProviderConfig& config) {
  std::shared_ptr<EmbeddingProvider> inner;
  if (config.kind == "offline-hash") {
    inner = std::make_shared<OfflineHashEmbedder>(config.dim);
  } else if (config.kind == "http") {
    inner = make_http_embedder(config);
  } else {
    raise(ErrorCode::ConfigError,
          "unknown embedding provider kind '" + config.kind + "'");
  }
  return std::make_shared<LimitedEmbedder>(std::move(inner), config.max_in_flight);
}

std::shared_ptr<LLMProvider> make_llm_provider(const ProviderConfig& config) {
  std::shared_ptr<LLMProvider> inner;
  if (config.kind == "offline") {
    inner = std::make_shared<OfflineResponder>(config.echo_words);
  } else if (config.kind == "scripted") {
    std::vector<std::string> responses = config.responses;
    if (!config.responses_file.empty()) {
      auto extra = read_responses_file(config.responses_file);
      responses.insert(responses.end(), extra.begin(), extra.end());
    }
    inner = std::make_shared<ScriptedProvider>(std::move(responses));
  } else if (config.kind == "http") {
    inner = make_http_llm(config);
    inner->retry_policy.max_retries = config.max_retries;
  } else {
    raise(ErrorCode::ConfigError, "unknown llm provider kind '" + config.kind + "'");
  }
  return std::make_shared<LimitedLLM>(std::move(inner), config.max_in_flight);
}

Engine Engine::create(const EngineConfig& config) {
  Engine engine;
  engine.embedder_ = make_embedding_provider(config.embedding);
  engine.summarizer_ = make_llm_provider(config.summarizer);
  engine.updater_ = make_llm_provider(config.updater);
  engine.generator_ = make_llm_provider(config.generator);
  engine.templates_ = TemplateSet::load_default(config.templates_dir);
  return engine;
}

LLMProvider& Engine::llm(LLMRole role) {
  switch (role) {
    case LLMRole::Summarizer: return *summarizer_;
    case LLMRole::Updater: return *updater_;
    case LLMRole::Generator: return *generator_;
  }
  raise(ErrorCode::InvalidArgument, "bad llm role");
}

}  // namespace mia
