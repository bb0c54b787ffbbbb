#pragma once

#include <memory>
#include <string>

#include "mia/agent.hpp"
#include "mia/config.hpp"
#include "mia/prompts.hpp"
#include "mia/providers.hpp"

namespace mia {

enum class LLMRole { Summarizer, Updater, Generator };

// Owns the configured providers (each behind a central in-flight limiter,
// capacity 1 for single-flight providers) and the prompt templates.
class Engine {
 public:
  static Engine create(const EngineConfig& config);

  EmbeddingProvider& embedder() { return *embedder_; }
  LLMProvider& llm(LLMRole role);
  const TemplateSet& templates() const { return templates_; }

  AgentServices agent_services() {
    return AgentServices{embedder(), llm(LLMRole::Updater),
                         llm(LLMRole::Generator), templates_};
  }

 private:
  Engine() = default;

  std::shared_ptr<EmbeddingProvider> embedder_;
  std::shared_ptr<LLMProvider> summarizer_;
  std::shared_ptr<LLMProvider> updater_;
  std::shared_ptr<LLMProvider> generator_;
  TemplateSet templates_;
};

// Factories used by Engine::create; exposed for tests.
std::shared_ptr<EmbeddingProvider> make_embedding_provider(const ProviderConfig& config);
std::shared_ptr<LLMProvider> make_llm_provider(const ProviderConfig& config);

// HTTP-backed providers (wire formats documented in the README).
std::shared_ptr<EmbeddingProvider> make_http_embedder(const ProviderConfig& config);
std::shared_ptr<LLMProvider> make_http_llm(const ProviderConfig& config);

}  // namespace mia
