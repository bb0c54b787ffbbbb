#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "mia/embedding.hpp"

namespace mia {

// ---------------------------------------------------------------------------
// Embedding providers
// ---------------------------------------------------------------------------

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual const std::string& name() const = 0;
  virtual std::size_t dim() const = 0;

  // Maps a batch of texts to unit-norm vectors, one per input.
  virtual std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) = 0;

  // Providers that cannot take concurrent calls declare themselves
  // single-flight; the engine serializes calls to them.
  virtual bool single_flight() const { return false; }

  EmbeddingVector embed(const std::string& text) {
    return embed_batch({text}).front();
  }

  // Stable identifier of (provider kind, dim); stored in index files so a
  // loaded index can be checked against the configured provider.
  std::string fingerprint() const;
};

// Deterministic offline embedder (see hash_embed). Pure, thread-safe.
class OfflineHashEmbedder final : public EmbeddingProvider {
 public:
  explicit OfflineHashEmbedder(std::size_t dim);

  const std::string& name() const override { return name_; }
  std::size_t dim() const override { return dim_; }
  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) override;

 private:
  std::string name_;
  std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Chat-completion providers
// ---------------------------------------------------------------------------

struct ChatRequest {
  std::string system;
  std::string user;
  // Which template produced this request; logged with every call.
  std::string template_id;
};

struct RetryPolicy {
  int max_retries = 2;
  int initial_backoff_ms = 100;
};

class LLMProvider {
 public:
  virtual ~LLMProvider() = default;

  virtual const std::string& name() const = 0;

  // Single completion attempt. Throws ProviderFailure / Timeout.
  virtual std::string complete_once(const ChatRequest& request) = 0;

  virtual bool single_flight() const { return false; }

  RetryPolicy retry_policy;
};

// Runs one completion with the provider's retry policy (exponential backoff
// on ProviderFailure) and per-call logging.
std::string complete(LLMProvider& provider, const ChatRequest& request);

inline std::string complete(LLMProvider& provider, const std::string& system,
                            const std::string& user) {
  return complete(provider, ChatRequest{system, user, ""});
}

// Replays a fixed queue of responses; errors on exhaustion. The workhorse of
// the offline test harness.
class ScriptedProvider final : public LLMProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> responses);

  const std::string& name() const override { return name_; }
  std::string complete_once(const ChatRequest& request) override;

  // Scripted queues are stateful by nature.
  bool single_flight() const override { return true; }

  std::size_t remaining() const;
  const std::vector<ChatRequest>& calls() const { return calls_; }

 private:
  std::string name_;
  mutable std::mutex mutex_;
  std::deque<std::string> queue_;
  std::vector<ChatRequest> calls_;
};

// Deterministic function of the request, keyed on template_id. Gives the
// offline pipeline plausible summaries, update decisions and answers without
// any model. `echo_words` controls how much source text a summary echoes.
class OfflineResponder final : public LLMProvider {
 public:
  explicit OfflineResponder(std::size_t echo_words = 50);

  const std::string& name() const override { return name_; }
  std::string complete_once(const ChatRequest& request) override;

 private:
  std::string name_;
  std::size_t echo_words_;
};

// Test/instrumentation adapter around an arbitrary callable.
class CallableProvider final : public LLMProvider {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit CallableProvider(std::string name, Fn fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}

  const std::string& name() const override { return name_; }
  std::string complete_once(const ChatRequest& request) override {
    return fn_(request);
  }

 private:
  std::string name_;
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Concurrency guard
// ---------------------------------------------------------------------------

// Central in-flight limiter. Single-flight providers get capacity 1.
class ProviderLimiter {
 public:
  explicit ProviderLimiter(std::size_t max_in_flight);

  class Ticket {
   public:
    explicit Ticket(ProviderLimiter& limiter) : limiter_(limiter) {
      limiter_.sem_.acquire();
    }
    ~Ticket() { limiter_.sem_.release(); }
    Ticket(const Ticket&) = delete;
    Ticket& operator=(const Ticket&) = delete;

   private:
    ProviderLimiter& limiter_;
  };

  Ticket acquire() { return Ticket(*this); }

 private:
  std::counting_semaphore<256> sem_;
};

}  // namespace mia
