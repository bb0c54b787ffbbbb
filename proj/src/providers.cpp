#include "mia/providers.hpp"

#include <chrono>
#include <sstream>
#include <thread>

#include "mia/error.hpp"
#include "mia/log.hpp"

namespace mia {

namespace {

std::string first_words(std::string_view text, std::size_t n) {
  std::istringstream in{std::string(text)};
  std::string word, out;
  std::size_t count = 0;
  while (count < n && in >> word) {
    if (count) out += ' ';
    out += word;
    ++count;
  }
  return out;
}

std::string_view between(std::string_view text, std::string_view open,
                         std::string_view close) {
  auto a = text.find(open);
  if (a == std::string_view::npos) return {};
  a += open.size();
  auto b = text.find(close, a);
  if (b == std::string_view::npos) return {};
  return text.substr(a, b - a);
}

std::string_view line_after(std::string_view text, std::string_view marker) {
  auto a = text.find(marker);
  if (a == std::string_view::npos) return {};
  a += marker.size();
  auto b = text.find('\n', a);
  auto line = text.substr(a, b == std::string_view::npos ? b : b - a);
  // the payload may sit on the following line
  while (!line.empty() && (line.front() == ' ' || line.front() == '\n')) line.remove_prefix(1);
  if (line.empty() && b != std::string_view::npos) {
    auto c = text.find('\n', b + 1);
    line = text.substr(b + 1, c == std::string_view::npos ? c : c - b - 1);
  }
  return line;
}

}  // namespace

std::string EmbeddingProvider::fingerprint() const {
  return name() + "/d" + std::to_string(dim());
}

OfflineHashEmbedder::OfflineHashEmbedder(std::size_t dim)
    : name_("offline-hash"), dim_(dim) {
  if (dim < 8) raise(ErrorCode::InvalidArgument, "offline-hash dim must be >= 8");
}

std::vector<EmbeddingVector> OfflineHashEmbedder::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hash_embed(t, dim_));
  return out;
}

std::string complete(LLMProvider& provider, const ChatRequest& request) {
  const std::size_t token_estimate =
      (request.system.size() + request.user.size()) / 4;
  log_debug("llm call provider=" + provider.name() + " template=" +
            (request.template_id.empty() ? "<none>" : request.template_id) +
            " tokens~" + std::to_string(token_estimate));

  const RetryPolicy& policy = provider.retry_policy;
  int backoff_ms = policy.initial_backoff_ms;
  for (int attempt = 0;; ++attempt) {
    try {
      return provider.complete_once(request);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ProviderFailure || attempt >= policy.max_retries) {
        throw;
      }
      log_warn("provider " + provider.name() + " failed (attempt " +
               std::to_string(attempt + 1) + "), retrying: " + e.what());
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
  }
}

ScriptedProvider::ScriptedProvider(std::vector<std::string> responses)
    : name_("scripted") {
  retry_policy.max_retries = 0;  // replaying a queue: a miss is not transient
  for (auto& r : responses) queue_.push_back(std::move(r));
}

std::string ScriptedProvider::complete_once(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  calls_.push_back(request);
  if (queue_.empty()) {
    raise(ErrorCode::ProviderFailure, "scripted response queue exhausted");
  }
  std::string out = std::move(queue_.front());
  queue_.pop_front();
  return out;
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

OfflineResponder::OfflineResponder(std::size_t echo_words)
    : name_("offline"), echo_words_(echo_words) {
  retry_policy.max_retries = 0;
}

std::string OfflineResponder::complete_once(const ChatRequest& request) {
  const std::string& tid = request.template_id;
  if (tid == "session_summary") {
    auto raw = between(request.user, "<Raw_Text>", "</Raw_Text>");
    return first_words(raw.empty() ? std::string_view(request.user) : raw,
                       echo_words_);
  }
  if (tid == "update") {
    auto question = line_after(request.user, "Question:");
    return "<evidence_memory>\n- reviewed passages for: " +
           first_words(question, 10) +
           "\n</evidence_memory>\n<confidence>HIGH</confidence>\n"
           "<thought>offline responder always answers</thought>\n"
           "<action>ANSWER</action>\n";
  }
  if (tid == "answer_detective") {
    return R"({"answer":"A","reasoning":"offline deterministic responder"})";
  }
  if (tid == "answer_claim") {
    return "<explanation>offline deterministic responder</explanation>\n"
           "<answer>TRUE</answer>";
  }
  if (tid == "answer_open_qa") {
    auto question = line_after(request.user, "Question:");
    return first_words(question, 6);
  }
  return first_words(request.user, echo_words_);
}

ProviderLimiter::ProviderLimiter(std::size_t max_in_flight)
    : sem_(static_cast<std::ptrdiff_t>(
          max_in_flight == 0 ? 1 : (max_in_flight > 256 ? 256 : max_in_flight))) {}

}  // namespace mia
