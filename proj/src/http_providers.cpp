#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mia/engine.hpp"
#include "mia/error.hpp"

namespace mia {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /v1/... (defaults to "/")
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    raise(ErrorCode::ConfigError, "endpoint must include a scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

httplib::Headers auth_headers(const std::string& auth_env) {
  httplib::Headers headers;
  if (!auth_env.empty()) {
    if (const char* token = std::getenv(auth_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  return headers;
}

json post_json(const std::string& endpoint, const std::string& auth_env,
               int timeout_ms, const json& body) {
  const SplitUrl url = split_url(endpoint);
  httplib::Client client(url.base);
  client.set_connection_timeout(0, timeout_ms * 1000);
  client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  auto res = client.Post(url.path, auth_headers(auth_env), body.dump(),
                         "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      raise(ErrorCode::Timeout, "request to " + endpoint + " timed out");
    }
    raise(ErrorCode::ProviderFailure,
          "request to " + endpoint + " failed: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    raise(ErrorCode::ProviderFailure, "HTTP " + std::to_string(res->status) +
                                          " from " + endpoint + ": " + res->body);
  }
  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) {
    raise(ErrorCode::ProviderFailure, "non-JSON reply from " + endpoint);
  }
  return parsed;
}

// Wire format: {"texts": [...]} -> {"vectors": [[...], ...]}
class HttpEmbedder final : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(const ProviderConfig& config)
      : name_("http-embed"), config_(config) {
    if (config.endpoint.empty()) {
      raise(ErrorCode::ConfigError, "http embedding provider needs an endpoint");
    }
    if (config.dim < 1) raise(ErrorCode::ConfigError, "embedding dim must be >= 1");
  }

  const std::string& name() const override { return name_; }
  std::size_t dim() const override { return config_.dim; }

  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size();
         start += config_.batch_size) {
      const std::size_t end = std::min(texts.size(), start + config_.batch_size);
      json body{{"texts", std::vector<std::string>(texts.begin() + start,
                                                   texts.begin() + end)}};
      json reply = post_json(config_.endpoint, config_.auth_env,
                             config_.timeout_ms, body);
      if (!reply.contains("vectors") || !reply["vectors"].is_array() ||
          reply["vectors"].size() != end - start) {
        raise(ErrorCode::ProviderFailure,
              "embedding endpoint returned a malformed vectors array");
      }
      for (const auto& vec : reply["vectors"]) {
        std::vector<double> raw = vec.get<std::vector<double>>();
        if (raw.size() != config_.dim) {
          raise(ErrorCode::ProviderFailure,
                "embedding endpoint returned dim " + std::to_string(raw.size()) +
                    ", expected " + std::to_string(config_.dim));
        }
        out.push_back(normalize(raw));
      }
    }
    return out;
  }

 private:
  std::string name_;
  ProviderConfig config_;
};

// OpenAI-style chat completions: messages array in, choices[0].message out.
class HttpChatProvider final : public LLMProvider {
 public:
  explicit HttpChatProvider(const ProviderConfig& config)
      : name_("http-llm"), config_(config) {
    if (config.endpoint.empty()) {
      raise(ErrorCode::ConfigError, "http llm provider needs an endpoint");
    }
  }

  const std::string& name() const override { return name_; }

  std::string complete_once(const ChatRequest& request) override {
    json messages = json::array();
    if (!request.system.empty()) {
      messages.push_back({{"role", "system"}, {"content", request.system}});
    }
    messages.push_back({{"role", "user"}, {"content", request.user}});
    json body{{"model", config_.model}, {"messages", std::move(messages)}};
    json reply = post_json(config_.endpoint, config_.auth_env,
                           config_.timeout_ms, body);
    try {
      return reply.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const json::exception&) {
      raise(ErrorCode::ProviderFailure,
            "chat endpoint reply has no choices[0].message.content");
    }
  }

 private:
  std::string name_;
  ProviderConfig config_;
};

}  // namespace

std::shared_ptr<EmbeddingProvider> make_http_embedder(const ProviderConfig& config) {
  return std::make_shared<HttpEmbedder>(config);
}

std::shared_ptr<LLMProvider> make_http_llm(const ProviderConfig& config) {
  return std::make_shared<HttpChatProvider>(config);
}

}  // namespace mia
