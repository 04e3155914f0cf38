// Live chat-completion transport. Kept apart from the rest of the LLM code so
// the large HTTP header is compiled once.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "json.hpp"
#include "queryplan/llm.hpp"

namespace queryplan {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw EndpointError("base_url needs a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

double next_unit(std::uint64_t& state) {
  // splitmix64
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

}  // namespace

HttpChatClient::HttpChatClient(LlmConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.api_key.empty()) {
    if (const char* key = std::getenv(kApiKeyEnv)) cfg_.api_key = key;
  }
  sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ClientDiagnostics HttpChatClient::diagnostics() const {
  std::lock_guard<std::mutex> lock(mu_);
  return diag_;
}

void HttpChatClient::set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) {
  std::lock_guard<std::mutex> lock(mu_);
  sleeper_ = std::move(sleeper);
}

ChatExchange HttpChatClient::complete(const ChatRequest& req) {
  const Endpoint ep = split_url(cfg_.base_url);
  nlohmann::json body = {
      {"model", cfg_.model},
      {"temperature", cfg_.temperature},
      {"messages",
       {{{"role", "system"}, {"content", req.system}}, {{"role", "user"}, {"content", req.user}}}},
  };
  const std::string payload = body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);

  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  {
    std::lock_guard<std::mutex> lock(mu_);
    ++diag_.requests;
  }
  const std::size_t attempts = std::max<std::size_t>(1, cfg_.max_retries);
  std::string last_error;
  bool last_was_rate_limit = false;
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::function<void(std::chrono::milliseconds)> sleeper;
      double delay;
      {
        std::lock_guard<std::mutex> lock(mu_);
        ++diag_.retries;
        sleeper = sleeper_;
        const double base = static_cast<double>(cfg_.backoff_base.count()) *
                            std::pow(cfg_.backoff_factor, static_cast<double>(attempt - 1));
        delay = base * (1.0 + cfg_.jitter * (2.0 * next_unit(jitter_state_) - 1.0));
      }
      sleeper(std::chrono::milliseconds(static_cast<long long>(std::llround(std::max(0.0, delay)))));
    }

    httplib::Client client(ep.origin);
    const auto secs = cfg_.timeout.count() / 1000;
    const auto usecs = (cfg_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(ep.path + "/chat/completions", headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      last_was_rate_limit = false;
      continue;
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    }
    if (status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      last_was_rate_limit = status == 429;
      continue;
    }
    if (status != 200) {
      throw EndpointError("HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
    }
    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
        doc["choices"].empty()) {
      last_error = "malformed completion body";
      last_was_rate_limit = false;
      continue;
    }
    ChatExchange ex;
    ex.run_id = req.run_id;
    ex.seq = req.seq;
    ex.system = req.system;
    ex.user = req.user;
    ex.fingerprint = request_fingerprint(req.system, req.user, cfg_.model, cfg_.temperature);
    const auto& msg = doc["choices"][0]["message"];
    if (msg.contains("content") && msg["content"].is_string()) ex.response = msg["content"].get<std::string>();
    if (doc.contains("usage") && doc["usage"].is_object()) {
      const auto& u = doc["usage"];
      if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_unsigned()) {
        ex.prompt_tokens = u["prompt_tokens"].get<std::size_t>();
      }
      if (u.contains("completion_tokens") && u["completion_tokens"].is_number_unsigned()) {
        ex.completion_tokens = u["completion_tokens"].get<std::size_t>();
      }
    }
    ex.attempts = attempt + 1;
    return ex;
  }
  const std::string msg = "chat completion failed after " + std::to_string(attempts) + " attempt(s): " + last_error;
  if (last_was_rate_limit) throw RateLimited(msg);
  throw EndpointError(msg);
}

}  // namespace queryplan
