#pragma once

// In-process OpenAI-compatible endpoint for tests. Replies are produced by a
// responder callback; a queue of forced statuses can be injected first.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"

#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

namespace qp_test {

class MockLlmServer {
 public:
  using Responder = std::function<std::string(const std::string& system, const std::string& user)>;

  explicit MockLlmServer(Responder responder) : responder_(std::move(responder)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockLlmServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  /// Statuses returned (with an error body) before normal replies resume.
  /// A status of 0 returns 200 with an unparseable body.
  void push_failures(std::initializer_list<int> statuses) {
    std::lock_guard<std::mutex> lock(mu_);
    failures_.insert(failures_.end(), statuses);
  }

  std::size_t hits() const {
    std::lock_guard<std::mutex> lock(mu_);
    return hits_;
  }
  std::string last_authorization() const {
    std::lock_guard<std::mutex> lock(mu_);
    return last_auth_;
  }
  nlohmann::json last_body() const {
    std::lock_guard<std::mutex> lock(mu_);
    return last_body_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    std::optional<int> forced;
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++hits_;
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = nlohmann::json::parse(req.body, nullptr, false);
      if (!failures_.empty()) {
        forced = failures_.front();
        failures_.pop_front();
      }
    }
    if (forced) {
      if (*forced == 0) {
        res.status = 200;
        res.set_content("{not json", "application/json");
      } else {
        res.status = *forced;
        res.set_content(R"({"error":{"message":"forced"}})", "application/json");
      }
      return;
    }
    const auto body = nlohmann::json::parse(req.body);
    const std::string system = body["messages"][0]["content"];
    const std::string user = body["messages"][1]["content"];
    const std::string reply = responder_(system, user);
    nlohmann::json out = {
        {"id", "mock"},
        {"object", "chat.completion"},
        {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply}}}, {"finish_reason", "stop"}}}},
        {"usage",
         {{"prompt_tokens", (system.size() + user.size()) / 4 + 1},
          {"completion_tokens", reply.size() / 4 + 1},
          {"total_tokens", (system.size() + user.size()) / 4 + reply.size() / 4 + 2}}},
    };
    res.set_content(out.dump(), "application/json");
  }

  Responder responder_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mu_;
  std::deque<int> failures_;
  std::size_t hits_ = 0;
  std::string last_auth_;
  nlohmann::json last_body_;
};

}  // namespace qp_test
