#pragma once

// ChatClient double that answers from a callback without any transport.

#include <functional>
#include <string>

#include "queryplan/llm.hpp"

namespace qp_test {

class FakeChatClient final : public queryplan::ChatClient {
 public:
  using Responder = std::function<std::string(const queryplan::ChatRequest&)>;

  explicit FakeChatClient(Responder r, std::string model = "fake-model", double temperature = 0.7)
      : responder_(std::move(r)), model_(std::move(model)), temperature_(temperature) {}

  queryplan::ChatExchange complete(const queryplan::ChatRequest& req) override {
    queryplan::ChatExchange e;
    e.run_id = req.run_id;
    e.seq = req.seq;
    e.system = req.system;
    e.user = req.user;
    e.fingerprint = queryplan::request_fingerprint(req.system, req.user, model_, temperature_);
    e.response = responder_(req);
    e.prompt_tokens = (req.system.size() + req.user.size()) / 4 + 1;
    e.completion_tokens = e.response.size() / 4 + 1;
    ++calls;
    return e;
  }
  const std::string& model() const override { return model_; }
  double temperature() const override { return temperature_; }

  std::size_t calls = 0;

 private:
  Responder responder_;
  std::string model_;
  double temperature_;
};

}  // namespace qp_test
