#pragma once

// Chat-completion clients (live, recording, replay), the per-run session that
// tags and totals exchanges, and the LLM-backed Policy.

#include <chrono>
#include <cstddef>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "queryplan/policy.hpp"
#include "queryplan/prompts.hpp"

namespace queryplan {

class EndpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AuthError : public EndpointError {
 public:
  using EndpointError::EndpointError;
};

class RateLimited : public EndpointError {
 public:
  using EndpointError::EndpointError;
};

class ReplayMiss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kApiKeyEnv = "QUERYPLAN_API_KEY";

struct LlmConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4-turbo";
  double temperature = 0.7;
  std::size_t max_retries = 3;  // total attempts per request
  std::chrono::milliseconds timeout{60'000};
  std::chrono::milliseconds backoff_base{1'000};
  double backoff_factor = 2.0;
  double jitter = 0.2;           // +/- fraction of each delay
  std::string api_key;           // filled from QUERYPLAN_API_KEY when empty

  /// Throws std::invalid_argument when temperature is outside [0, 2].
  void validate() const;
};

/// SHA-256 over system, user, model and temperature (%.3f), hex encoded.
std::string request_fingerprint(const std::string& system, const std::string& user,
                                const std::string& model, double temperature);

struct ChatRequest {
  std::string run_id;
  std::size_t seq = 0;
  std::string system;
  std::string user;
};

struct ChatExchange {
  std::string run_id;
  std::size_t seq = 0;
  std::string fingerprint;
  std::string system;
  std::string user;
  std::string response;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t attempts = 1;  // diagnostics only; not persisted

  bool operator==(const ChatExchange&) const = default;
};

std::string exchange_to_json_line(const ChatExchange& e);
ChatExchange exchange_from_json_line(const std::string& line);
std::vector<ChatExchange> read_transcript(const std::string& path);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatExchange complete(const ChatRequest& req) = 0;
  virtual const std::string& model() const = 0;
  virtual double temperature() const = 0;
};

struct ClientDiagnostics {
  std::size_t requests = 0;
  std::size_t retries = 0;
};

/// OpenAI-compatible `/chat/completions` over HTTP(S). Thread-safe.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(LlmConfig cfg);

  ChatExchange complete(const ChatRequest& req) override;
  const std::string& model() const override { return cfg_.model; }
  double temperature() const override { return cfg_.temperature; }

  ClientDiagnostics diagnostics() const;
  /// Replaces the sleep used between retries (tests).
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper);

 private:
  LlmConfig cfg_;
  mutable std::mutex mu_;
  ClientDiagnostics diag_;
  std::function<void(std::chrono::milliseconds)> sleeper_;
  std::uint64_t jitter_state_ = 0x9e3779b97f4a7c15ull;
};

/// Serves exchanges from a transcript; never touches the network. Lookup is
/// by (run_id, fingerprint), consumed in recorded order.
class ReplayChatClient final : public ChatClient {
 public:
  ReplayChatClient(const std::vector<ChatExchange>& transcript, std::string model, double temperature);
  static std::unique_ptr<ReplayChatClient> from_file(const std::string& path, std::string model,
                                                     double temperature);

  ChatExchange complete(const ChatRequest& req) override;
  const std::string& model() const override { return model_; }
  double temperature() const override { return temperature_; }

 private:
  std::string model_;
  double temperature_;
  std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::deque<ChatExchange>> queues_;
};

/// Forwards to another client and appends every exchange to a JSONL file.
class RecordingChatClient final : public ChatClient {
 public:
  RecordingChatClient(std::shared_ptr<ChatClient> inner, const std::string& path, bool append = false);

  ChatExchange complete(const ChatRequest& req) override;
  const std::string& model() const override { return inner_->model(); }
  double temperature() const override { return inner_->temperature(); }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::mutex mu_;
  std::ofstream out_;
};

/// Per-run view of a client: assigns sequence numbers and keeps totals.
class LlmSession {
 public:
  LlmSession(std::shared_ptr<ChatClient> client, std::string run_id);

  ChatExchange call(const Prompt& prompt);

  const std::string& run_id() const noexcept { return run_id_; }
  std::size_t calls() const noexcept { return calls_; }
  std::size_t prompt_tokens() const noexcept { return prompt_tokens_; }
  std::size_t completion_tokens() const noexcept { return completion_tokens_; }
  const std::vector<ChatExchange>& exchanges() const noexcept { return exchanges_; }

 private:
  std::shared_ptr<ChatClient> client_;
  std::string run_id_;
  std::size_t seq_ = 0;
  std::size_t calls_ = 0;
  std::size_t prompt_tokens_ = 0;
  std::size_t completion_tokens_ = 0;
  std::vector<ChatExchange> exchanges_;
};

struct LlmPolicyOptions {
  std::size_t max_attempts = 3;      // per policy call, for malformed output
  bool translate_states = true;      // false: raw predicate lists, no calls
  std::size_t history_char_cap = 0;  // 0 = unlimited
  std::string in_context_example;
};

class LlmPolicy final : public Policy {
 public:
  LlmPolicy(const Task& task, std::shared_ptr<LlmSession> session, LlmPolicyOptions options = {});

  std::vector<ActionId> propose_actions(const ProposalRequest& req, const WorldContext& ctx) override;
  Rating evaluate_state(const State& s, const AtomSet& goal, const WorldContext& ctx) override;
  std::vector<ActionId> generate_plan(const PlanRequest& req, const WorldContext& ctx) override;
  ActionId next_action(const State& s, const WorldContext& ctx, const InteractionHistory& h) override;
  QuerySelection select_query(const WorldContext& ctx, const InteractionHistory& h) override;
  std::string reflect(const WorldContext& ctx, const InteractionHistory& h,
                      const std::string& feedback) override;
  PolicyStats stats() const override;

  /// Natural-language state description, cached per canonical key.
  std::string state_text(const State& s, const WorldContext& ctx);
  std::string goal_text(const WorldContext& ctx);

  /// Prompt-ready history renderings (exposed for tests).
  std::string render_boomerang_history(const InteractionHistory& h, const WorldContext& ctx);
  std::string render_react_history(const InteractionHistory& h, const WorldContext& ctx);
  std::string render_select_queries(const InteractionHistory& h);
  std::string render_visited(const InteractionHistory& h, const WorldContext& ctx);

 private:
  template <typename T, typename Build, typename Parse>
  T with_retries(Build build, Parse parse);

  std::string apply_cap(std::vector<std::string> blocks, bool drop_oldest);

  const Task* task_;
  std::shared_ptr<LlmSession> session_;
  LlmPolicyOptions options_;
  std::unordered_map<std::string, std::string> state_cache_;
  std::optional<std::string> goal_cache_;
  std::size_t malformed_ = 0;
  bool truncated_ = false;
};

}  // namespace queryplan
