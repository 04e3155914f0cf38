#pragma once

// Decision-policy contracts consumed by every planner, plus the LLM-free
// implementations: BFS oracle, scripted replay and seeded random.

#include <compare>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "queryplan/pddl.hpp"
#include "queryplan/random.hpp"
#include "queryplan/world_model.hpp"

namespace queryplan {

class PolicyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Ratings

enum class RatingValue : int { Impossible = 0, Maybe = 1, Certain = 2 };

struct Rating {
  RatingValue value = RatingValue::Maybe;
  std::string raw_label;  // sure / maybe / impossible as emitted

  static Rating certain() { return {RatingValue::Certain, "sure"}; }
  static Rating maybe() { return {RatingValue::Maybe, "maybe"}; }
  static Rating impossible() { return {RatingValue::Impossible, "impossible"}; }

  friend bool operator==(const Rating& a, const Rating& b) { return a.value == b.value; }
  friend std::strong_ordering operator<=>(const Rating& a, const Rating& b) {
    return static_cast<int>(a.value) <=> static_cast<int>(b.value);
  }
};

const char* to_string(RatingValue v);
/// sure -> Certain, maybe -> Maybe, impossible -> Impossible (case-insensitive).
std::optional<Rating> rating_from_label(std::string_view label);

// ---------------------------------------------------------------------------
// Context and history

struct WorldContext {
  std::string domain_description;
  std::string action_format_notes;

  /// The block injected into prompts after "Below is a description of the environment:".
  std::string text() const;
};

struct QueryExchange {
  std::size_t state_ref = 0;
  ActionId action = 0;
  StepResult result;
  std::optional<std::size_t> next_ref;
};

struct PlanAttempt {
  std::vector<ActionId> plan;
  VerificationResult verification;
};

struct ReflectionNote {
  std::string text;
};

using HistoryEntry = std::variant<QueryExchange, PlanAttempt, ReflectionNote>;

/// Append-only record of policy/world exchanges. Visited states are numbered
/// 0..n in first-visit order; s0 is state 0.
class InteractionHistory {
 public:
  explicit InteractionHistory(State s0);

  std::size_t visit(const State& s);
  std::optional<std::size_t> find(const State& s) const;
  const State& state(std::size_t ref) const { return visited_.at(ref); }
  const std::vector<State>& visited() const noexcept { return visited_; }

  void append(HistoryEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<HistoryEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  std::vector<State> visited_;
  std::unordered_map<State, std::size_t, StateHash> index_;
  std::vector<HistoryEntry> entries_;
};

// ---------------------------------------------------------------------------
// Requests

struct ProposalRequest {
  State state;
  std::size_t k = 2;
  std::vector<ActionId> valid_actions;
  std::optional<std::string> feedback;
};

enum class PlanStyle { Boomerang, Io, IoCot, IoP, IoCotP };

const char* to_string(PlanStyle style);

struct PlanRequest {
  const State* s0 = nullptr;
  const InteractionHistory* history = nullptr;
  std::vector<ActionId> valid_at_start;
  PlanStyle style = PlanStyle::Boomerang;
};

struct QuerySelection {
  std::size_t state_ref = 0;
  ActionId action = 0;
};

struct PolicyStats {
  std::size_t llm_calls = 0;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t malformed_actions = 0;
  bool history_truncated = false;
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::vector<ActionId> propose_actions(const ProposalRequest& req,
                                                const WorldContext& ctx) = 0;
  virtual Rating evaluate_state(const State& s, const AtomSet& goal,
                                const WorldContext& ctx) = 0;
  virtual std::vector<ActionId> generate_plan(const PlanRequest& req,
                                              const WorldContext& ctx) = 0;
  virtual ActionId next_action(const State& s, const WorldContext& ctx,
                               const InteractionHistory& h) = 0;
  virtual QuerySelection select_query(const WorldContext& ctx,
                                      const InteractionHistory& h) = 0;

  /// Lesson drawn from a failed episode; non-LLM policies echo the feedback.
  virtual std::string reflect(const WorldContext& ctx, const InteractionHistory& h,
                              const std::string& feedback) {
    (void)ctx;
    (void)h;
    return feedback;
  }

  virtual PolicyStats stats() const { return {}; }
};

// ---------------------------------------------------------------------------
// BFS oracle

inline constexpr std::size_t kDefaultOracleStateCap = 200'000;

/// Exact distance-to-goal over the uncharged transition graph, explored lazily
/// from every state it is asked about.
class DistanceOracle {
 public:
  explicit DistanceOracle(const Task& task, std::size_t state_cap = kDefaultOracleStateCap);

  /// nullopt when the goal is unreachable from `s`. Throws PolicyFailure if
  /// the explored space exceeds the state cap.
  std::optional<std::size_t> distance(const State& s);

  /// Applicable action on a shortest path from `s`, lowest id on ties.
  std::optional<ActionId> best_action(const State& s);

  std::size_t explored() const noexcept { return states_.size(); }

 private:
  std::size_t intern(const State& s);
  void explore_from(std::size_t root);
  void recompute();

  static constexpr std::size_t kUnreachable = static_cast<std::size_t>(-1);

  const Task* task_;
  std::size_t cap_;
  std::vector<State> states_;
  std::unordered_map<State, std::size_t, StateHash> index_;
  std::vector<std::vector<std::pair<ActionId, std::size_t>>> successors_;
  std::vector<bool> expanded_;
  std::vector<std::size_t> dist_;
  bool dirty_ = true;
};

class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(const Task& task, std::size_t d_sure = 2,
                        std::size_t state_cap = kDefaultOracleStateCap);

  std::vector<ActionId> propose_actions(const ProposalRequest& req,
                                        const WorldContext& ctx) override;
  Rating evaluate_state(const State& s, const AtomSet& goal, const WorldContext& ctx) override;
  std::vector<ActionId> generate_plan(const PlanRequest& req, const WorldContext& ctx) override;
  ActionId next_action(const State& s, const WorldContext& ctx,
                       const InteractionHistory& h) override;
  QuerySelection select_query(const WorldContext& ctx, const InteractionHistory& h) override;

  DistanceOracle& oracle() noexcept { return oracle_; }

 private:
  const Task* task_;
  std::size_t d_sure_;
  DistanceOracle oracle_;
};

// ---------------------------------------------------------------------------
// Scripted replay

struct PolicyScript {
  std::vector<std::vector<std::string>> proposals;
  std::vector<std::string> ratings;                       // consumed in order
  std::unordered_map<std::string, std::string> rating_by_state;  // canonical key -> label
  std::string default_rating;                             // used when both are exhausted
  std::vector<std::vector<std::string>> plans;
  std::vector<std::string> actions;
  std::vector<std::pair<std::size_t, std::string>> selections;
};

/// Returns recorded decisions in order; running off the end of any stream is a
/// PolicyFailure.
class ScriptedPolicy final : public Policy {
 public:
  ScriptedPolicy(const Task& task, PolicyScript script);

  std::vector<ActionId> propose_actions(const ProposalRequest& req,
                                        const WorldContext& ctx) override;
  Rating evaluate_state(const State& s, const AtomSet& goal, const WorldContext& ctx) override;
  std::vector<ActionId> generate_plan(const PlanRequest& req, const WorldContext& ctx) override;
  ActionId next_action(const State& s, const WorldContext& ctx,
                       const InteractionHistory& h) override;
  QuerySelection select_query(const WorldContext& ctx, const InteractionHistory& h) override;

 private:
  ActionId resolve(const std::string& text) const;

  const Task* task_;
  PolicyScript script_;
  std::size_t proposal_cursor_ = 0;
  std::size_t rating_cursor_ = 0;
  std::size_t plan_cursor_ = 0;
  std::size_t action_cursor_ = 0;
  std::size_t selection_cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Seeded random

class RandomPolicy final : public Policy {
 public:
  RandomPolicy(const Task& task, std::uint64_t seed, std::size_t max_plan_length = 10);

  std::vector<ActionId> propose_actions(const ProposalRequest& req,
                                        const WorldContext& ctx) override;
  Rating evaluate_state(const State& s, const AtomSet& goal, const WorldContext& ctx) override;
  std::vector<ActionId> generate_plan(const PlanRequest& req, const WorldContext& ctx) override;
  ActionId next_action(const State& s, const WorldContext& ctx,
                       const InteractionHistory& h) override;
  QuerySelection select_query(const WorldContext& ctx, const InteractionHistory& h) override;

 private:
  const Task* task_;
  Rng rng_;
  std::size_t max_plan_length_;
};

}  // namespace queryplan
