#pragma once

// Metered transition oracle. Every distinct (state, action) evaluation costs
// one world-model query (WMQ); repeats are served from the cache for free.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "queryplan/pddl.hpp"

namespace queryplan {

inline constexpr std::size_t kDefaultBudget = 20;

/// budget == 0 means unlimited.
struct QueryLedger {
  std::size_t budget = kDefaultBudget;
  std::size_t used = 0;
  std::size_t cache_hits = 0;

  bool unlimited() const noexcept { return budget == 0; }
  bool exhausted() const noexcept { return !unlimited() && used >= budget; }
};

class BudgetExhausted : public std::runtime_error {
 public:
  explicit BudgetExhausted(std::size_t budget);
};

enum class ErrorKind { InvalidAction, UnknownAction, GoalNotReached, BudgetExhausted };

const char* to_string(ErrorKind kind);

struct ErrorFeedback {
  ErrorKind kind = ErrorKind::InvalidAction;
  std::optional<std::size_t> action_index;  // 0-based position in the plan
  std::string detail;

  bool operator==(const ErrorFeedback&) const = default;
};

// Fixed feedback wording. Step numbers in text are 1-based.
std::string invalid_action_text(const std::string& action_name,
                                std::optional<std::size_t> step_number,
                                const std::string& missing_atoms);
std::string unknown_action_text(const std::string& text);
std::string goal_not_reached_text(const std::string& missing_goal_atoms);
std::string budget_exhausted_text(std::size_t step_number, std::size_t budget);

ErrorFeedback unknown_action_feedback(const std::string& text);

struct StepResult {
  std::optional<State> next_state;
  std::optional<ErrorFeedback> error;
  bool charged = false;

  bool ok() const noexcept { return next_state.has_value(); }
};

struct VerificationResult {
  std::vector<State> states;       // s0, s1, ... (states.size() == actions.size() + 1)
  std::vector<ActionId> actions;   // executed prefix
  bool reached_goal = false;
  std::optional<ErrorFeedback> error;
  std::size_t new_queries = 0;
  bool budget_exhausted = false;
};

class WorldModel {
 public:
  WorldModel(const Task& task, std::size_t budget = kDefaultBudget);

  /// Throws BudgetExhausted when the pair is uncached and no budget remains.
  StepResult step(const State& s, ActionId a,
                  std::optional<std::size_t> step_number = std::nullopt);

  /// Rolls `plan` out from `s0`; cached prefixes and goal checks are free.
  VerificationResult verify_plan(const State& s0, std::span<const ActionId> plan,
                                 std::span<const AtomId> goal);

  /// Free goal test on an already obtained state.
  bool reached_goal(const State& s) const { return satisfies_goal(s, task_->goal()); }

  bool is_cached(const State& s, ActionId a) const;

  const QueryLedger& ledger() const noexcept { return ledger_; }
  std::size_t distinct_queries() const noexcept { return cache_.size(); }
  const Task& task() const noexcept { return *task_; }

  /// Same task, empty cache, unlimited budget.
  WorldModel fresh_unlimited() const { return WorldModel(*task_, 0); }

 private:
  struct Key {
    AtomSet atoms;
    ActionId action;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  struct Outcome {
    std::optional<State> next;
    AtomSet missing;
  };

  StepResult render(const Outcome& o, ActionId a, std::optional<std::size_t> step_number,
                    bool charged) const;

  const Task* task_;
  QueryLedger ledger_;
  std::unordered_map<Key, Outcome, KeyHash> cache_;
};

}  // namespace queryplan
