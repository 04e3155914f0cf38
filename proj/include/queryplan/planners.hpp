#pragma once

// Budget-aware planning loops over a Policy and a metered WorldModel:
// ToI-BFS (beam), ToI-DFS (stack), Boomerang, ReAct, ReAct-Select, the
// single-shot IO family and ReAct with reflection on cycles.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "queryplan/policy.hpp"
#include "queryplan/world_model.hpp"

namespace queryplan {

enum class FailureReason {
  BudgetExhausted,
  StepLimit,
  PolicyFailure,
  Unsolvable,
  InvalidActions,  // single-shot plan hit an inapplicable or unknown action
  SearchFailure,   // single-shot plan was valid but missed the goal
};

const char* to_string(FailureReason r);
std::optional<FailureReason> failure_reason_from_string(std::string_view s);

struct PlannerOutcome {
  bool success = false;
  std::optional<std::vector<ActionId>> plan;
  std::size_t wmq_used = 0;
  std::size_t llm_calls = 0;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t malformed_actions = 0;
  bool history_truncated = false;
  std::size_t iterations = 0;
  std::optional<FailureReason> failure_reason;
  std::string detail;  // error text behind a failure, for logs
};

// ---------------------------------------------------------------------------
// Search tree

struct SearchNode {
  State state;
  std::optional<std::size_t> parent;
  std::optional<ActionId> incoming_action;
  std::size_t depth = 0;
  std::optional<Rating> rating;
};

/// Nodes are unique per state: the first node created for a state is the one
/// every later arrival resolves to.
class SearchTree {
 public:
  explicit SearchTree(State root);

  /// Returns (node id, created).
  std::pair<std::size_t, bool> add(State s, std::size_t parent, ActionId action);

  const SearchNode& node(std::size_t id) const { return nodes_.at(id); }
  SearchNode& node(std::size_t id) { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Actions along the parent chain from the root to `id`.
  std::vector<ActionId> backtrack(std::size_t id) const;

 private:
  std::vector<SearchNode> nodes_;
  std::unordered_map<State, std::size_t, StateHash> index_;
};

using StateEvaluator = std::function<Rating(const State&)>;

/// Rates unrated candidates once, drops Impossible and duplicate ids, and
/// keeps the best `b` by (rating desc, depth desc, canonical key asc).
std::vector<std::size_t> update_beam(SearchTree& tree, const std::vector<std::size_t>& candidates,
                                     const StateEvaluator& evaluate, std::size_t b);

/// Test hooks; both are optional.
struct SearchObserver {
  std::function<void(const SearchTree&, const std::vector<std::size_t>& beam)> on_beam;
  std::function<void(const SearchTree&, std::size_t expanded)> on_expand;
};

// ---------------------------------------------------------------------------
// Planners

struct ToiOptions {
  std::size_t T = 20;
  std::size_t k = 2;
  std::size_t b = 2;                    // BFS beam width
  RatingValue v_min = RatingValue::Maybe;  // DFS threshold, inclusive
  SearchObserver observer;
};

PlannerOutcome run_toi_bfs(Policy& policy, WorldModel& world, const WorldContext& ctx,
                           const ToiOptions& opt = {});
PlannerOutcome run_toi_dfs(Policy& policy, WorldModel& world, const WorldContext& ctx,
                           const ToiOptions& opt = {});

PlannerOutcome run_boomerang(Policy& policy, WorldModel& world, const WorldContext& ctx, std::size_t T = 20);

/// T == 0 means twice the world model budget (or 40 when unlimited).
PlannerOutcome run_react(Policy& policy, WorldModel& world, const WorldContext& ctx, std::size_t T = 0);
PlannerOutcome run_react_select(Policy& policy, WorldModel& world, const WorldContext& ctx, std::size_t T = 0);
PlannerOutcome run_reflexion(Policy& policy, WorldModel& world, const WorldContext& ctx, std::size_t T = 0);

/// Style must be one of the IO styles.
PlannerOutcome run_io(Policy& policy, WorldModel& world, const WorldContext& ctx, PlanStyle style);

}  // namespace queryplan
