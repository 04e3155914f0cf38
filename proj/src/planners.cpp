#include "queryplan/planners.hpp"

#include <algorithm>
#include <stdexcept>

namespace queryplan {

const char* to_string(FailureReason r) {
  switch (r) {
    case FailureReason::BudgetExhausted: return "BudgetExhausted";
    case FailureReason::StepLimit: return "StepLimit";
    case FailureReason::PolicyFailure: return "PolicyFailure";
    case FailureReason::Unsolvable: return "Unsolvable";
    case FailureReason::InvalidActions: return "InvalidActions";
    case FailureReason::SearchFailure: return "SearchFailure";
  }
  return "?";
}

std::optional<FailureReason> failure_reason_from_string(std::string_view s) {
  for (auto r : {FailureReason::BudgetExhausted, FailureReason::StepLimit, FailureReason::PolicyFailure,
                 FailureReason::Unsolvable, FailureReason::InvalidActions, FailureReason::SearchFailure}) {
    if (s == to_string(r)) return r;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Search tree

SearchTree::SearchTree(State root) {
  index_.emplace(root, 0);
  nodes_.push_back(SearchNode{std::move(root), std::nullopt, std::nullopt, 0, std::nullopt});
}

std::pair<std::size_t, bool> SearchTree::add(State s, std::size_t parent, ActionId action) {
  if (auto it = index_.find(s); it != index_.end()) return {it->second, false};
  const std::size_t id = nodes_.size();
  const std::size_t depth = nodes_.at(parent).depth + 1;
  index_.emplace(s, id);
  nodes_.push_back(SearchNode{std::move(s), parent, action, depth, std::nullopt});
  return {id, true};
}

std::vector<ActionId> SearchTree::backtrack(std::size_t id) const {
  std::vector<ActionId> out;
  for (const SearchNode* n = &nodes_.at(id); n->parent; n = &nodes_.at(*n->parent)) {
    out.push_back(*n->incoming_action);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> update_beam(SearchTree& tree, const std::vector<std::size_t>& candidates,
                                     const StateEvaluator& evaluate, std::size_t b) {
  std::vector<std::size_t> pool;
  for (std::size_t id : candidates) {
    if (std::find(pool.begin(), pool.end(), id) != pool.end()) continue;
    SearchNode& n = tree.node(id);
    if (!n.rating) n.rating = evaluate(n.state);
    if (n.rating->value == RatingValue::Impossible) continue;
    pool.push_back(id);
  }
  std::vector<std::string> keys(tree.size());
  for (std::size_t id : pool) keys[id] = tree.node(id).state.canonical_key();
  std::stable_sort(pool.begin(), pool.end(), [&](std::size_t x, std::size_t y) {
    const SearchNode& a = tree.node(x);
    const SearchNode& c = tree.node(y);
    if (a.rating->value != c.rating->value) return a.rating->value > c.rating->value;
    if (a.depth != c.depth) return a.depth > c.depth;
    return keys[x] < keys[y];
  });
  if (pool.size() > b) pool.resize(b);
  return pool;
}

// ---------------------------------------------------------------------------
// Shared run bookkeeping

namespace {

std::size_t default_steps(const WorldModel& world) {
  const std::size_t budget = world.ledger().budget;
  return budget == 0 ? 2 * kDefaultBudget : 2 * budget;
}

class Run {
 public:
  Run(Policy& policy, WorldModel& world) : policy_(policy), world_(world), before_(policy.stats()) {}

  PlannerOutcome succeed(std::vector<ActionId> plan) {
    // Every success must re-verify from cache alone.
    const Task& task = world_.task();
    VerificationResult v = world_.verify_plan(task.init(), plan, task.goal());
    if (!v.reached_goal || v.new_queries != 0) {
      throw std::logic_error("planner returned a plan that does not re-verify from cached queries");
    }
    PlannerOutcome o = base();
    o.success = true;
    o.plan = std::move(plan);
    return o;
  }

  PlannerOutcome fail(FailureReason reason, std::string detail = {}) {
    PlannerOutcome o = base();
    o.failure_reason = reason;
    o.detail = std::move(detail);
    return o;
  }

  std::size_t iterations = 0;

 private:
  PlannerOutcome base() const {
    const PolicyStats after = policy_.stats();
    PlannerOutcome o;
    o.wmq_used = world_.ledger().used;
    o.llm_calls = after.llm_calls - before_.llm_calls;
    o.prompt_tokens = after.prompt_tokens - before_.prompt_tokens;
    o.completion_tokens = after.completion_tokens - before_.completion_tokens;
    o.malformed_actions = after.malformed_actions - before_.malformed_actions;
    o.history_truncated = after.history_truncated;
    o.iterations = iterations;
    return o;
  }

  Policy& policy_;
  WorldModel& world_;
  PolicyStats before_;
};

// Runs `body`, mapping the exceptions every planner shares onto failures.
template <typename Body>
PlannerOutcome guarded(Run& run, Body body) {
  try {
    return body();
  } catch (const BudgetExhausted& e) {
    return run.fail(FailureReason::BudgetExhausted, e.what());
  } catch (const PolicyFailure& e) {
    return run.fail(FailureReason::PolicyFailure, e.what());
  }
}

// Expands `id` through the world model: propose, then step every proposal.
// Returns the ids of children reached, in proposal order.
std::vector<std::size_t> expand(SearchTree& tree, std::size_t id, Policy& policy, WorldModel& world,
                                const WorldContext& ctx, std::size_t k) {
  const Task& task = world.task();
  const State s = tree.node(id).state;
  std::vector<ActionId> valid = applicable_actions(task, s);
  if (valid.empty()) return {};
  std::vector<ActionId> proposed = policy.propose_actions(ProposalRequest{s, k, valid, std::nullopt}, ctx);
  std::vector<std::size_t> children;
  for (ActionId a : proposed) {
    StepResult r = world.step(s, a);
    if (!r.ok()) continue;
    children.push_back(tree.add(std::move(*r.next_state), id, a).first);
  }
  return children;
}

}  // namespace

// ---------------------------------------------------------------------------
// ToI

PlannerOutcome run_toi_bfs(Policy& policy, WorldModel& world, const WorldContext& ctx, const ToiOptions& opt) {
  if (opt.T == 0 || opt.k == 0 || opt.b == 0) throw std::invalid_argument("ToI-BFS needs T, k, b >= 1");
  Run run(policy, world);
  const Task& task = world.task();
  if (world.reached_goal(task.init())) return run.succeed({});
  return guarded(run, [&]() -> PlannerOutcome {
    SearchTree tree(task.init());
    std::unordered_map<std::string, Rating> ratings;
    StateEvaluator evaluate = [&](const State& s) {
      auto key = s.canonical_key();
      if (auto it = ratings.find(key); it != ratings.end()) return it->second;
      Rating r = policy.evaluate_state(s, task.goal(), ctx);
      ratings.emplace(std::move(key), r);
      return r;
    };
    std::vector<std::size_t> beam = {0};
    for (std::size_t t = 1; t <= opt.T; ++t) {
      run.iterations = t;
      std::vector<std::size_t> expansions;
      for (std::size_t id : beam) {
        if (opt.observer.on_expand) opt.observer.on_expand(tree, id);
        auto children = expand(tree, id, policy, world, ctx, opt.k);
        for (std::size_t c : children) {
          if (world.reached_goal(tree.node(c).state)) return run.succeed(tree.backtrack(c));
        }
        expansions.insert(expansions.end(), children.begin(), children.end());
      }
      std::vector<std::size_t> candidates = beam;
      candidates.insert(candidates.end(), expansions.begin(), expansions.end());
      beam = update_beam(tree, candidates, evaluate, opt.b);
      if (opt.observer.on_beam) opt.observer.on_beam(tree, beam);
      if (beam.empty()) return run.fail(FailureReason::Unsolvable, "beam is empty");
    }
    return run.fail(FailureReason::StepLimit, "no goal after " + std::to_string(opt.T) + " iterations");
  });
}

PlannerOutcome run_toi_dfs(Policy& policy, WorldModel& world, const WorldContext& ctx, const ToiOptions& opt) {
  if (opt.T == 0 || opt.k == 0) throw std::invalid_argument("ToI-DFS needs T, k >= 1");
  Run run(policy, world);
  const Task& task = world.task();
  if (world.reached_goal(task.init())) return run.succeed({});
  return guarded(run, [&]() -> PlannerOutcome {
    SearchTree tree(task.init());
    std::vector<std::size_t> stack = {0};
    std::vector<bool> seen = {true};
    for (std::size_t t = 1; t <= opt.T; ++t) {
      if (stack.empty()) return run.fail(FailureReason::Unsolvable, "stack is empty");
      run.iterations = t;
      const std::size_t id = stack.back();
      stack.pop_back();
      if (opt.observer.on_expand) opt.observer.on_expand(tree, id);
      auto children = expand(tree, id, policy, world, ctx, opt.k);
      seen.resize(tree.size(), false);
      std::vector<std::size_t> fresh;
      for (std::size_t c : children) {
        if (seen[c]) continue;
        seen[c] = true;
        if (world.reached_goal(tree.node(c).state)) return run.succeed(tree.backtrack(c));
        fresh.push_back(c);
      }
      std::vector<std::size_t> keep;
      for (std::size_t c : fresh) {
        SearchNode& n = tree.node(c);
        n.rating = policy.evaluate_state(n.state, task.goal(), ctx);
        if (n.rating->value >= opt.v_min) keep.push_back(c);
      }
      // Push worst first so the best-rated child is popped next; equal ratings
      // pop in proposal order.
      std::reverse(keep.begin(), keep.end());
      std::stable_sort(keep.begin(), keep.end(), [&](std::size_t x, std::size_t y) {
        return tree.node(x).rating->value < tree.node(y).rating->value;
      });
      stack.insert(stack.end(), keep.begin(), keep.end());
    }
    if (stack.empty()) return run.fail(FailureReason::Unsolvable, "stack is empty");
    return run.fail(FailureReason::StepLimit, "no goal after " + std::to_string(opt.T) + " iterations");
  });
}

// ---------------------------------------------------------------------------
// Boomerang

PlannerOutcome run_boomerang(Policy& policy, WorldModel& world, const WorldContext& ctx, std::size_t T) {
  if (T == 0) throw std::invalid_argument("Boomerang needs T >= 1");
  Run run(policy, world);
  const Task& task = world.task();
  if (world.reached_goal(task.init())) return run.succeed({});
  return guarded(run, [&]() -> PlannerOutcome {
    InteractionHistory history(task.init());
    const std::vector<ActionId> valid = applicable_actions(task, task.init());
    for (std::size_t t = 1; t <= T; ++t) {
      run.iterations = t;
      PlanRequest req{&task.init(), &history, valid, PlanStyle::Boomerang};
      std::vector<ActionId> plan = policy.generate_plan(req, ctx);
      VerificationResult v = world.verify_plan(task.init(), plan, task.goal());
      if (v.reached_goal) return run.succeed(v.actions);
      if (v.budget_exhausted) return run.fail(FailureReason::BudgetExhausted, v.error->detail);
      history.append(PlanAttempt{std::move(plan), std::move(v)});
    }
    return run.fail(FailureReason::StepLimit, "no verified plan after " + std::to_string(T) + " iterations");
  });
}

// ---------------------------------------------------------------------------
// ReAct family

PlannerOutcome run_react(Policy& policy, WorldModel& world, const WorldContext& ctx, std::size_t T) {
  if (T == 0) T = default_steps(world);
  Run run(policy, world);
  const Task& task = world.task();
  if (world.reached_goal(task.init())) return run.succeed({});
  return guarded(run, [&]() -> PlannerOutcome {
    InteractionHistory history(task.init());
    State current = task.init();
    std::size_t current_ref = 0;
    std::vector<ActionId> plan;
    for (std::size_t t = 1; t <= T; ++t) {
      run.iterations = t;
      const ActionId a = policy.next_action(current, ctx, history);
      StepResult r = world.step(current, a);
      if (!r.ok()) {
        history.append(QueryExchange{current_ref, a, std::move(r), std::nullopt});
        continue;
      }
      const std::size_t next_ref = history.visit(*r.next_state);
      current = *r.next_state;
      history.append(QueryExchange{current_ref, a, std::move(r), next_ref});
      current_ref = next_ref;
      plan.push_back(a);
      if (world.reached_goal(current)) return run.succeed(std::move(plan));
    }
    return run.fail(FailureReason::StepLimit, "no goal after " + std::to_string(T) + " steps");
  });
}

PlannerOutcome run_react_select(Policy& policy, WorldModel& world, const WorldContext& ctx, std::size_t T) {
  if (T == 0) T = default_steps(world);
  Run run(policy, world);
  const Task& task = world.task();
  if (world.reached_goal(task.init())) return run.succeed({});
  return guarded(run, [&]() -> PlannerOutcome {
    InteractionHistory history(task.init());
    // parent link of each visited state, recorded on first discovery
    std::vector<std::optional<std::pair<std::size_t, ActionId>>> parent = {std::nullopt};
    for (std::size_t t = 1; t <= T; ++t) {
      run.iterations = t;
      QuerySelection q = policy.select_query(ctx, history);
      if (q.state_ref >= history.visited().size()) {
        throw PolicyFailure("selected state " + std::to_string(q.state_ref) + " was never visited");
      }
      const State from = history.state(q.state_ref);
      StepResult r = world.step(from, q.action);
      if (!r.ok()) {
        history.append(QueryExchange{q.state_ref, q.action, std::move(r), std::nullopt});
        continue;
      }
      const std::size_t before = history.visited().size();
      const std::size_t next_ref = history.visit(*r.next_state);
      if (history.visited().size() > before) parent.emplace_back(std::make_pair(q.state_ref, q.action));
      const bool goal = world.reached_goal(*r.next_state);
      history.append(QueryExchange{q.state_ref, q.action, std::move(r), next_ref});
      if (goal) {
        std::vector<ActionId> plan;
        for (std::size_t ref = next_ref; parent[ref]; ref = parent[ref]->first) plan.push_back(parent[ref]->second);
        std::reverse(plan.begin(), plan.end());
        return run.succeed(std::move(plan));
      }
    }
    return run.fail(FailureReason::StepLimit, "no goal after " + std::to_string(T) + " queries");
  });
}

PlannerOutcome run_reflexion(Policy& policy, WorldModel& world, const WorldContext& ctx, std::size_t T) {
  if (T == 0) T = default_steps(world);
  Run run(policy, world);
  const Task& task = world.task();
  if (world.reached_goal(task.init())) return run.succeed({});
  return guarded(run, [&]() -> PlannerOutcome {
    InteractionHistory history(task.init());
    State current = task.init();
    std::size_t current_ref = 0;
    std::vector<ActionId> plan;
    std::unordered_map<State, std::size_t, StateHash> episode = {{current, 0}};
    for (std::size_t t = 1; t <= T; ++t) {
      run.iterations = t;
      const ActionId a = policy.next_action(current, ctx, history);
      StepResult r = world.step(current, a);
      if (!r.ok()) {
        history.append(QueryExchange{current_ref, a, std::move(r), std::nullopt});
        continue;
      }
      const std::size_t next_ref = history.visit(*r.next_state);
      current = *r.next_state;
      history.append(QueryExchange{current_ref, a, std::move(r), next_ref});
      current_ref = next_ref;
      plan.push_back(a);
      if (world.reached_goal(current)) return run.succeed(std::move(plan));
      if (episode.count(current)) {
        const std::string feedback = "cycling occurred: the state after step " + std::to_string(plan.size()) +
                                     " was already visited after step " + std::to_string(episode.at(current)) +
                                     " (" + current.describe() + "); restarting from the starting state";
        history.append(ReflectionNote{policy.reflect(ctx, history, feedback)});
        current = task.init();
        current_ref = 0;
        plan.clear();
        episode = {{current, 0}};
        continue;
      }
      episode.emplace(current, plan.size());
    }
    return run.fail(FailureReason::StepLimit, "no goal after " + std::to_string(T) + " steps");
  });
}

// ---------------------------------------------------------------------------
// Single shot

PlannerOutcome run_io(Policy& policy, WorldModel& world, const WorldContext& ctx, PlanStyle style) {
  if (style == PlanStyle::Boomerang) throw std::invalid_argument("run_io needs an IO plan style");
  Run run(policy, world);
  const Task& task = world.task();
  if (world.reached_goal(task.init())) return run.succeed({});
  return guarded(run, [&]() -> PlannerOutcome {
    run.iterations = 1;
    InteractionHistory history(task.init());
    PlanRequest req{&task.init(), &history, applicable_actions(task, task.init()), style};
    std::vector<ActionId> plan = policy.generate_plan(req, ctx);
    VerificationResult v = world.verify_plan(task.init(), plan, task.goal());
    if (v.reached_goal) return run.succeed(v.actions);
    const ErrorFeedback& e = *v.error;
    switch (e.kind) {
      case ErrorKind::BudgetExhausted: return run.fail(FailureReason::BudgetExhausted, e.detail);
      case ErrorKind::GoalNotReached: return run.fail(FailureReason::SearchFailure, e.detail);
      default: return run.fail(FailureReason::InvalidActions, e.detail);
    }
  });
}

}  // namespace queryplan
