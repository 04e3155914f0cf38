#include "queryplan/world_model.hpp"

#include <algorithm>
#include <iterator>

namespace queryplan {

BudgetExhausted::BudgetExhausted(std::size_t budget)
    : std::runtime_error("world model query budget of " + std::to_string(budget) +
                         " exhausted") {}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidAction: return "InvalidAction";
    case ErrorKind::UnknownAction: return "UnknownAction";
    case ErrorKind::GoalNotReached: return "GoalNotReached";
    case ErrorKind::BudgetExhausted: return "BudgetExhausted";
  }
  return "?";
}

std::string invalid_action_text(const std::string& action_name,
                                std::optional<std::size_t> step_number,
                                const std::string& missing_atoms) {
  std::string out = "invalid action " + action_name;
  if (step_number) out += " at step " + std::to_string(*step_number);
  out += ": unsatisfied precondition(s): " + missing_atoms;
  return out;
}

std::string unknown_action_text(const std::string& text) {
  return "unknown action '" + text + "'";
}

std::string goal_not_reached_text(const std::string& missing_goal_atoms) {
  return "plan executed fully but goal not reached; unsatisfied goal atom(s): " +
         missing_goal_atoms;
}

std::string budget_exhausted_text(std::size_t step_number, std::size_t budget) {
  return "world model query budget exhausted at step " + std::to_string(step_number) +
         " (" + std::to_string(budget) + " queries used)";
}

ErrorFeedback unknown_action_feedback(const std::string& text) {
  return {ErrorKind::UnknownAction, std::nullopt, unknown_action_text(text)};
}

std::size_t WorldModel::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = 1469598103934665603ull ^ k.action;
  h *= 1099511628211ull;
  for (AtomId id : k.atoms) {
    h ^= id;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

WorldModel::WorldModel(const Task& task, std::size_t budget) : task_(&task) {
  ledger_.budget = budget;
}

bool WorldModel::is_cached(const State& s, ActionId a) const {
  return cache_.count(Key{s.atom_set(), a}) != 0u;
}

StepResult WorldModel::render(const Outcome& o, ActionId a,
                              std::optional<std::size_t> step_number, bool charged) const {
  StepResult r;
  r.charged = charged;
  if (o.next) {
    r.next_state = o.next;
  } else {
    const GroundAction& action = task_->action(a);
    ErrorFeedback e;
    e.kind = ErrorKind::InvalidAction;
    if (step_number) e.action_index = *step_number - 1;
    e.detail = invalid_action_text(action.display_name, step_number,
                                   describe_atoms(*task_->problem->atoms, o.missing));
    r.error = std::move(e);
  }
  return r;
}

StepResult WorldModel::step(const State& s, ActionId a, std::optional<std::size_t> step_number) {
  Key key{s.atom_set(), a};
  if (auto it = cache_.find(key); it != cache_.end()) {
    ++ledger_.cache_hits;
    return render(it->second, a, step_number, false);
  }
  if (ledger_.exhausted()) throw BudgetExhausted(ledger_.budget);
  ++ledger_.used;
  Outcome outcome;
  ApplyResult applied = apply_action(s, task_->action(a));
  if (auto* next = std::get_if<State>(&applied)) {
    outcome.next = std::move(*next);
  } else {
    outcome.missing = std::get<Inapplicable>(applied).missing;
  }
  auto [it, inserted] = cache_.emplace(std::move(key), std::move(outcome));
  (void)inserted;
  return render(it->second, a, step_number, true);
}

VerificationResult WorldModel::verify_plan(const State& s0, std::span<const ActionId> plan,
                                           std::span<const AtomId> goal) {
  VerificationResult result;
  result.states.push_back(s0);
  const std::size_t used_before = ledger_.used;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    StepResult r;
    try {
      r = step(result.states.back(), plan[i], i + 1);
    } catch (const BudgetExhausted&) {
      result.budget_exhausted = true;
      result.error = ErrorFeedback{ErrorKind::BudgetExhausted, i,
                                   budget_exhausted_text(i + 1, ledger_.budget)};
      result.new_queries = ledger_.used - used_before;
      return result;
    }
    if (!r.ok()) {
      result.error = std::move(r.error);
      result.new_queries = ledger_.used - used_before;
      return result;
    }
    result.actions.push_back(plan[i]);
    result.states.push_back(std::move(*r.next_state));
  }
  result.new_queries = ledger_.used - used_before;
  const State& last = result.states.back();
  if (satisfies_goal(last, goal)) {
    result.reached_goal = true;
  } else {
    AtomSet missing;
    std::set_difference(goal.begin(), goal.end(), last.atoms().begin(), last.atoms().end(),
                        std::back_inserter(missing));
    result.error = ErrorFeedback{ErrorKind::GoalNotReached, std::nullopt,
                                 goal_not_reached_text(
                                     describe_atoms(*task_->problem->atoms, missing))};
  }
  return result;
}

}  // namespace queryplan
