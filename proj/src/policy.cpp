#include "queryplan/policy.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <limits>

namespace queryplan {

const char* to_string(RatingValue v) {
  switch (v) {
    case RatingValue::Impossible: return "Impossible";
    case RatingValue::Maybe: return "Maybe";
    case RatingValue::Certain: return "Certain";
  }
  return "?";
}

std::optional<Rating> rating_from_label(std::string_view label) {
  std::string l;
  for (char c : label) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (l == "sure" || l == "certain") return Rating{RatingValue::Certain, l};
  if (l == "maybe") return Rating{RatingValue::Maybe, l};
  if (l == "impossible") return Rating{RatingValue::Impossible, l};
  return std::nullopt;
}

const char* to_string(PlanStyle style) {
  switch (style) {
    case PlanStyle::Boomerang: return "boomerang";
    case PlanStyle::Io: return "io";
    case PlanStyle::IoCot: return "io_cot";
    case PlanStyle::IoP: return "io_p";
    case PlanStyle::IoCotP: return "io_cot_p";
  }
  return "?";
}

std::string WorldContext::text() const {
  if (action_format_notes.empty()) return domain_description;
  return domain_description + "\n\n" + action_format_notes;
}

InteractionHistory::InteractionHistory(State s0) { visit(s0); }

std::size_t InteractionHistory::visit(const State& s) {
  auto [it, inserted] = index_.emplace(s, visited_.size());
  if (inserted) visited_.push_back(s);
  return it->second;
}

std::optional<std::size_t> InteractionHistory::find(const State& s) const {
  auto it = index_.find(s);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// DistanceOracle

DistanceOracle::DistanceOracle(const Task& task, std::size_t state_cap)
    : task_(&task), cap_(state_cap) {}

std::size_t DistanceOracle::intern(const State& s) {
  auto [it, inserted] = index_.emplace(s, states_.size());
  if (inserted) {
    if (states_.size() >= cap_) {
      index_.erase(it);
      throw PolicyFailure("oracle state cap of " + std::to_string(cap_) + " exceeded");
    }
    states_.push_back(s);
    successors_.emplace_back();
    expanded_.push_back(false);
    dirty_ = true;
  }
  return it->second;
}

void DistanceOracle::explore_from(std::size_t root) {
  std::deque<std::size_t> frontier{root};
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop_front();
    if (expanded_[i]) continue;
    expanded_[i] = true;
    dirty_ = true;
    for (const auto& a : task_->actions) {
      if (!applicable(states_[i], a)) continue;
      State next = std::get<State>(apply_action(states_[i], a));
      const std::size_t j = intern(next);
      successors_[i].emplace_back(a.id, j);
      if (!expanded_[j]) frontier.push_back(j);
    }
  }
}

void DistanceOracle::recompute() {
  const std::size_t n = states_.size();
  std::vector<std::vector<std::size_t>> predecessors(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [action, j] : successors_[i]) {
      (void)action;
      predecessors[j].push_back(i);
    }
  }
  dist_.assign(n, kUnreachable);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (satisfies_goal(states_[i], task_->goal())) {
      dist_[i] = 0;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t j = queue.front();
    queue.pop_front();
    for (std::size_t i : predecessors[j]) {
      if (dist_[i] == kUnreachable) {
        dist_[i] = dist_[j] + 1;
        queue.push_back(i);
      }
    }
  }
  dirty_ = false;
}

std::optional<std::size_t> DistanceOracle::distance(const State& s) {
  const std::size_t i = intern(s);
  if (!expanded_[i]) explore_from(i);
  if (dirty_) recompute();
  if (dist_[i] == kUnreachable) return std::nullopt;
  return dist_[i];
}

std::optional<ActionId> DistanceOracle::best_action(const State& s) {
  auto d = distance(s);
  if (!d || *d == 0) return std::nullopt;
  const std::size_t i = index_.at(s);
  std::optional<ActionId> best;
  for (const auto& [action, j] : successors_[i]) {
    if (dist_[j] != kUnreachable && dist_[j] + 1 == *d) {
      if (!best || action < *best) best = action;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// OraclePolicy

OraclePolicy::OraclePolicy(const Task& task, std::size_t d_sure, std::size_t state_cap)
    : task_(&task), d_sure_(d_sure), oracle_(task, state_cap) {}

std::vector<ActionId> OraclePolicy::propose_actions(const ProposalRequest& req,
                                                    const WorldContext&) {
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  std::vector<std::pair<std::size_t, ActionId>> scored;
  for (ActionId a : req.valid_actions) {
    ApplyResult r = apply_action(req.state, task_->action(a));
    std::size_t d = kInf;
    if (auto* next = std::get_if<State>(&r)) d = oracle_.distance(*next).value_or(kInf);
    scored.emplace_back(d, a);
  }
  std::sort(scored.begin(), scored.end());
  scored.erase(std::unique(scored.begin(), scored.end(),
                           [](const auto& x, const auto& y) { return x.second == y.second; }),
               scored.end());
  std::vector<ActionId> out;
  for (const auto& [d, a] : scored) {
    if (out.size() >= req.k) break;
    (void)d;
    out.push_back(a);
  }
  return out;
}

Rating OraclePolicy::evaluate_state(const State& s, const AtomSet&, const WorldContext&) {
  auto d = oracle_.distance(s);
  if (!d) return Rating::impossible();
  if (*d <= d_sure_) return Rating::certain();
  return Rating::maybe();
}

std::vector<ActionId> OraclePolicy::generate_plan(const PlanRequest& req, const WorldContext&) {
  std::vector<ActionId> plan;
  State s = *req.s0;
  auto d = oracle_.distance(s);
  if (!d) throw PolicyFailure("oracle: goal unreachable from the start state");
  if (*d == 0) throw PolicyFailure("oracle: empty plan (start state already satisfies the goal)");
  while (auto a = oracle_.best_action(s)) {
    plan.push_back(*a);
    s = std::get<State>(apply_action(s, task_->action(*a)));
  }
  return plan;
}

ActionId OraclePolicy::next_action(const State& s, const WorldContext&,
                                   const InteractionHistory&) {
  auto a = oracle_.best_action(s);
  if (!a) throw PolicyFailure("oracle: no action leads toward the goal from this state");
  return *a;
}

QuerySelection OraclePolicy::select_query(const WorldContext&, const InteractionHistory& h) {
  std::optional<std::pair<std::size_t, std::size_t>> best;  // (distance, ref)
  for (std::size_t ref = 0; ref < h.visited().size(); ++ref) {
    auto d = oracle_.distance(h.state(ref));
    if (!d || *d == 0) continue;
    if (!best || *d < best->first) best = std::make_pair(*d, ref);
  }
  if (!best) throw PolicyFailure("oracle: no visited state can reach the goal");
  return {best->second, *oracle_.best_action(h.state(best->second))};
}

// ---------------------------------------------------------------------------
// ScriptedPolicy

ScriptedPolicy::ScriptedPolicy(const Task& task, PolicyScript script)
    : task_(&task), script_(std::move(script)) {}

ActionId ScriptedPolicy::resolve(const std::string& text) const {
  try {
    return parse_action_string(text, *task_);
  } catch (const UnknownAction& e) {
    throw PolicyFailure(std::string("script: ") + e.what());
  }
}

std::vector<ActionId> ScriptedPolicy::propose_actions(const ProposalRequest& req,
                                                      const WorldContext&) {
  if (proposal_cursor_ >= script_.proposals.size()) {
    throw PolicyFailure("script: proposals exhausted");
  }
  std::vector<ActionId> out;
  for (const auto& text : script_.proposals[proposal_cursor_++]) {
    const ActionId a = resolve(text);
    const bool valid = std::find(req.valid_actions.begin(), req.valid_actions.end(), a) !=
                       req.valid_actions.end();
    if (valid && std::find(out.begin(), out.end(), a) == out.end() && out.size() < req.k) {
      out.push_back(a);
    }
  }
  return out;
}

Rating ScriptedPolicy::evaluate_state(const State& s, const AtomSet&, const WorldContext&) {
  std::string label;
  if (auto it = script_.rating_by_state.find(s.canonical_key()); it != script_.rating_by_state.end()) {
    label = it->second;
  } else if (rating_cursor_ < script_.ratings.size()) {
    label = script_.ratings[rating_cursor_++];
  } else if (!script_.default_rating.empty()) {
    label = script_.default_rating;
  } else {
    throw PolicyFailure("script: ratings exhausted");
  }
  auto r = rating_from_label(label);
  if (!r) throw PolicyFailure("script: bad rating label '" + label + "'");
  return *r;
}

std::vector<ActionId> ScriptedPolicy::generate_plan(const PlanRequest&, const WorldContext&) {
  if (plan_cursor_ >= script_.plans.size()) throw PolicyFailure("script: plans exhausted");
  std::vector<ActionId> plan;
  for (const auto& text : script_.plans[plan_cursor_++]) plan.push_back(resolve(text));
  if (plan.empty()) throw PolicyFailure("script: empty plan");
  return plan;
}

ActionId ScriptedPolicy::next_action(const State&, const WorldContext&, const InteractionHistory&) {
  if (action_cursor_ >= script_.actions.size()) throw PolicyFailure("script: actions exhausted");
  return resolve(script_.actions[action_cursor_++]);
}

QuerySelection ScriptedPolicy::select_query(const WorldContext&, const InteractionHistory& h) {
  if (selection_cursor_ >= script_.selections.size()) {
    throw PolicyFailure("script: selections exhausted");
  }
  const auto& [ref, text] = script_.selections[selection_cursor_++];
  if (ref >= h.visited().size()) {
    throw PolicyFailure("script: state index " + std::to_string(ref) + " out of range");
  }
  return {ref, resolve(text)};
}

// ---------------------------------------------------------------------------
// RandomPolicy

RandomPolicy::RandomPolicy(const Task& task, std::uint64_t seed, std::size_t max_plan_length)
    : task_(&task), rng_(seed), max_plan_length_(std::max<std::size_t>(1, max_plan_length)) {}

std::vector<ActionId> RandomPolicy::propose_actions(const ProposalRequest& req,
                                                    const WorldContext&) {
  std::vector<ActionId> pool = req.valid_actions;
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  shuffle_in_place(rng_, pool);
  if (pool.size() > req.k) pool.resize(req.k);
  return pool;
}

Rating RandomPolicy::evaluate_state(const State&, const AtomSet&, const WorldContext&) {
  switch (uniform_below(rng_, 3)) {
    case 0: return Rating::impossible();
    case 1: return Rating::maybe();
    default: return Rating::certain();
  }
}

std::vector<ActionId> RandomPolicy::generate_plan(const PlanRequest& req, const WorldContext&) {
  const std::size_t length = 1 + uniform_below(rng_, max_plan_length_);
  std::vector<ActionId> plan;
  State s = *req.s0;
  for (std::size_t i = 0; i < length; ++i) {
    auto valid = applicable_actions(*task_, s);
    if (valid.empty()) break;
    const ActionId a = valid[uniform_below(rng_, valid.size())];
    plan.push_back(a);
    s = std::get<State>(apply_action(s, task_->action(a)));
  }
  if (plan.empty()) throw PolicyFailure("random: no applicable action at the start state");
  return plan;
}

ActionId RandomPolicy::next_action(const State&, const WorldContext&, const InteractionHistory&) {
  if (task_->actions.empty()) throw PolicyFailure("random: empty ground set");
  return static_cast<ActionId>(uniform_below(rng_, task_->actions.size()));
}

QuerySelection RandomPolicy::select_query(const WorldContext&, const InteractionHistory& h) {
  if (task_->actions.empty()) throw PolicyFailure("random: empty ground set");
  const std::size_t ref = uniform_below(rng_, h.visited().size());
  return {ref, static_cast<ActionId>(uniform_below(rng_, task_->actions.size()))};
}

}  // namespace queryplan
