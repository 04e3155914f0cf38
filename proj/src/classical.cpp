#include "queryplan/classical.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <queue>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

namespace queryplan {

const char* to_string(HeuristicKind k) {
  switch (k) {
    case HeuristicKind::GoalCount: return "goal_count";
    case HeuristicKind::HAdd: return "h_add";
    case HeuristicKind::HFF: return "h_ff";
  }
  return "?";
}

std::optional<HeuristicKind> heuristic_from_string(std::string_view s) {
  for (auto k : {HeuristicKind::GoalCount, HeuristicKind::HAdd, HeuristicKind::HFF}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Heuristics

RelaxedHeuristics::RelaxedHeuristics(const Task& task) : task_(&task) {
  achievers_.resize(task.problem->atoms->size());
  for (const auto& a : task.actions) {
    for (AtomId p : a.add) achievers_[p].push_back(a.id);
  }
  by_name_.resize(task.actions.size());
  for (std::size_t i = 0; i < by_name_.size(); ++i) by_name_[i] = static_cast<ActionId>(i);
  std::sort(by_name_.begin(), by_name_.end(),
            [&](ActionId x, ActionId y) { return task.action(x).key < task.action(y).key; });
  name_rank_.resize(by_name_.size());
  for (std::size_t r = 0; r < by_name_.size(); ++r) name_rank_[by_name_[r]] = r;
}

RelaxedHeuristics::Costs RelaxedHeuristics::fixed_point(const State& s) const {
  Costs c;
  c.atom.assign(task_->problem->atoms->size(), kInfinity);
  c.supporter.assign(c.atom.size(), std::nullopt);
  for (AtomId a : s.atoms()) c.atom[a] = 0.0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (ActionId id : by_name_) {
      const GroundAction& a = task_->action(id);
      double cost = 1.0;
      for (AtomId p : a.pre) cost += c.atom[p];
      if (cost == kInfinity) continue;
      for (AtomId q : a.add) {
        auto& sup = c.supporter[q];
        if (cost < c.atom[q]) {
          c.atom[q] = cost;
          sup = id;
          changed = true;
        } else if (cost == c.atom[q] && sup && name_rank_[id] < name_rank_[*sup]) {
          sup = id;
          changed = true;
        }
      }
    }
  }
  return c;
}

double RelaxedHeuristics::goal_count(const State& s) const {
  double n = 0;
  for (AtomId g : task_->goal()) n += s.contains(g) ? 0 : 1;
  return n;
}

double RelaxedHeuristics::h_add(const State& s) const {
  if (satisfies_goal(s, task_->goal())) return 0;
  Costs c = fixed_point(s);
  double h = 0;
  for (AtomId g : task_->goal()) h += c.atom[g];
  return h;
}

std::vector<ActionId> RelaxedHeuristics::relaxed_plan(const State& s) const {
  Costs c = fixed_point(s);
  for (AtomId g : task_->goal()) {
    if (c.atom[g] == kInfinity) return {};
  }
  std::vector<ActionId> plan;
  std::vector<bool> in_plan(task_->actions.size(), false);
  std::vector<bool> done(c.atom.size(), false);
  std::deque<AtomId> open(task_->goal().begin(), task_->goal().end());
  while (!open.empty()) {
    const AtomId q = open.front();
    open.pop_front();
    if (done[q] || c.atom[q] == 0.0) continue;
    done[q] = true;
    const ActionId a = *c.supporter[q];
    if (in_plan[a]) continue;
    in_plan[a] = true;
    plan.push_back(a);
    for (AtomId p : task_->action(a).pre) open.push_back(p);
  }
  return plan;
}

double RelaxedHeuristics::h_ff(const State& s) const {
  if (satisfies_goal(s, task_->goal())) return 0;
  Costs c = fixed_point(s);
  for (AtomId g : task_->goal()) {
    if (c.atom[g] == kInfinity) return kInfinity;
  }
  return static_cast<double>(relaxed_plan(s).size());
}

double RelaxedHeuristics::value(HeuristicKind kind, const State& s) const {
  switch (kind) {
    case HeuristicKind::GoalCount: return goal_count(s);
    case HeuristicKind::HAdd: return h_add(s);
    case HeuristicKind::HFF: return h_ff(s);
  }
  return kInfinity;
}

double heuristic_value(HeuristicKind kind, const Task& task, const State& s) {
  return RelaxedHeuristics(task).value(kind, s);
}

// ---------------------------------------------------------------------------
// Best-first search

PlannerOutcome run_best_first(WorldModel& world, HeuristicKind kind, double w) {
  const Task& task = world.task();
  const bool greedy = w == kGreedy;
  if (!greedy && !(w >= 1.0)) throw std::invalid_argument("best-first weight must be >= 1 or greedy");
  const RelaxedHeuristics heur(task);

  PlannerOutcome out;
  auto finish = [&](std::vector<ActionId> plan) {
    VerificationResult v = world.verify_plan(task.init(), plan, task.goal());
    if (!v.reached_goal || v.new_queries != 0) {
      throw std::logic_error("best-first returned a plan that does not re-verify from cached queries");
    }
    out.success = true;
    out.plan = std::move(plan);
    out.wmq_used = world.ledger().used;
    return out;
  };
  auto fail = [&](FailureReason r, std::string detail) {
    out.failure_reason = r;
    out.detail = std::move(detail);
    out.wmq_used = world.ledger().used;
    return out;
  };

  struct Node {
    State state;
    std::size_t g;
    std::optional<std::size_t> parent;
    ActionId action;
  };
  std::vector<Node> nodes;
  std::unordered_map<State, std::size_t, StateHash> best;  // state -> node with lowest g
  std::unordered_set<State, StateHash> expanded;
  using Entry = std::tuple<double, double, std::size_t>;  // f, h, node
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;

  auto push = [&](Node n, double h) {
    const double f = greedy ? h : static_cast<double>(n.g) + w * h;
    const std::size_t id = nodes.size();
    best[n.state] = id;
    nodes.push_back(std::move(n));
    open.emplace(f, h, id);
  };
  auto plan_to = [&](std::size_t id) {
    std::vector<ActionId> plan;
    for (std::optional<std::size_t> i = id; nodes[*i].parent; i = nodes[*i].parent) plan.push_back(nodes[*i].action);
    std::reverse(plan.begin(), plan.end());
    return plan;
  };

  const double h0 = heur.value(kind, task.init());
  if (h0 == kInfinity) return fail(FailureReason::Unsolvable, "goal unreachable in the delete relaxation");
  push(Node{task.init(), 0, std::nullopt, 0}, h0);
  try {
    while (!open.empty()) {
      const auto [f, h, id] = open.top();
      open.pop();
      (void)f;
      (void)h;
      const State s = nodes[id].state;
      if (best.at(s) != id) continue;  // superseded by a cheaper path
      if (world.reached_goal(s)) return finish(plan_to(id));
      if (!expanded.insert(s).second && !(w == 1.0)) continue;
      ++out.iterations;
      for (ActionId a : applicable_actions(task, s)) {
        StepResult r = world.step(s, a);
        if (!r.ok()) continue;
        const std::size_t g = nodes[id].g + 1;
        auto it = best.find(*r.next_state);
        if (it != best.end()) {
          // Reopen only for A*, and only on a strictly cheaper path.
          if (!(w == 1.0) || g >= nodes[it->second].g) continue;
          expanded.erase(*r.next_state);
        }
        const double hn = heur.value(kind, *r.next_state);
        if (hn == kInfinity) continue;
        push(Node{std::move(*r.next_state), g, id, a}, hn);
      }
    }
  } catch (const BudgetExhausted& e) {
    return fail(FailureReason::BudgetExhausted, e.what());
  }
  return fail(FailureReason::Unsolvable, "open list exhausted");
}

// ---------------------------------------------------------------------------
// Graph world

std::vector<std::vector<std::size_t>> GraphWorld::out_edges() const {
  std::vector<std::vector<std::size_t>> out(vertices);
  for (std::size_t e = 0; e < edges.size(); ++e) out[edges[e].from].push_back(e);
  return out;
}

void GraphWorld::validate() const {
  if (vertices == 0) throw GraphFormatError("graph has no vertices");
  if (source >= vertices || target >= vertices) throw GraphFormatError("source or target out of range");
  for (const auto& e : edges) {
    if (e.from >= vertices || e.to >= vertices) throw GraphFormatError("edge endpoint out of range");
    if (!(e.prior > 0.0 && e.prior <= 1.0)) throw GraphFormatError("edge prior must lie in (0, 1]");
  }
}

GraphWorld parse_graph_world(std::string_view text) {
  GraphWorld g;
  bool have_v = false, have_s = false, have_t = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    auto bad = [&](const std::string& why) { return GraphFormatError("line " + std::to_string(n) + ": " + why); };
    if (word == "vertices") {
      if (!(ls >> g.vertices)) throw bad("expected 'vertices N'");
      have_v = true;
    } else if (word == "source") {
      if (!(ls >> g.source)) throw bad("expected 'source S'");
      have_s = true;
    } else if (word == "target") {
      if (!(ls >> g.target)) throw bad("expected 'target T'");
      have_t = true;
    } else if (word == "edge") {
      GraphEdge e;
      std::string truth;
      if (!(ls >> e.from >> e.to >> truth >> e.prior)) throw bad("expected 'edge FROM TO valid|invalid PRIOR'");
      if (truth == "valid") {
        e.valid = true;
      } else if (truth == "invalid") {
        e.valid = false;
      } else {
        throw bad("edge truth must be 'valid' or 'invalid'");
      }
      g.edges.push_back(e);
    } else {
      throw bad("unknown directive '" + word + "'");
    }
    std::string extra;
    if (ls >> extra) throw bad("trailing text '" + extra + "'");
  }
  if (!have_v || !have_s || !have_t) throw GraphFormatError("graph needs vertices, source and target lines");
  g.validate();
  return g;
}

GraphWorld load_graph_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphFormatError("cannot open graph file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_graph_world(ss.str());
}

std::string write_graph_world(const GraphWorld& g) {
  std::ostringstream out;
  out << "vertices " << g.vertices << "\nsource " << g.source << "\ntarget " << g.target << "\n";
  for (const auto& e : g.edges) {
    out << "edge " << e.from << ' ' << e.to << ' ' << (e.valid ? "valid" : "invalid") << ' ' << e.prior << "\n";
  }
  return out.str();
}

GraphWorld chain_graph(std::size_t n, std::size_t dummies) {
  GraphWorld g;
  g.vertices = n + 1;
  g.source = 0;
  g.target = n;
  for (std::size_t i = 0; i < n; ++i) {
    g.edges.push_back({i, i + 1, true, 1.0});
    for (std::size_t d = 0; d < dummies; ++d) g.edges.push_back({i, g.vertices++, true, 1.0});
  }
  return g;
}

namespace {

// Fewest-hop path as edge ids; edges filtered by `usable`.
std::optional<std::vector<std::size_t>> bfs_path(const GraphWorld& g,
                                                 const std::vector<std::vector<std::size_t>>& out,
                                                 const std::function<bool(std::size_t)>& usable) {
  std::vector<std::optional<std::size_t>> via(g.vertices);
  std::vector<bool> seen(g.vertices, false);
  std::deque<std::size_t> q = {g.source};
  seen[g.source] = true;
  while (!q.empty()) {
    const std::size_t v = q.front();
    q.pop_front();
    if (v == g.target) break;
    for (std::size_t e : out[v]) {
      if (!usable(e) || seen[g.edges[e].to]) continue;
      seen[g.edges[e].to] = true;
      via[g.edges[e].to] = e;
      q.push_back(g.edges[e].to);
    }
  }
  if (!seen[g.target]) return std::nullopt;
  std::vector<std::size_t> path;
  for (std::size_t v = g.target; v != g.source; v = g.edges[*via[v]].from) path.push_back(*via[v]);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<std::size_t> to_vertices(const GraphWorld& g, const std::vector<std::size_t>& edge_path) {
  std::vector<std::size_t> out = {g.source};
  for (std::size_t e : edge_path) out.push_back(g.edges[e].to);
  return out;
}

using Proposer = std::function<std::optional<std::vector<std::size_t>>(const std::vector<EdgeStatus>&, Rng&)>;

LazyResult lazy_loop(const GraphWorld& g, std::size_t T, std::uint64_t seed, const Proposer& propose) {
  if (T == 0) throw std::invalid_argument("lazy search needs T >= 1");
  g.validate();
  const auto out = g.out_edges();
  std::vector<EdgeStatus> status(g.edges.size(), EdgeStatus::Unknown);
  Rng rng(seed);
  LazyResult res;
  for (std::size_t t = 1; t <= T; ++t) {
    auto optimistic = bfs_path(g, out, [&](std::size_t e) { return status[e] != EdgeStatus::KnownInvalid; });
    if (!optimistic) throw NoPathExists("no source-target path remains");
    res.iterations = t;
    auto path = propose(status, rng);
    if (!path) {
      res.trace.delta.push_back(g.vertices - 1);
      continue;
    }
    std::size_t invalid = 0;
    for (std::size_t e : *path) {
      if (status[e] != EdgeStatus::Unknown) continue;  // known edges are free
      ++res.wmq_used;
      status[e] = g.edges[e].valid ? EdgeStatus::KnownValid : EdgeStatus::KnownInvalid;
      invalid += g.edges[e].valid ? 0 : 1;
    }
    res.trace.delta.push_back(invalid);
    if (invalid == 0) {
      res.path = to_vertices(g, *path);
      return res;
    }
  }
  return res;
}

}  // namespace

std::size_t RegretTrace::cumulative() const {
  std::size_t s = 0;
  for (auto d : delta) s += d;
  return s;
}

RegretTrace RegretTrace::padded(std::size_t horizon) const {
  RegretTrace r = *this;
  if (r.delta.size() < horizon) r.delta.resize(horizon, 0);
  return r;
}

LazyResult run_lazysp_psrl(const GraphWorld& g, std::size_t T, std::uint64_t seed) {
  const auto out = g.out_edges();
  return lazy_loop(g, T, seed, [&](const std::vector<EdgeStatus>& status, Rng& rng) {
    std::vector<bool> sampled(g.edges.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      switch (status[e]) {
        case EdgeStatus::KnownValid: sampled[e] = true; break;
        case EdgeStatus::KnownInvalid: sampled[e] = false; break;
        case EdgeStatus::Unknown: sampled[e] = bernoulli(rng, g.edges[e].prior); break;
      }
    }
    return bfs_path(g, out, [&](std::size_t e) { return sampled[e]; });
  });
}

LazyResult run_random_path_proposer(const GraphWorld& g, std::size_t T, std::uint64_t seed) {
  const auto out = g.out_edges();
  return lazy_loop(g, T, seed,
                   [&](const std::vector<EdgeStatus>& status, Rng& rng) -> std::optional<std::vector<std::size_t>> {
                     std::vector<bool> seen(g.vertices, false);
                     std::vector<std::size_t> path;
                     std::function<bool(std::size_t)> dfs = [&](std::size_t v) {
                       if (v == g.target) return true;
                       seen[v] = true;
                       std::vector<std::size_t> next = out[v];
                       shuffle_in_place(rng, next);
                       for (std::size_t e : next) {
                         if (status[e] == EdgeStatus::KnownInvalid || seen[g.edges[e].to]) continue;
                         path.push_back(e);
                         if (dfs(g.edges[e].to)) return true;
                         path.pop_back();
                       }
                       return false;
                     };
                     if (!dfs(g.source)) return std::nullopt;
                     return path;
                   });
}

AstarGraphResult run_perfect_astar(const GraphWorld& g) {
  g.validate();
  const auto out = g.out_edges();
  // true distance to target over valid edges, by reverse BFS
  std::vector<std::vector<std::size_t>> in(g.vertices);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edges[e].valid) in[g.edges[e].to].push_back(e);
  }
  constexpr std::size_t kInf = static_cast<std::size_t>(-1);
  std::vector<std::size_t> h(g.vertices, kInf);
  std::deque<std::size_t> q = {g.target};
  h[g.target] = 0;
  while (!q.empty()) {
    const std::size_t v = q.front();
    q.pop_front();
    for (std::size_t e : in[v]) {
      if (h[g.edges[e].from] == kInf) {
        h[g.edges[e].from] = h[v] + 1;
        q.push_back(g.edges[e].from);
      }
    }
  }
  AstarGraphResult res;
  if (h[g.source] == kInf) return res;

  std::vector<std::size_t> gval(g.vertices, kInf);
  std::vector<std::optional<std::size_t>> via(g.vertices);
  std::vector<bool> closed(g.vertices, false);
  // (f, deeper first, vertex)
  using Entry = std::tuple<std::size_t, std::int64_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
  gval[g.source] = 0;
  open.emplace(h[g.source], 0, g.source);
  while (!open.empty()) {
    const auto [f, neg_g, v] = open.top();
    open.pop();
    (void)f;
    if (closed[v] || -neg_g != static_cast<std::int64_t>(gval[v])) continue;
    if (v == g.target) {
      std::vector<std::size_t> path = {v};
      for (std::size_t x = v; via[x]; x = g.edges[*via[x]].from) path.push_back(g.edges[*via[x]].from);
      std::reverse(path.begin(), path.end());
      res.path = std::move(path);
      return res;
    }
    closed[v] = true;
    for (std::size_t e : out[v]) {
      ++res.edge_evaluations;
      const GraphEdge& edge = g.edges[e];
      if (!edge.valid || h[edge.to] == kInf) continue;
      const std::size_t ng = gval[v] + 1;
      if (ng < gval[edge.to]) {
        gval[edge.to] = ng;
        via[edge.to] = e;
        open.emplace(ng + h[edge.to], -static_cast<std::int64_t>(ng), edge.to);
      }
    }
  }
  return res;
}

GraphWorld random_graph_world(Rng& rng, const RandomGraphSpec& spec) {
  if (spec.min_vertices < 2 || spec.max_vertices < spec.min_vertices || spec.max_out_degree == 0) {
    throw std::invalid_argument("bad random graph spec");
  }
  for (;;) {
    GraphWorld g;
    g.vertices = spec.min_vertices + uniform_below(rng, spec.max_vertices - spec.min_vertices + 1);
    g.source = 0;
    g.target = g.vertices - 1;
    for (std::size_t v = 0; v < g.vertices; ++v) {
      if (v == g.target) continue;
      const std::size_t degree = 1 + uniform_below(rng, std::min(spec.max_out_degree, g.vertices - 1));
      std::vector<std::size_t> others;
      for (std::size_t u = 0; u < g.vertices; ++u) {
        if (u != v) others.push_back(u);
      }
      shuffle_in_place(rng, others);
      for (std::size_t i = 0; i < degree; ++i) {
        g.edges.push_back({v, others[i], bernoulli(rng, spec.valid_probability), spec.prior});
      }
    }
    const auto out = g.out_edges();
    if (bfs_path(g, out, [&](std::size_t e) { return g.edges[e].valid; })) return g;
  }
}

}  // namespace queryplan
