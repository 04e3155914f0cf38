#pragma once

// LLM-free baselines: delete-relaxation heuristics and best-first search with
// WMQ accounting, plus the explicit-graph lazy shortest-path planner with
// posterior sampling used to study query efficiency.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "queryplan/planners.hpp"
#include "queryplan/random.hpp"

namespace queryplan {

// ---------------------------------------------------------------------------
// Heuristics

enum class HeuristicKind { GoalCount, HAdd, HFF };

const char* to_string(HeuristicKind k);
std::optional<HeuristicKind> heuristic_from_string(std::string_view s);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Delete-relaxation evaluator bound to one task. h_add and h_ff share the
/// same fixed point; h_ff counts the actions of the relaxed plan extracted
/// from best supporters (lowest cost, then action name).
class RelaxedHeuristics {
 public:
  explicit RelaxedHeuristics(const Task& task);

  double value(HeuristicKind kind, const State& s) const;
  double goal_count(const State& s) const;
  double h_add(const State& s) const;
  double h_ff(const State& s) const;

  /// Relaxed plan behind h_ff, in extraction order; empty if unreachable.
  std::vector<ActionId> relaxed_plan(const State& s) const;

 private:
  struct Costs {
    std::vector<double> atom;
    std::vector<std::optional<ActionId>> supporter;
  };
  Costs fixed_point(const State& s) const;

  const Task* task_;
  std::vector<std::vector<ActionId>> achievers_;  // atom -> actions adding it
  std::vector<ActionId> by_name_;                 // action ids sorted by key
  std::vector<std::size_t> name_rank_;
};

double heuristic_value(HeuristicKind kind, const Task& task, const State& s);

/// Sentinel weight for greedy best-first (order by h alone).
inline constexpr double kGreedy = std::numeric_limits<double>::infinity();

/// Best-first search over the world model. Every successor generated is one
/// world.step (cached repeats free). w = 1 is A* with reopening, w = kGreedy
/// orders by h only. Goal test on pop.
PlannerOutcome run_best_first(WorldModel& world, HeuristicKind kind, double w);

// ---------------------------------------------------------------------------
// Graph world

struct GraphEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  bool valid = true;     // hidden truth
  double prior = 1.0;    // belief that the edge is valid, in (0, 1]
};

struct GraphWorld {
  std::size_t vertices = 0;
  std::size_t source = 0;
  std::size_t target = 0;
  std::vector<GraphEdge> edges;

  /// Edge ids leaving each vertex, in file order.
  std::vector<std::vector<std::size_t>> out_edges() const;
  void validate() const;
};

class GraphFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoPathExists : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Line format: `vertices N`, `source S`, `target T`, then one
/// `edge FROM TO valid|invalid PRIOR` per edge; `#` starts a comment.
GraphWorld parse_graph_world(std::string_view text);
GraphWorld load_graph_world(const std::string& path);
std::string write_graph_world(const GraphWorld& g);

/// Chain 0 -> 1 -> ... -> n with `dummies` valid dead-end out-edges per chain
/// vertex; prior equals truth.
GraphWorld chain_graph(std::size_t n, std::size_t dummies);

struct RandomGraphSpec {
  std::size_t max_vertices = 50;
  std::size_t min_vertices = 10;
  std::size_t max_out_degree = 4;
  double valid_probability = 0.8;
  double prior = 0.8;  // every edge's prior
};

/// Random graph whose hidden truth admits a valid source -> target path.
GraphWorld random_graph_world(Rng& rng, const RandomGraphSpec& spec = {});

enum class EdgeStatus { Unknown, KnownValid, KnownInvalid };

struct RegretTrace {
  std::vector<std::size_t> delta;  // infeasible edges on each proposed path

  std::size_t cumulative() const;
  /// Copy with zeros appended up to `horizon` iterations (regret after the
  /// path is confirmed is zero).
  RegretTrace padded(std::size_t horizon) const;
};

struct LazyResult {
  std::optional<std::vector<std::size_t>> path;  // vertices, source first
  std::size_t wmq_used = 0;
  std::size_t iterations = 0;
  RegretTrace trace;
};

/// Posterior-sampling lazy shortest path: sample a world from the edge
/// beliefs, take the fewest-hop path in it, evaluate its unknown edges, and
/// repeat until a path is confirmed or T iterations pass. A sample without
/// any path records regret |V| - 1. Throws NoPathExists when no path remains
/// even with every unknown edge assumed valid.
LazyResult run_lazysp_psrl(const GraphWorld& g, std::size_t T, std::uint64_t seed);

/// Baseline proposer: a uniformly shuffled depth-first simple path through
/// edges not yet known invalid; otherwise as run_lazysp_psrl.
LazyResult run_random_path_proposer(const GraphWorld& g, std::size_t T, std::uint64_t seed);

struct AstarGraphResult {
  std::optional<std::vector<std::size_t>> path;
  std::size_t edge_evaluations = 0;
};

/// A* with the perfect heuristic (true distance over valid edges); every
/// expansion evaluates all out-edges of the expanded vertex.
AstarGraphResult run_perfect_astar(const GraphWorld& g);

}  // namespace queryplan
