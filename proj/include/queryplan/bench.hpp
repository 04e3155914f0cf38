#pragma once

// Benchmark harness: Blocksworld generation, the uncharged optimality oracle,
// suite configuration, suite execution and the records / summary / histogram
// outputs.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "queryplan/classical.hpp"
#include "queryplan/llm.hpp"
#include "queryplan/planners.hpp"

namespace queryplan {

// ---------------------------------------------------------------------------
// Problems

/// A problem as PDDL text plus a stable id.
struct ProblemSource {
  std::string id;
  std::string domain_pddl;
  std::string problem_pddl;
  std::string origin;  // file path, or empty when generated
};

/// The 4-operator Blocksworld domain used by the generator.
const std::string& blocksworld_domain_pddl();

/// Init and goal are independent uniform draws over all arrangements of the
/// blocks into towers; the goal keeps only the `on` atoms. Id `bw-n<n>-s<seed>`.
/// Requires 2 <= n_blocks <= 8.
ProblemSource gen_blocksworld(std::size_t n_blocks, std::uint64_t seed);

inline constexpr std::size_t kDefaultOptimalStateCap = 200'000;

/// Exact optimal plan length by breadth-first search over uncharged
/// transitions; nullopt when the goal is unreachable or more than `state_cap`
/// states would be stored.
std::optional<std::size_t> optimal_length_oracle(const Task& task,
                                                 std::size_t state_cap = kDefaultOptimalStateCap);

// ---------------------------------------------------------------------------
// Records

struct RunRecord {
  std::string problem_id;
  std::string planner_id;
  std::uint64_t seed = 0;
  std::size_t budget = 0;  // 0 = unlimited
  bool success = false;
  std::optional<bool> optimal;
  std::size_t wmq_used = 0;
  std::optional<std::size_t> plan_length;
  std::optional<std::size_t> optimal_length;
  std::size_t llm_calls = 0;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t malformed_actions = 0;
  bool history_truncated = false;
  double wall_time_s = 0.0;
  std::optional<FailureReason> failure_reason;
  std::string detail;
  std::vector<std::string> plan;  // action keys

  bool operator==(const RunRecord&) const = default;
};

std::string record_to_json_line(const RunRecord& r);
RunRecord record_from_json_line(const std::string& line);
std::vector<RunRecord> read_records(const std::string& path);

/// Fixed-column CSV of records without wall time, so identical runs give
/// identical bytes.
std::string records_csv(const std::vector<RunRecord>& records);

// ---------------------------------------------------------------------------
// Summary

struct PlannerSummary {
  std::string planner_id;
  std::size_t runs = 0;
  std::size_t successes = 0;
  double success_rate = 0;
  double success_se = 0;       // sqrt(p (1 - p) / n)
  double mean_wmq = 0;         // failures counted at the budget cap
  std::size_t optimal_known = 0;
  std::size_t optimal_count = 0;
  double optimal_rate = 0;     // optimal_count / optimal_known
  double mean_llm_calls = 0;
  double mean_prompt_tokens = 0;
  double mean_completion_tokens = 0;
  double mean_malformed_actions = 0;
};

struct HistogramBin {
  std::string planner_id;
  std::string bin;  // WMQ count, or "fail" for failures when the budget is unlimited
  std::size_t count = 0;
};

/// Planners appear in first-seen order of `records`.
std::vector<PlannerSummary> summarize(const std::vector<RunRecord>& records);
std::string summary_csv(const std::vector<PlannerSummary>& summary);

/// Bins 0..budget per planner (every bin listed, zeros included); failures
/// land in the budget bin. With unlimited budget, bins run 0..max successful
/// WMQ plus a "fail" bin.
std::vector<HistogramBin> wmq_histogram(const std::vector<RunRecord>& records);
std::string histogram_csv(const std::vector<HistogramBin>& bins);

// ---------------------------------------------------------------------------
// Suite configuration

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PlannerKind {
  ToiBfs,
  ToiDfs,
  Boomerang,
  React,
  ReactSelect,
  Reflexion,
  Io,
  IoCot,
  IoP,
  IoCotP,
  BestFirst,
};

enum class PolicyKind { Llm, Oracle, Random };

struct PlannerSpec {
  std::string id;
  PlannerKind kind = PlannerKind::Boomerang;
  PolicyKind policy = PolicyKind::Llm;
  std::size_t T = 0;  // 0 = planner default
  std::size_t k = 2;
  std::size_t b = 2;
  RatingValue v_min = RatingValue::Maybe;
  HeuristicKind heuristic = HeuristicKind::GoalCount;
  double weight = 1.0;
};

/// Planner from a type name (toi_bfs, toi_dfs, boomerang, react, react_select,
/// reflexion, io, io_cot, io_p, io_cot_p, astar, wastar, gbfs).
PlannerSpec planner_from_type(const std::string& id, const std::string& type);

enum class LlmMode { None, Replay, Record, Live };

struct SuiteLlm {
  LlmMode mode = LlmMode::None;
  std::string transcript;  // replay input or record output
  LlmConfig client;
  LlmPolicyOptions policy;
};

struct SuiteConfig {
  std::string name = "suite";
  std::vector<ProblemSource> problems;
  std::vector<PlannerSpec> planners;
  std::size_t budget = 20;
  std::vector<std::uint64_t> seeds = {0};
  SuiteLlm llm;
  std::string output_dir;  // empty: no files written
  std::size_t parallelism = 1;
  std::size_t optimal_state_cap = kDefaultOptimalStateCap;

  /// Throws ConfigError.
  void validate() const;
};

/// Parses the INI-style suite file. Relative paths resolve against
/// `base_dir`. Loads problem files and generates problems eagerly.
SuiteConfig parse_suite_config(const std::string& text, const std::string& base_dir);
SuiteConfig load_suite_config(const std::string& path);

// ---------------------------------------------------------------------------
// Execution

struct SuiteHooks {
  /// Client used instead of the HTTP client in live and record modes.
  std::shared_ptr<ChatClient> live_client;
};

struct SuiteResult {
  std::vector<RunRecord> records;  // problem, planner, seed order
  std::vector<PlannerSummary> summary;
  std::vector<HistogramBin> histogram;
};

/// Runs one (problem, planner, seed) job with a fresh world model. Errors
/// inside the run become a failed record.
RunRecord run_single(const ProblemSource& problem, const Task& task, const PlannerSpec& planner,
                     std::uint64_t seed, std::size_t budget, std::optional<std::size_t> optimal_length,
                     const std::shared_ptr<ChatClient>& client, const LlmPolicyOptions& llm_options);

/// Validates the config (ConfigError before any run or output), runs every
/// job, and writes records.jsonl, records.csv, summary.csv and histogram.csv
/// into output_dir when set.
SuiteResult run_suite(const SuiteConfig& cfg, const SuiteHooks& hooks = {});

std::string run_id_for(const std::string& problem_id, const std::string& planner_id, std::uint64_t seed);

}  // namespace queryplan
