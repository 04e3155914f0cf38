// Command-line front end: run suites, generate problems, solve one problem,
// summarize records.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "queryplan/bench.hpp"

using namespace queryplan;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

int cmd_run(const std::string& config, std::optional<std::size_t> parallelism) {
  SuiteConfig cfg = load_suite_config(config);
  if (parallelism) cfg.parallelism = *parallelism;
  cfg.validate();
  SuiteResult res = run_suite(cfg);
  std::cout << summary_csv(res.summary);
  if (!cfg.output_dir.empty()) std::cerr << "wrote " << res.records.size() << " records to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_gen(std::size_t n, std::size_t count, std::uint64_t seed, const std::string& out) {
  write_file(fs::path(out) / "domain.pddl", blocksworld_domain_pddl());
  for (std::size_t i = 0; i < count; ++i) {
    ProblemSource p = gen_blocksworld(n, seed + i);
    write_file(fs::path(out) / (p.id + ".pddl"), p.problem_pddl);
    std::cout << p.id << "\n";
  }
  return 0;
}

struct SolveOptions {
  std::string domain, problem, planner = "boomerang", policy, replay, record, heuristic = "goal_count";
  std::string model = LlmConfig{}.model, base_url;
  double temperature = LlmConfig{}.temperature;
  std::size_t budget = 20, T = 0, k = 2, b = 2;
  std::uint64_t seed = 0;
  bool live = false, translate = true;
};

int cmd_solve(const SolveOptions& o) {
  ProblemSource src;
  src.domain_pddl = read_file(o.domain);
  src.problem_pddl = read_file(o.problem);
  src.id = fs::path(o.problem).stem().string();
  src.origin = o.problem;
  const Task task = load_task(src.domain_pddl, src.problem_pddl);

  PlannerSpec spec = planner_from_type(o.planner, o.planner);
  spec.T = o.T;
  spec.k = o.k;
  spec.b = o.b;
  auto h = heuristic_from_string(o.heuristic);
  if (!h) throw ConfigError("unknown heuristic '" + o.heuristic + "'");
  spec.heuristic = *h;

  const bool llm_source = !o.replay.empty() || o.live;
  std::string policy = o.policy.empty() ? (llm_source ? "llm" : "oracle") : o.policy;
  if (policy == "oracle") {
    spec.policy = PolicyKind::Oracle;
  } else if (policy == "random") {
    spec.policy = PolicyKind::Random;
  } else if (policy == "llm") {
    spec.policy = PolicyKind::Llm;
  } else {
    throw ConfigError("policy must be llm, oracle or random");
  }

  LlmConfig cfg;
  cfg.model = o.model;
  cfg.temperature = o.temperature;
  if (!o.base_url.empty()) {
    cfg.base_url = o.base_url;
  } else if (const char* url = std::getenv("QUERYPLAN_BASE_URL")) {
    cfg.base_url = url;
  }
  cfg.validate();

  std::shared_ptr<ChatClient> client;
  if (!o.replay.empty()) {
    client = std::make_shared<ReplayChatClient>(read_transcript(o.replay), cfg.model, cfg.temperature);
  } else if (o.live) {
    client = std::make_shared<HttpChatClient>(cfg);
    if (!o.record.empty()) client = std::make_shared<RecordingChatClient>(client, o.record);
  }
  if (spec.policy == PolicyKind::Llm && !client) throw ConfigError("the llm policy needs --replay or --live");

  LlmPolicyOptions popt;
  popt.translate_states = o.translate;
  const auto optimal = optimal_length_oracle(task);
  RunRecord rec = run_single(src, task, spec, o.seed, o.budget, optimal, client, popt);
  std::cout << record_to_json_line(rec) << "\n";
  return rec.success ? 0 : 2;
}

int cmd_summarize(const std::string& records, const std::string& out, const std::string& histogram) {
  const auto rs = read_records(records);
  write_file(out, summary_csv(summarize(rs)));
  if (!histogram.empty()) write_file(histogram, histogram_csv(wmq_histogram(rs)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-efficient planning engine and benchmark harness"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::size_t> parallelism;
  auto* run = app.add_subcommand("run", "Run a benchmark suite from a config file");
  run->add_option("--config", config, "Suite config (INI)")->required()->check(CLI::ExistingFile);
  run->add_option("--parallelism", parallelism, "Concurrent runs (overrides the config)");

  auto* gen = app.add_subcommand("gen", "Generate problems");
  gen->require_subcommand(1);
  std::size_t n = 3, count = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* bw = gen->add_subcommand("blocksworld", "Random Blocksworld instances");
  bw->add_option("--n", n, "Blocks per instance")->check(CLI::Range(2, 8));
  bw->add_option("--count", count, "Number of instances");
  bw->add_option("--seed", gen_seed, "First seed; instance i uses seed + i");
  bw->add_option("--out", gen_out, "Output directory")->required();

  SolveOptions so;
  auto* solve = app.add_subcommand("solve", "Solve one problem and print its record");
  solve->add_option("--domain", so.domain, "Domain PDDL")->required()->check(CLI::ExistingFile);
  solve->add_option("--problem", so.problem, "Problem PDDL")->required()->check(CLI::ExistingFile);
  solve->add_option("--planner", so.planner,
                    "toi_bfs, toi_dfs, boomerang, react, react_select, reflexion, io, io_cot, io_p, io_cot_p, "
                    "astar, wastar, gbfs");
  solve->add_option("--budget", so.budget, "World model query budget (0 = unlimited)");
  solve->add_option("--policy", so.policy, "llm, oracle or random (default: llm with --replay/--live, else oracle)");
  auto* replay = solve->add_option("--replay", so.replay, "Replay LLM responses from a transcript");
  auto* live = solve->add_flag("--live", so.live, "Call the configured endpoint (QUERYPLAN_API_KEY)");
  replay->excludes(live);
  solve->add_option("--record", so.record, "With --live, also append exchanges to this transcript")->needs(live);
  solve->add_option("--model", so.model, "Model name");
  solve->add_option("--base-url", so.base_url, "Endpoint base URL (default: QUERYPLAN_BASE_URL or OpenAI)");
  solve->add_option("--temperature", so.temperature, "Sampling temperature");
  solve->add_option("--T", so.T, "Iteration limit (0 = planner default)");
  solve->add_option("--k", so.k, "ToI proposals per state");
  solve->add_option("--b", so.b, "ToI-BFS beam width");
  solve->add_option("--heuristic", so.heuristic, "goal_count, h_add or h_ff (classical planners)");
  solve->add_option("--seed", so.seed, "Seed for the random policy");
  bool raw_states = false;
  solve->add_flag("--raw-states", raw_states, "Show predicate lists instead of translating states");

  std::string records, summary_out, hist_out;
  auto* summarize_cmd = app.add_subcommand("summarize", "Summarize a records file");
  summarize_cmd->add_option("--records", records, "Records JSONL")->required()->check(CLI::ExistingFile);
  summarize_cmd->add_option("--out", summary_out, "Summary CSV")->required();
  summarize_cmd->add_option("--histogram", hist_out, "Optional WMQ histogram CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, parallelism);
    if (*bw) return cmd_gen(n, count, gen_seed, gen_out);
    if (*solve) {
      so.translate = !raw_states;
      return cmd_solve(so);
    }
    if (*summarize_cmd) return cmd_summarize(records, summary_out, hist_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
