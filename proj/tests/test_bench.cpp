#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "queryplan/bench.hpp"
#include "support/oracles.hpp"
#include "support/scripted_llm.hpp"

using namespace queryplan;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("qp_bench_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Task task_of(const ProblemSource& p) { return load_task(p.domain_pddl, p.problem_pddl); }

std::size_t naive_optimum(const Task& t) {
  std::vector<std::string> objects;
  for (const auto& o : t.problem->atoms->objects()) objects.push_back(o.name);
  qp_test::StrState goal;
  for (auto id : t.goal()) goal.insert(t.problem->atoms->key(id));
  return qp_test::naive_optimal_length(*t.problem->domain, objects, qp_test::to_strings(t.init()), goal).value();
}

RunRecord rec(const std::string& planner, bool success, std::size_t wmq, std::size_t budget = 20) {
  RunRecord r;
  r.problem_id = "p";
  r.planner_id = planner;
  r.budget = budget;
  r.success = success;
  r.wmq_used = wmq;
  if (success) r.plan_length = wmq;
  if (!success) r.failure_reason = FailureReason::BudgetExhausted;
  return r;
}

SuiteConfig generated_suite(std::size_t blocks, std::size_t count, std::uint64_t seed) {
  SuiteConfig cfg;
  for (std::size_t i = 0; i < count; ++i) cfg.problems.push_back(gen_blocksworld(blocks, seed + i));
  return cfg;
}

PlannerSpec planner(const std::string& id, const std::string& type, PolicyKind policy = PolicyKind::Oracle) {
  PlannerSpec p = planner_from_type(id, type);
  p.policy = policy;
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Generation

TEST(Generate, SeededDeterminismAndId) {
  ProblemSource a = gen_blocksworld(3, 1), b = gen_blocksworld(3, 1);
  EXPECT_EQ(a.problem_pddl, b.problem_pddl);
  EXPECT_EQ(a.id, "bw-n3-s1");
  EXPECT_NE(gen_blocksworld(6, 1).problem_pddl, gen_blocksworld(6, 2).problem_pddl);
  EXPECT_EQ(a.domain_pddl, blocksworld_domain_pddl());
  // the embedded domain is the shipped one
  Domain shipped = parse_domain(qp_test::bw_domain());
  Domain embedded = parse_domain(blocksworld_domain_pddl());
  EXPECT_EQ(shipped.name, embedded.name);
  EXPECT_EQ(shipped.schemas.size(), embedded.schemas.size());
  EXPECT_THROW(gen_blocksworld(1, 0), std::invalid_argument);
  EXPECT_THROW(gen_blocksworld(9, 0), std::invalid_argument);
}

TEST(Generate, GoalKeepsOnlyOnAtoms) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    Task t = task_of(gen_blocksworld(4, s));
    for (auto id : t.goal()) EXPECT_EQ(t.problem->atoms->key(id).rfind("on(", 0), 0u);
  }
}

TEST(Generate, TwoBlockOptimaFromBfs) {
  // Three arrangements of two blocks; BFS distances between them are 0, 2 or 4.
  for (std::uint64_t s = 0; s < 100; ++s) {
    Task t = task_of(gen_blocksworld(2, s));
    const auto opt = optimal_length_oracle(t);
    ASSERT_TRUE(opt);
    EXPECT_TRUE(*opt == 0 || *opt == 2 || *opt == 3 || *opt == 4);
    EXPECT_EQ(*opt, naive_optimum(t));
  }
}

// Init arrangements of 3 blocks are uniform over the 13 configurations.
TEST(Generate, UniformOverArrangements) {
  constexpr std::size_t kDraws = 13000;
  std::map<std::string, std::size_t> counts;
  for (std::uint64_t s = 0; s < kDraws; ++s) ++counts[task_of(gen_blocksworld(3, s)).init().canonical_key()];
  const auto configs = qp_test::all_tower_sets(qp_test::block_names(3));
  ASSERT_EQ(configs.size(), 13u);
  ASSERT_EQ(counts.size(), 13u);
  double chi2 = 0;
  const double expected = static_cast<double>(kDraws) / 13.0;
  for (const auto& [_, c] : counts) chi2 += std::pow(static_cast<double>(c) - expected, 2) / expected;
  EXPECT_LT(chi2, 32.91);  // chi-square, 12 dof, p = 0.001
}

TEST(Generate, FiveBlockSeedSevenAgreesWithAStar) {
  Task t = task_of(gen_blocksworld(5, 7));
  const auto opt = optimal_length_oracle(t);
  ASSERT_TRUE(opt);
  EXPECT_EQ(*opt, naive_optimum(t));
  WorldModel w(t, 0);
  PlannerOutcome o = run_best_first(w, HeuristicKind::GoalCount, 1.0);
  ASSERT_TRUE(o.success);
  EXPECT_EQ(o.plan->size(), *opt);
}

// ---------------------------------------------------------------------------
// Optimality oracle

TEST(OptimalOracle, Basics) {
  Task three = load_task(qp_test::bw_domain(),
                         qp_test::read_file(qp_test::data_path("domains/blocksworld/three_blocks.pddl")));
  EXPECT_EQ(optimal_length_oracle(three), 4u);
  Task done = load_task(qp_test::bw_domain(), qp_test::bw_problem({"a", "b"}, {{"b", "a"}}, "(on a b)"));
  EXPECT_EQ(optimal_length_oracle(done), 0u);
  Task impossible =
      load_task(qp_test::bw_domain(), qp_test::bw_problem({"a", "b"}, {{"a"}, {"b"}}, "(on a b) (on b a)"));
  EXPECT_EQ(optimal_length_oracle(impossible), std::nullopt);
  EXPECT_EQ(optimal_length_oracle(three, 3), std::nullopt);
}

TEST(OptimalOracle, EightBlocksExceedCap) {
  Task eight = load_task(qp_test::bw_domain(),
                         qp_test::read_file(qp_test::data_path("domains/blocksworld/eight_blocks.pddl")));
  EXPECT_EQ(optimal_length_oracle(eight, 2000), std::nullopt);
  // a generous cap solves it
  EXPECT_TRUE(optimal_length_oracle(eight, 2'000'000));
}

// ---------------------------------------------------------------------------
// Records and summaries

TEST(Records, JsonRoundTrip) {
  RunRecord r = rec("boom", true, 4);
  r.optimal = true;
  r.optimal_length = 4;
  r.llm_calls = 3;
  r.prompt_tokens = 120;
  r.completion_tokens = 40;
  r.malformed_actions = 1;
  r.history_truncated = true;
  r.wall_time_s = 0.25;
  r.detail = "line \"one\"\nline two";
  r.plan = {"unstack(a,b)", "put-down(a)"};
  EXPECT_EQ(record_from_json_line(record_to_json_line(r)), r);
  RunRecord f = rec("react", false, 20);
  EXPECT_EQ(record_from_json_line(record_to_json_line(f)), f);
  EXPECT_EQ(record_to_json_line(f).find('\n'), std::string::npos);
  EXPECT_THROW(record_from_json_line("{"), std::runtime_error);
  EXPECT_THROW(record_from_json_line(R"({"problem_id":"p"})"), std::runtime_error);
}

TEST(Records, CsvLayout) {
  RunRecord r = rec("astar", true, 7);
  r.optimal_length = 4;
  r.optimal = false;
  RunRecord f = rec("x,y", false, 3);
  EXPECT_EQ(records_csv({r, f}),
            "problem_id,planner_id,seed,budget,success,optimal,wmq_used,plan_length,optimal_length,llm_calls,"
            "prompt_tokens,completion_tokens,malformed_actions,history_truncated,failure_reason\n"
            "p,astar,0,20,true,false,7,7,4,0,0,0,0,false,\n"
            "p,\"x,y\",0,20,false,,3,,,0,0,0,0,false,BudgetExhausted\n");
}

TEST(Summary, HandComputed) {
  std::vector<RunRecord> rs = {rec("a", true, 2), rec("a", true, 3), rec("a", true, 4), rec("a", false, 7),
                               rec("b", false, 1)};
  rs[0].optimal = true;
  rs[1].optimal = false;
  rs[0].llm_calls = 4;
  rs[0].prompt_tokens = 10;
  auto s = summarize(rs);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].planner_id, "a");
  EXPECT_EQ(s[0].runs, 4u);
  EXPECT_EQ(s[0].successes, 3u);
  EXPECT_DOUBLE_EQ(s[0].success_rate, 0.75);
  EXPECT_DOUBLE_EQ(s[0].success_se, std::sqrt(0.75 * 0.25 / 4));
  EXPECT_DOUBLE_EQ(s[0].mean_wmq, (2 + 3 + 4 + 20) / 4.0);  // failure at the cap
  EXPECT_EQ(s[0].optimal_known, 2u);
  EXPECT_DOUBLE_EQ(s[0].optimal_rate, 0.5);
  EXPECT_DOUBLE_EQ(s[0].mean_llm_calls, 1.0);
  EXPECT_DOUBLE_EQ(s[1].mean_wmq, 20.0);
  EXPECT_DOUBLE_EQ(s[1].success_se, 0.0);
  const std::string csv = summary_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "planner_id,runs,successes,success_rate,success_se,mean_wmq,optimal_known,optimal_count,optimal_rate,"
            "mean_llm_calls,mean_prompt_tokens,mean_completion_tokens,mean_malformed_actions");
  EXPECT_NE(csv.find("a,4,3,0.7500,0.2165,7.2500,2,1,0.5000,1.0000,2.5000,0.0000,0.0000\n"), std::string::npos);
}

TEST(Histogram, ConservationAndCapBin) {
  std::vector<RunRecord> rs = {rec("a", true, 0), rec("a", true, 3), rec("a", false, 5), rec("a", false, 20),
                               rec("a", true, 20)};
  auto h = wmq_histogram(rs);
  ASSERT_EQ(h.size(), 21u);
  std::size_t total = 0;
  for (const auto& b : h) total += b.count;
  EXPECT_EQ(total, rs.size());
  EXPECT_EQ(h[0].count, 1u);
  EXPECT_EQ(h[3].count, 1u);
  EXPECT_EQ(h[5].count, 0u);
  EXPECT_EQ(h[20].bin, "20");
  EXPECT_EQ(h[20].count, 3u);
  EXPECT_EQ(histogram_csv({h[0]}), "planner_id,wmq_bin,count\na,0,1\n");
}

TEST(Histogram, UnlimitedBudgetHasFailBin) {
  std::vector<RunRecord> rs = {rec("a", true, 2, 0), rec("a", false, 50, 0)};
  auto h = wmq_histogram(rs);
  ASSERT_EQ(h.size(), 4u);
  EXPECT_EQ(h[2].count, 1u);
  EXPECT_EQ(h[3].bin, "fail");
  EXPECT_EQ(h[3].count, 1u);
  auto s = summarize(rs);
  EXPECT_DOUBLE_EQ(s[0].mean_wmq, 26.0);  // no cap to charge failures at
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, ParsesFullDocument) {
  const std::string text = R"(# demo
[suite]
name = demo
budget = 15
seeds = 3, 4
domain = ../domains/blocksworld/domain.pddl
problems = ../domains/blocksworld/*_blocks.pddl
generate_blocks = 3
generate_count = 2
generate_seed = 10
parallelism = 2
output_dir = out

[llm]
mode = replay
transcript = runs/t.jsonl
model = gpt-4-turbo
temperature = 0.5
translate_states = false
history_char_cap = 4000

[planners.bfs]
type = toi_bfs
policy = llm
k = 3
b = 1
T = 10

[planners.dfs]
type = toi_dfs
v_min = sure

[planners.wa]
type = wastar
heuristic = h_ff
)";
  const fs::path base = fs::path(QP_DATA_DIR) / "configs";
  SuiteConfig c = parse_suite_config(text, base.string());
  EXPECT_EQ(c.name, "demo");
  EXPECT_EQ(c.budget, 15u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4}));
  ASSERT_EQ(c.problems.size(), 4u);
  EXPECT_EQ(c.problems[0].id, "eight_blocks");
  EXPECT_EQ(c.problems[1].id, "three_blocks");
  EXPECT_EQ(c.problems[2].id, "bw-n3-s10");
  EXPECT_EQ(c.problems[3].id, "bw-n3-s11");
  EXPECT_EQ(c.output_dir, (base / "out").lexically_normal().string());
  EXPECT_EQ(c.parallelism, 2u);
  EXPECT_EQ(c.llm.mode, LlmMode::Replay);
  EXPECT_EQ(c.llm.transcript, (base / "runs/t.jsonl").lexically_normal().string());
  EXPECT_DOUBLE_EQ(c.llm.client.temperature, 0.5);
  EXPECT_FALSE(c.llm.policy.translate_states);
  EXPECT_EQ(c.llm.policy.history_char_cap, 4000u);
  ASSERT_EQ(c.planners.size(), 3u);
  EXPECT_EQ(c.planners[0].kind, PlannerKind::ToiBfs);
  EXPECT_EQ(c.planners[0].k, 3u);
  EXPECT_EQ(c.planners[0].b, 1u);
  EXPECT_EQ(c.planners[0].T, 10u);
  EXPECT_EQ(c.planners[1].v_min, RatingValue::Certain);
  EXPECT_EQ(c.planners[1].policy, PolicyKind::Llm);
  EXPECT_EQ(c.planners[2].kind, PlannerKind::BestFirst);
  EXPECT_EQ(c.planners[2].weight, 3.0);
  EXPECT_EQ(c.planners[2].heuristic, HeuristicKind::HFF);
}

TEST(Config, AbsolutePaths) {
  const std::string text = std::string("[suite]\ndomain = ") + QP_DATA_DIR +
                           "/domains/blocksworld/domain.pddl\nproblems = " + QP_DATA_DIR +
                           "/domains/blocksworld/three_*.pddl\n[planners.a]\ntype = astar\n";
  SuiteConfig c = parse_suite_config(text, "/");
  ASSERT_EQ(c.problems.size(), 1u);
  EXPECT_EQ(c.problems[0].id, "three_blocks");
}

TEST(Config, Errors) {
  auto bad = [](const std::string& text) {
    EXPECT_THROW(parse_suite_config(text, QP_DATA_DIR), ConfigError) << text;
  };
  const std::string suite = "[suite]\ngenerate_blocks = 3\ngenerate_count = 1\n";
  bad(suite);                                                     // no planners
  bad("[planners.a]\ntype = astar\n");                            // no [suite]
  bad(suite + "[planners.a]\ntype = magic\n");                    // unknown type
  bad(suite + "[planners.a]\npolicy = oracle\n");                 // type missing
  bad(suite + "[planners.a]\ntype = react\n");                    // llm policy, mode none
  bad(suite + "[planners.a]\ntype = astar\ncolour = red\n");      // unknown key
  bad(suite + "[planners.a]\ntype = astar\n[planners.a]\ntype = gbfs\n");
  bad(suite + "[planners.a]\ntype = astar\nweight = 0.5\n");
  bad(suite + "[planners.a]\ntype = toi_dfs\npolicy = oracle\nv_min = great\n");
  bad(suite + "[planners.a]\ntype = astar\n[llm]\nmode = replay\n");  // replay without transcript
  bad(suite + "[planners.a]\ntype = astar\n[llm]\nmode = psychic\n");
  bad(suite + "[planners.a]\ntype = astar\n[llm]\nmode = live\ntemperature = 3\n");
  bad("[suite]\nbudget = -1\ngenerate_blocks = 3\ngenerate_count = 1\n[planners.a]\ntype = astar\n");
  bad("[suite]\ngenerate_blocks = 12\ngenerate_count = 1\n[planners.a]\ntype = astar\n");
  bad("[suite]\ndomain = blocksworld/domain.pddl\nproblems = nothing/*.pddl\n[planners.a]\ntype = astar\n");
  bad("[suite]\nproblems = x.pddl\n[planners.a]\ntype = astar\n");
  bad("[suite]\nkey without equals\n");
  bad("[weird]\n");
}

TEST(Suite, EmptyPlannerListWritesNothing) {
  const fs::path dir = fresh_dir("empty");
  SuiteConfig cfg = generated_suite(3, 2, 0);
  cfg.output_dir = (dir / "out").string();
  EXPECT_THROW(run_suite(cfg), ConfigError);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Suite, BadProblemIsConfigErrorBeforeAnyRun) {
  const fs::path dir = fresh_dir("badproblem");
  SuiteConfig cfg = generated_suite(3, 1, 0);
  cfg.problems.push_back({"broken", blocksworld_domain_pddl(), "(define (problem", ""});
  cfg.planners = {planner("a", "astar")};
  cfg.output_dir = dir.string();
  EXPECT_THROW(run_suite(cfg), ConfigError);
  EXPECT_FALSE(fs::exists(dir));
}

// ---------------------------------------------------------------------------
// Suite execution

TEST(Suite, OracleCeilingOnGeneratedProblems) {
  const fs::path dir = fresh_dir("ceiling");
  SuiteConfig cfg = generated_suite(3, 10, 100);
  cfg.planners = {planner("boomerang", "boomerang"), planner("react", "react"), planner("astar", "astar")};
  cfg.output_dir = dir.string();
  SuiteResult res = run_suite(cfg);
  ASSERT_EQ(res.records.size(), 30u);
  double boom_wmq = 0, opt = 0;
  for (const auto& r : res.records) {
    // A* generates every successor and may run out of budget; the oracle policies may not
    if (r.planner_id != "astar") ASSERT_TRUE(r.success) << r.problem_id << " " << r.planner_id << " " << r.detail;
    ASSERT_TRUE(r.optimal_length);
    EXPECT_LE(r.wmq_used, cfg.budget);
    EXPECT_EQ(*r.optimal, r.plan_length == r.optimal_length);
    if (r.planner_id == "boomerang") {
      boom_wmq += static_cast<double>(r.wmq_used);
      opt += static_cast<double>(*r.optimal_length);
      EXPECT_EQ(r.wmq_used, *r.optimal_length);
    }
    if (r.planner_id == "astar") EXPECT_EQ(*r.optimal, r.success);
  }
  EXPECT_DOUBLE_EQ(boom_wmq / 10, opt / 10);
  EXPECT_EQ(res.summary.size(), 3u);
  EXPECT_DOUBLE_EQ(res.summary[0].mean_wmq, opt / 10);

  // outputs on disk match the in-memory result
  EXPECT_EQ(slurp(dir / "records.csv"), records_csv(res.records));
  EXPECT_EQ(slurp(dir / "summary.csv"), summary_csv(res.summary));
  EXPECT_EQ(slurp(dir / "histogram.csv"), histogram_csv(res.histogram));
  auto lines = read_records((dir / "records.jsonl").string());
  EXPECT_EQ(lines.size(), 30u);
  fs::remove_all(dir);
}

TEST(Suite, ParallelRunsMatchSequential) {
  SuiteConfig cfg = generated_suite(4, 6, 7);
  cfg.seeds = {1, 2};
  cfg.budget = 12;
  cfg.planners = {planner("bfs", "toi_bfs", PolicyKind::Random), planner("dfs", "toi_dfs", PolicyKind::Random),
                  planner("react", "react", PolicyKind::Random), planner("gbfs", "gbfs")};
  SuiteResult seq = run_suite(cfg);
  cfg.parallelism = 4;
  SuiteResult par = run_suite(cfg);
  EXPECT_EQ(records_csv(seq.records), records_csv(par.records));
  EXPECT_EQ(summary_csv(seq.summary), summary_csv(par.summary));
  std::size_t total = 0;
  for (const auto& r : seq.records) total += r.wmq_used;
  EXPECT_GT(total, 0u);
  // histograms conserve runs and place every failure in the cap bin
  std::map<std::string, std::size_t> per_planner, cap_bin, failures;
  for (const auto& b : seq.histogram) {
    per_planner[b.planner_id] += b.count;
    if (b.bin == "12") cap_bin[b.planner_id] = b.count;
  }
  for (const auto& r : seq.records) failures[r.planner_id] += r.success ? 0 : 1;
  for (const auto& [id, n] : per_planner) {
    EXPECT_EQ(n, 12u);
    EXPECT_GE(cap_bin[id], failures[id]);
  }
}

TEST(Suite, RecordThenReplayIsByteIdentical) {
  const fs::path dir = fresh_dir("replay");
  SuiteConfig cfg = generated_suite(3, 5, 40);
  cfg.planners = {planner("boom", "boomerang", PolicyKind::Llm), planner("bfs", "toi_bfs", PolicyKind::Llm),
                  planner("react", "react", PolicyKind::Llm)};
  cfg.llm.mode = LlmMode::Record;
  cfg.llm.client.model = "fake-model";  // replay keys on the model and temperature
  cfg.llm.transcript = (dir / "transcript.jsonl").string();
  cfg.output_dir = (dir / "recorded").string();
  auto fake = qp_test::scripted_llm();
  SuiteResult recorded = run_suite(cfg, SuiteHooks{fake});
  ASSERT_EQ(recorded.records.size(), 15u);
  EXPECT_GT(fake->calls, 0u);
  std::size_t calls = 0;
  for (const auto& r : recorded.records) calls += r.llm_calls;
  EXPECT_EQ(calls, fake->calls);

  cfg.llm.mode = LlmMode::Replay;
  cfg.output_dir = (dir / "replay1").string();
  run_suite(cfg);
  cfg.output_dir = (dir / "replay2").string();
  cfg.parallelism = 3;
  run_suite(cfg);
  const std::string a = slurp(dir / "replay1" / "records.csv");
  EXPECT_EQ(a, slurp(dir / "replay2" / "records.csv"));
  EXPECT_EQ(a, slurp(dir / "recorded" / "records.csv"));
  EXPECT_EQ(slurp(dir / "replay1" / "summary.csv"), slurp(dir / "replay2" / "summary.csv"));
  EXPECT_EQ(fake->calls, calls);  // replay never reached the model
  fs::remove_all(dir);
}

TEST(Suite, ReplayMissFailsRunsWithoutAborting) {
  const fs::path dir = fresh_dir("miss");
  fs::create_directories(dir);
  std::ofstream(dir / "empty.jsonl").close();
  SuiteConfig cfg = generated_suite(3, 2, 1);
  cfg.planners = {planner("boom", "boomerang", PolicyKind::Llm), planner("astar", "astar")};
  cfg.llm.mode = LlmMode::Replay;
  cfg.llm.transcript = (dir / "empty.jsonl").string();
  SuiteResult res = run_suite(cfg);
  ASSERT_EQ(res.records.size(), 4u);
  for (const auto& r : res.records) {
    if (r.planner_id == "boom") {
      EXPECT_FALSE(r.success);
      EXPECT_EQ(r.failure_reason, FailureReason::PolicyFailure);
    } else {
      EXPECT_TRUE(r.success);
    }
  }
  cfg.llm.transcript = (dir / "missing.jsonl").string();
  EXPECT_THROW(run_suite(cfg), ConfigError);
  fs::remove_all(dir);
}

TEST(Suite, UnlimitedBudgetRecordsActualQueries) {
  SuiteConfig cfg = generated_suite(4, 3, 5);
  cfg.budget = 0;
  cfg.planners = {planner("astar", "astar")};
  SuiteResult res = run_suite(cfg);
  for (const auto& r : res.records) {
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.budget, 0u);
    EXPECT_TRUE(*r.optimal);
  }
  EXPECT_EQ(res.histogram.back().bin, "fail");
}
