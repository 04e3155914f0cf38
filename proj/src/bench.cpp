#include "queryplan/bench.hpp"

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#include "queryplan/prompts.hpp"
#include "queryplan/random.hpp"

namespace queryplan {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Generation

const std::string& blocksworld_domain_pddl() {
  static const std::string text = R"((define (domain blocksworld-4ops)
  (:requirements :strips)
  (:predicates (clear ?x)
               (ontable ?x)
               (handempty)
               (holding ?x)
               (on ?x ?y))

  (:action pick-up
    :parameters (?ob)
    :precondition (and (clear ?ob) (ontable ?ob) (handempty))
    :effect (and (holding ?ob) (not (clear ?ob)) (not (ontable ?ob))
                 (not (handempty))))

  (:action put-down
    :parameters (?ob)
    :precondition (and (holding ?ob))
    :effect (and (clear ?ob) (handempty) (ontable ?ob)
                 (not (holding ?ob))))

  (:action stack
    :parameters (?ob ?underob)
    :precondition (and (clear ?underob) (holding ?ob))
    :effect (and (handempty) (clear ?ob) (on ?ob ?underob)
                 (not (clear ?underob)) (not (holding ?ob))))

  (:action unstack
    :parameters (?ob ?underob)
    :precondition (and (on ?ob ?underob) (clear ?ob) (handempty))
    :effect (and (holding ?ob) (clear ?underob)
                 (not (on ?ob ?underob)) (not (clear ?ob)) (not (handempty)))))
)";
  return text;
}

namespace {

using Towers = std::vector<std::vector<std::string>>;  // each bottom to top

double binomial(std::size_t n, std::size_t k) {
  double r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

double factorial(std::size_t n) {
  double r = 1;
  for (std::size_t i = 2; i <= n; ++i) r *= static_cast<double>(i);
  return r;
}

// Uniform over all arrangements: pick the tower count k with weight
// L(n,k) = C(n-1,k-1) n!/k!, then a random permutation cut at k-1 distinct
// random gaps. Each arrangement arises from exactly k! (permutation, cut)
// pairs, so the draw is uniform.
Towers random_towers(Rng& rng, const std::vector<std::string>& blocks) {
  const std::size_t n = blocks.size();
  std::vector<std::uint64_t> weight(n + 1, 0);
  std::uint64_t total = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    weight[k] = static_cast<std::uint64_t>(std::llround(binomial(n - 1, k - 1) * factorial(n) / factorial(k)));
    total += weight[k];
  }
  std::uint64_t pick = uniform_below(rng, total);
  std::size_t k = 1;
  while (pick >= weight[k]) pick -= weight[k++];

  std::vector<std::string> order = blocks;
  shuffle_in_place(rng, order);
  std::vector<std::size_t> gaps;
  for (std::size_t g = 1; g < n; ++g) gaps.push_back(g);
  shuffle_in_place(rng, gaps);
  std::vector<std::size_t> cuts(gaps.begin(), gaps.begin() + static_cast<long>(k - 1));
  cuts.push_back(n);
  std::sort(cuts.begin(), cuts.end());
  Towers towers;
  std::size_t start = 0;
  for (std::size_t c : cuts) {
    towers.emplace_back(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(c));
    start = c;
  }
  return towers;
}

}  // namespace

ProblemSource gen_blocksworld(std::size_t n_blocks, std::uint64_t seed) {
  if (n_blocks < 2 || n_blocks > 8) throw std::invalid_argument("blocksworld generator needs 2 to 8 blocks");
  std::vector<std::string> blocks;
  for (std::size_t i = 0; i < n_blocks; ++i) blocks.push_back(std::string(1, static_cast<char>('a' + i)));
  Rng rng(seed);
  const Towers init = random_towers(rng, blocks);
  const Towers goal = random_towers(rng, blocks);

  ProblemSource p;
  p.id = "bw-n" + std::to_string(n_blocks) + "-s" + std::to_string(seed);
  p.domain_pddl = blocksworld_domain_pddl();
  std::ostringstream out;
  out << "(define (problem " << p.id << ")\n  (:domain blocksworld-4ops)\n  (:objects";
  for (const auto& b : blocks) out << ' ' << b;
  out << ")\n  (:init (handempty)";
  for (const auto& t : init) {
    out << " (ontable " << t.front() << ")";
    for (std::size_t i = 1; i < t.size(); ++i) out << " (on " << t[i] << ' ' << t[i - 1] << ")";
    out << " (clear " << t.back() << ")";
  }
  out << ")\n  (:goal (and";
  for (const auto& t : goal) {
    for (std::size_t i = 1; i < t.size(); ++i) out << " (on " << t[i] << ' ' << t[i - 1] << ")";
  }
  out << ")))\n";
  p.problem_pddl = out.str();
  return p;
}

std::optional<std::size_t> optimal_length_oracle(const Task& task, std::size_t state_cap) {
  std::unordered_map<State, std::size_t, StateHash> dist{{task.init(), 0}};
  std::deque<State> queue = {task.init()};
  while (!queue.empty()) {
    State s = std::move(queue.front());
    queue.pop_front();
    const std::size_t d = dist.at(s);
    if (satisfies_goal(s, task.goal())) return d;
    for (ActionId a : applicable_actions(task, s)) {
      State next = std::get<State>(apply_action(s, task.action(a)));
      if (dist.count(next)) continue;
      if (dist.size() >= state_cap) return std::nullopt;
      dist.emplace(next, d + 1);
      queue.push_back(std::move(next));
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Records

namespace {

template <typename T>
ojson opt_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

template <typename T>
std::optional<T> opt_from(const ojson& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <typename T>
std::string opt_csv(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_same_v<T, bool>) {
    return *v ? "true" : "false";
  } else {
    return std::to_string(*v);
  }
}

}  // namespace

std::string record_to_json_line(const RunRecord& r) {
  ojson j;
  j["problem_id"] = r.problem_id;
  j["planner_id"] = r.planner_id;
  j["seed"] = r.seed;
  j["budget"] = r.budget;
  j["success"] = r.success;
  j["optimal"] = opt_json(r.optimal);
  j["wmq_used"] = r.wmq_used;
  j["plan_length"] = opt_json(r.plan_length);
  j["optimal_length"] = opt_json(r.optimal_length);
  j["llm_calls"] = r.llm_calls;
  j["prompt_tokens"] = r.prompt_tokens;
  j["completion_tokens"] = r.completion_tokens;
  j["malformed_actions"] = r.malformed_actions;
  j["history_truncated"] = r.history_truncated;
  j["wall_time_s"] = r.wall_time_s;
  j["failure_reason"] = r.failure_reason ? ojson(to_string(*r.failure_reason)) : ojson(nullptr);
  j["detail"] = r.detail;
  j["plan"] = r.plan;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

RunRecord record_from_json_line(const std::string& line) {
  RunRecord r;
  try {
    const ojson j = ojson::parse(line);
    r.problem_id = j.at("problem_id").get<std::string>();
    r.planner_id = j.at("planner_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.budget = j.at("budget").get<std::size_t>();
    r.success = j.at("success").get<bool>();
    r.optimal = opt_from<bool>(j, "optimal");
    r.wmq_used = j.at("wmq_used").get<std::size_t>();
    r.plan_length = opt_from<std::size_t>(j, "plan_length");
    r.optimal_length = opt_from<std::size_t>(j, "optimal_length");
    r.llm_calls = j.value("llm_calls", std::size_t{0});
    r.prompt_tokens = j.value("prompt_tokens", std::size_t{0});
    r.completion_tokens = j.value("completion_tokens", std::size_t{0});
    r.malformed_actions = j.value("malformed_actions", std::size_t{0});
    r.history_truncated = j.value("history_truncated", false);
    r.wall_time_s = j.value("wall_time_s", 0.0);
    if (auto reason = opt_from<std::string>(j, "failure_reason")) {
      r.failure_reason = failure_reason_from_string(*reason);
      if (!r.failure_reason) throw std::runtime_error("unknown failure_reason '" + *reason + "'");
    }
    r.detail = j.value("detail", std::string());
    if (j.contains("plan")) r.plan = j.at("plan").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("bad record line: ") + e.what());
  }
  return r;
}

std::vector<RunRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records file '" + path + "'");
  std::vector<RunRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(record_from_json_line(line));
  }
  return out;
}

std::string records_csv(const std::vector<RunRecord>& records) {
  std::string out =
      "problem_id,planner_id,seed,budget,success,optimal,wmq_used,plan_length,optimal_length,llm_calls,"
      "prompt_tokens,completion_tokens,malformed_actions,history_truncated,failure_reason\n";
  for (const auto& r : records) {
    out += csv_field(r.problem_id) + ',' + csv_field(r.planner_id) + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.budget) + ',' + (r.success ? "true" : "false") + ',' + opt_csv(r.optimal) + ',' +
           std::to_string(r.wmq_used) + ',' + opt_csv(r.plan_length) + ',' + opt_csv(r.optimal_length) + ',' +
           std::to_string(r.llm_calls) + ',' + std::to_string(r.prompt_tokens) + ',' +
           std::to_string(r.completion_tokens) + ',' + std::to_string(r.malformed_actions) + ',' +
           (r.history_truncated ? "true" : "false") + ',' +
           (r.failure_reason ? to_string(*r.failure_reason) : "") + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summary

namespace {

std::vector<std::string> planner_order(const std::vector<RunRecord>& records) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.planner_id).second) order.push_back(r.planner_id);
  }
  return order;
}

// WMQ a run contributes to averages: failures count at the cap when there is one.
std::size_t charged_wmq(const RunRecord& r) { return (!r.success && r.budget > 0) ? r.budget : r.wmq_used; }

}  // namespace

std::vector<PlannerSummary> summarize(const std::vector<RunRecord>& records) {
  std::vector<PlannerSummary> out;
  for (const auto& id : planner_order(records)) {
    PlannerSummary s;
    s.planner_id = id;
    double wmq = 0, calls = 0, ptok = 0, ctok = 0, malformed = 0;
    for (const auto& r : records) {
      if (r.planner_id != id) continue;
      ++s.runs;
      s.successes += r.success ? 1 : 0;
      wmq += static_cast<double>(charged_wmq(r));
      calls += static_cast<double>(r.llm_calls);
      ptok += static_cast<double>(r.prompt_tokens);
      ctok += static_cast<double>(r.completion_tokens);
      malformed += static_cast<double>(r.malformed_actions);
      if (r.optimal) {
        ++s.optimal_known;
        s.optimal_count += *r.optimal ? 1 : 0;
      }
    }
    const double n = static_cast<double>(s.runs);
    s.success_rate = static_cast<double>(s.successes) / n;
    s.success_se = std::sqrt(s.success_rate * (1 - s.success_rate) / n);
    s.mean_wmq = wmq / n;
    s.optimal_rate = s.optimal_known ? static_cast<double>(s.optimal_count) / static_cast<double>(s.optimal_known) : 0;
    s.mean_llm_calls = calls / n;
    s.mean_prompt_tokens = ptok / n;
    s.mean_completion_tokens = ctok / n;
    s.mean_malformed_actions = malformed / n;
    out.push_back(s);
  }
  return out;
}

std::string summary_csv(const std::vector<PlannerSummary>& summary) {
  std::string out =
      "planner_id,runs,successes,success_rate,success_se,mean_wmq,optimal_known,optimal_count,optimal_rate,"
      "mean_llm_calls,mean_prompt_tokens,mean_completion_tokens,mean_malformed_actions\n";
  for (const auto& s : summary) {
    out += csv_field(s.planner_id) + ',' + std::to_string(s.runs) + ',' + std::to_string(s.successes) + ',' +
           fixed(s.success_rate) + ',' + fixed(s.success_se) + ',' + fixed(s.mean_wmq) + ',' +
           std::to_string(s.optimal_known) + ',' + std::to_string(s.optimal_count) + ',' + fixed(s.optimal_rate) +
           ',' + fixed(s.mean_llm_calls) + ',' + fixed(s.mean_prompt_tokens) + ',' +
           fixed(s.mean_completion_tokens) + ',' + fixed(s.mean_malformed_actions) + '\n';
  }
  return out;
}

std::vector<HistogramBin> wmq_histogram(const std::vector<RunRecord>& records) {
  std::vector<HistogramBin> out;
  for (const auto& id : planner_order(records)) {
    std::size_t budget = 0, max_success = 0;
    bool unlimited = false;
    for (const auto& r : records) {
      if (r.planner_id != id) continue;
      budget = std::max(budget, r.budget);
      unlimited = unlimited || r.budget == 0;
      if (r.success) max_success = std::max(max_success, r.wmq_used);
    }
    if (unlimited) {
      std::vector<std::size_t> counts(max_success + 1, 0);
      std::size_t failures = 0;
      for (const auto& r : records) {
        if (r.planner_id != id) continue;
        if (r.success) {
          ++counts[r.wmq_used];
        } else {
          ++failures;
        }
      }
      for (std::size_t b = 0; b < counts.size(); ++b) out.push_back({id, std::to_string(b), counts[b]});
      out.push_back({id, "fail", failures});
    } else {
      std::vector<std::size_t> counts(budget + 1, 0);
      for (const auto& r : records) {
        if (r.planner_id != id) continue;
        ++counts[r.success ? std::min(r.wmq_used, budget) : budget];
      }
      for (std::size_t b = 0; b < counts.size(); ++b) out.push_back({id, std::to_string(b), counts[b]});
    }
  }
  return out;
}

std::string histogram_csv(const std::vector<HistogramBin>& bins) {
  std::string out = "planner_id,wmq_bin,count\n";
  for (const auto& b : bins) out += csv_field(b.planner_id) + ',' + b.bin + ',' + std::to_string(b.count) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

PlannerSpec planner_from_type(const std::string& id, const std::string& type) {
  static const std::map<std::string, PlannerKind> kinds = {
      {"toi_bfs", PlannerKind::ToiBfs},         {"toi_dfs", PlannerKind::ToiDfs},
      {"boomerang", PlannerKind::Boomerang},    {"react", PlannerKind::React},
      {"react_select", PlannerKind::ReactSelect}, {"reflexion", PlannerKind::Reflexion},
      {"io", PlannerKind::Io},                  {"io_cot", PlannerKind::IoCot},
      {"io_p", PlannerKind::IoP},               {"io_cot_p", PlannerKind::IoCotP},
      {"astar", PlannerKind::BestFirst},        {"wastar", PlannerKind::BestFirst},
      {"gbfs", PlannerKind::BestFirst},
  };
  auto it = kinds.find(type);
  if (it == kinds.end()) throw ConfigError("planner '" + id + "': unknown type '" + type + "'");
  PlannerSpec p;
  p.id = id;
  p.kind = it->second;
  if (type == "wastar") p.weight = 3.0;
  if (type == "gbfs") p.weight = kGreedy;
  return p;
}

void SuiteConfig::validate() const {
  if (planners.empty()) throw ConfigError("no planners configured");
  if (problems.empty()) throw ConfigError("no problems configured");
  if (seeds.empty()) throw ConfigError("no seeds configured");
  if (parallelism == 0) throw ConfigError("parallelism must be at least 1");
  std::set<std::string> ids;
  for (const auto& p : planners) {
    if (!ids.insert(p.id).second) throw ConfigError("duplicate planner id '" + p.id + "'");
    if (p.kind == PlannerKind::BestFirst) {
      if (!(p.weight >= 1.0)) throw ConfigError("planner '" + p.id + "': weight must be >= 1");
      continue;
    }
    if (p.k == 0 || p.b == 0) throw ConfigError("planner '" + p.id + "': k and b must be positive");
    if (p.policy == PolicyKind::Llm && llm.mode == LlmMode::None) {
      throw ConfigError("planner '" + p.id + "' uses the llm policy but [llm] mode is none");
    }
  }
  std::set<std::string> pids;
  for (const auto& p : problems) {
    if (!pids.insert(p.id).second) throw ConfigError("duplicate problem id '" + p.id + "'");
  }
  if ((llm.mode == LlmMode::Replay || llm.mode == LlmMode::Record) && llm.transcript.empty()) {
    throw ConfigError("[llm] transcript is required in replay and record modes");
  }
  if (llm.mode != LlmMode::None) {
    try {
      llm.client.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("[llm] ") + e.what());
    }
  }
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Section = std::map<std::string, std::string>;

std::vector<std::pair<std::string, Section>> parse_ini(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  std::vector<std::pair<std::string, Section>> out;
  for (const auto& [name, section] : tree) {
    if (!section.data().empty()) throw ConfigError("config: key '" + name + "' outside any section");
    Section s;
    for (const auto& [key, value] : section) {
      std::string v = value.data();
      if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
      s.emplace(key, v);
    }
    out.emplace_back(name, std::move(s));
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class SectionReader {
 public:
  SectionReader(std::string name, Section s) : name_(std::move(name)), s_(std::move(s)) {}

  std::optional<std::string> str(const std::string& key) {
    auto it = s_.find(key);
    if (it == s_.end()) return std::nullopt;
    std::string v = it->second;
    s_.erase(it);
    return v;
  }
  template <typename T>
  std::optional<T> number(const std::string& key) {
    auto v = str(key);
    if (!v) return std::nullopt;
    try {
      std::size_t used = 0;
      T out;
      if constexpr (std::is_floating_point_v<T>) {
        out = static_cast<T>(std::stod(*v, &used));
      } else {
        if (!v->empty() && (*v)[0] == '-') throw std::invalid_argument("negative");
        out = static_cast<T>(std::stoull(*v, &used));
      }
      if (used != v->size()) throw std::invalid_argument("trailing");
      return out;
    } catch (const std::exception&) {
      throw ConfigError("[" + name_ + "] " + key + ": not a valid number '" + *v + "'");
    }
  }
  std::optional<bool> boolean(const std::string& key) {
    auto v = str(key);
    if (!v) return std::nullopt;
    if (*v == "true") return true;
    if (*v == "false") return false;
    throw ConfigError("[" + name_ + "] " + key + ": expected true or false");
  }
  void finish() const {
    if (!s_.empty()) throw ConfigError("[" + name_ + "] unknown key '" + s_.begin()->first + "'");
  }

 private:
  std::string name_;
  Section s_;
};

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::string> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  ::globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw ConfigError("glob failed for '" + pattern + "'");
  if (out.empty()) throw ConfigError("pattern '" + pattern + "' matched no files");
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

SuiteConfig parse_suite_config(const std::string& text, const std::string& base_dir) {
  SuiteConfig cfg;
  bool have_suite = false;
  for (auto& [name, section] : parse_ini(text)) {
    SectionReader r(name, section);
    if (name == "suite") {
      have_suite = true;
      if (auto v = r.str("name")) cfg.name = *v;
      if (auto v = r.number<std::size_t>("budget")) cfg.budget = *v;
      if (auto v = r.str("seeds")) {
        cfg.seeds.clear();
        for (const auto& s : split_list(*v)) {
          try {
            cfg.seeds.push_back(std::stoull(s));
          } catch (const std::exception&) {
            throw ConfigError("[suite] seeds: not a number '" + s + "'");
          }
        }
      }
      if (auto v = r.number<std::size_t>("parallelism")) cfg.parallelism = *v;
      if (auto v = r.number<std::size_t>("optimal_state_cap")) cfg.optimal_state_cap = *v;
      if (auto v = r.str("output_dir")) cfg.output_dir = resolve(base_dir, *v);
      const auto domain = r.str("domain");
      if (auto v = r.str("problems")) {
        if (!domain) throw ConfigError("[suite] problems requires domain");
        const std::string domain_text = slurp(resolve(base_dir, *domain));
        for (const auto& pattern : split_list(*v)) {
          for (const auto& file : expand_glob(resolve(base_dir, pattern))) {
            ProblemSource p;
            p.id = fs::path(file).stem().string();
            p.domain_pddl = domain_text;
            p.problem_pddl = slurp(file);
            p.origin = file;
            cfg.problems.push_back(std::move(p));
          }
        }
      } else if (domain) {
        throw ConfigError("[suite] domain given without problems");
      }
      const auto gen_blocks = r.number<std::size_t>("generate_blocks");
      const auto gen_count = r.number<std::size_t>("generate_count");
      const auto gen_seed = r.number<std::uint64_t>("generate_seed");
      if (gen_blocks || gen_count || gen_seed) {
        if (!gen_blocks || !gen_count) throw ConfigError("[suite] generate_blocks and generate_count go together");
        if (*gen_blocks < 2 || *gen_blocks > 8) throw ConfigError("[suite] generate_blocks must be 2..8");
        for (std::size_t i = 0; i < *gen_count; ++i) {
          cfg.problems.push_back(gen_blocksworld(*gen_blocks, gen_seed.value_or(0) + i));
        }
      }
    } else if (name == "llm") {
      if (auto v = r.str("mode")) {
        static const std::map<std::string, LlmMode> modes = {
            {"none", LlmMode::None}, {"replay", LlmMode::Replay}, {"record", LlmMode::Record}, {"live", LlmMode::Live}};
        auto it = modes.find(*v);
        if (it == modes.end()) throw ConfigError("[llm] mode must be none, replay, record or live");
        cfg.llm.mode = it->second;
      }
      if (auto v = r.str("transcript")) cfg.llm.transcript = resolve(base_dir, *v);
      if (auto v = r.str("base_url")) cfg.llm.client.base_url = *v;
      if (auto v = r.str("model")) cfg.llm.client.model = *v;
      if (auto v = r.number<double>("temperature")) cfg.llm.client.temperature = *v;
      if (auto v = r.number<std::size_t>("max_retries")) cfg.llm.client.max_retries = *v;
      if (auto v = r.number<std::size_t>("timeout_ms")) cfg.llm.client.timeout = std::chrono::milliseconds(*v);
      if (auto v = r.number<std::size_t>("max_attempts")) cfg.llm.policy.max_attempts = *v;
      if (auto v = r.boolean("translate_states")) cfg.llm.policy.translate_states = *v;
      if (auto v = r.number<std::size_t>("history_char_cap")) cfg.llm.policy.history_char_cap = *v;
      if (auto v = r.str("in_context_example")) cfg.llm.policy.in_context_example = slurp(resolve(base_dir, *v));
    } else if (name.rfind("planners.", 0) == 0) {
      const std::string id = name.substr(9);
      if (id.empty()) throw ConfigError("planner section needs an id: [planners.<id>]");
      const auto type = r.str("type");
      if (!type) throw ConfigError("[" + name + "] type is required");
      PlannerSpec p = planner_from_type(id, *type);
      if (auto v = r.str("policy")) {
        if (*v == "llm") {
          p.policy = PolicyKind::Llm;
        } else if (*v == "oracle") {
          p.policy = PolicyKind::Oracle;
        } else if (*v == "random") {
          p.policy = PolicyKind::Random;
        } else {
          throw ConfigError("[" + name + "] policy must be llm, oracle or random");
        }
      }
      if (auto v = r.number<std::size_t>("T")) p.T = *v;
      if (auto v = r.number<std::size_t>("k")) p.k = *v;
      if (auto v = r.number<std::size_t>("b")) p.b = *v;
      if (auto v = r.str("v_min")) {
        auto rating = rating_from_label(*v);
        if (!rating) throw ConfigError("[" + name + "] v_min must be sure, maybe or impossible");
        p.v_min = rating->value;
      }
      if (auto v = r.str("heuristic")) {
        auto h = heuristic_from_string(*v);
        if (!h) throw ConfigError("[" + name + "] heuristic must be goal_count, h_add or h_ff");
        p.heuristic = *h;
      }
      if (auto v = r.number<double>("weight")) p.weight = *v;
      cfg.planners.push_back(p);
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
    r.finish();
  }
  if (!have_suite) throw ConfigError("missing [suite] section");
  cfg.validate();
  return cfg;
}

SuiteConfig load_suite_config(const std::string& path) {
  return parse_suite_config(slurp(path), fs::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Execution

std::string run_id_for(const std::string& problem_id, const std::string& planner_id, std::uint64_t seed) {
  return problem_id + "/" + planner_id + "/s" + std::to_string(seed);
}

namespace {

PlanStyle io_style(PlannerKind k) {
  switch (k) {
    case PlannerKind::IoCot: return PlanStyle::IoCot;
    case PlannerKind::IoP: return PlanStyle::IoP;
    case PlannerKind::IoCotP: return PlanStyle::IoCotP;
    default: return PlanStyle::Io;
  }
}

}  // namespace

RunRecord run_single(const ProblemSource& problem, const Task& task, const PlannerSpec& planner,
                     std::uint64_t seed, std::size_t budget, std::optional<std::size_t> optimal_length,
                     const std::shared_ptr<ChatClient>& client, const LlmPolicyOptions& llm_options) {
  RunRecord rec;
  rec.problem_id = problem.id;
  rec.planner_id = planner.id;
  rec.seed = seed;
  rec.budget = budget;
  rec.optimal_length = optimal_length;

  const auto t0 = std::chrono::steady_clock::now();
  PlannerOutcome o;
  WorldModel world(task, budget);
  try {
    if (planner.kind == PlannerKind::BestFirst) {
      o = run_best_first(world, planner.heuristic, planner.weight);
    } else {
      std::unique_ptr<Policy> policy;
      switch (planner.policy) {
        case PolicyKind::Oracle: policy = std::make_unique<OraclePolicy>(task); break;
        case PolicyKind::Random: policy = std::make_unique<RandomPolicy>(task, seed); break;
        case PolicyKind::Llm:
          if (!client) throw PolicyFailure("no LLM client configured");
          policy = std::make_unique<LlmPolicy>(
              task, std::make_shared<LlmSession>(client, run_id_for(problem.id, planner.id, seed)), llm_options);
          break;
      }
      const WorldContext ctx = context_for_domain(*task.problem->domain);
      ToiOptions toi;
      if (planner.T) toi.T = planner.T;
      toi.k = planner.k;
      toi.b = planner.b;
      toi.v_min = planner.v_min;
      switch (planner.kind) {
        case PlannerKind::ToiBfs: o = run_toi_bfs(*policy, world, ctx, toi); break;
        case PlannerKind::ToiDfs: o = run_toi_dfs(*policy, world, ctx, toi); break;
        case PlannerKind::Boomerang: o = run_boomerang(*policy, world, ctx, planner.T ? planner.T : 20); break;
        case PlannerKind::React: o = run_react(*policy, world, ctx, planner.T); break;
        case PlannerKind::ReactSelect: o = run_react_select(*policy, world, ctx, planner.T); break;
        case PlannerKind::Reflexion: o = run_reflexion(*policy, world, ctx, planner.T); break;
        case PlannerKind::Io:
        case PlannerKind::IoCot:
        case PlannerKind::IoP:
        case PlannerKind::IoCotP: o = run_io(*policy, world, ctx, io_style(planner.kind)); break;
        case PlannerKind::BestFirst: break;
      }
    }
  } catch (const std::exception& e) {
    // planners map their own failures; anything reaching here is a run error
    o = PlannerOutcome{};
    o.failure_reason = FailureReason::PolicyFailure;
    o.detail = e.what();
    o.wmq_used = world.ledger().used;
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  rec.success = o.success;
  rec.wmq_used = o.wmq_used;
  rec.llm_calls = o.llm_calls;
  rec.prompt_tokens = o.prompt_tokens;
  rec.completion_tokens = o.completion_tokens;
  rec.malformed_actions = o.malformed_actions;
  rec.history_truncated = o.history_truncated;
  rec.failure_reason = o.failure_reason;
  rec.detail = o.detail;
  if (o.success && o.plan) {
    rec.plan_length = o.plan->size();
    for (ActionId a : *o.plan) rec.plan.push_back(task.action(a).key);
  }
  if (optimal_length) rec.optimal = o.success && rec.plan_length == optimal_length;
  return rec;
}

SuiteResult run_suite(const SuiteConfig& cfg, const SuiteHooks& hooks) {
  cfg.validate();

  // Everything that can fail as configuration happens before any run.
  std::vector<Task> tasks;
  for (const auto& p : cfg.problems) {
    try {
      tasks.push_back(load_task(p.domain_pddl, p.problem_pddl));
    } catch (const std::exception& e) {
      throw ConfigError("problem '" + p.id + "': " + e.what());
    }
  }
  std::shared_ptr<ChatClient> client;
  switch (cfg.llm.mode) {
    case LlmMode::None: break;
    case LlmMode::Replay:
      try {
        client = std::make_shared<ReplayChatClient>(read_transcript(cfg.llm.transcript), cfg.llm.client.model,
                                                    cfg.llm.client.temperature);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("[llm] transcript: ") + e.what());
      }
      break;
    case LlmMode::Record:
    case LlmMode::Live: {
      std::shared_ptr<ChatClient> inner = hooks.live_client;
      if (!inner) inner = std::make_shared<HttpChatClient>(cfg.llm.client);
      if (cfg.llm.mode == LlmMode::Record) {
        fs::path dir = fs::path(cfg.llm.transcript).parent_path();
        if (!dir.empty()) fs::create_directories(dir);
        client = std::make_shared<RecordingChatClient>(inner, cfg.llm.transcript);
      } else {
        client = inner;
      }
      break;
    }
  }

  std::vector<std::optional<std::size_t>> optimal(cfg.problems.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) optimal[i] = optimal_length_oracle(tasks[i], cfg.optimal_state_cap);

  struct Job {
    std::size_t problem, planner;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < cfg.problems.size(); ++p) {
    for (std::size_t q = 0; q < cfg.planners.size(); ++q) {
      for (auto seed : cfg.seeds) jobs.push_back({p, q, seed});
    }
  }

  std::ofstream jsonl;
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    jsonl.open(fs::path(cfg.output_dir) / "records.jsonl", std::ios::trunc);
    if (!jsonl) throw std::runtime_error("cannot write records.jsonl in '" + cfg.output_dir + "'");
  }

  SuiteResult result;
  result.records.resize(jobs.size());
  std::mutex out_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& j = jobs[i];
      RunRecord rec = run_single(cfg.problems[j.problem], tasks[j.problem], cfg.planners[j.planner], j.seed,
                                 cfg.budget, optimal[j.problem], client, cfg.llm.policy);
      std::lock_guard<std::mutex> lock(out_mu);
      if (jsonl.is_open()) jsonl << record_to_json_line(rec) << '\n' << std::flush;
      result.records[i] = std::move(rec);
    }
  };
  const std::size_t threads = std::min(cfg.parallelism, jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  result.summary = summarize(result.records);
  result.histogram = wmq_histogram(result.records);
  if (!cfg.output_dir.empty()) {
    auto write = [&](const char* name, const std::string& text) {
      std::ofstream f(fs::path(cfg.output_dir) / name, std::ios::binary | std::ios::trunc);
      f << text;
      if (!f) throw std::runtime_error(std::string("cannot write ") + name);
    };
    write("records.csv", records_csv(result.records));
    write("summary.csv", summary_csv(result.summary));
    write("histogram.csv", histogram_csv(result.histogram));
  }
  return result;
}

}  // namespace queryplan
