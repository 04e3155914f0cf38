#pragma once

// Reference implementations used only by tests. They share no code with the
// library beyond the parsed Domain structure: atoms are plain strings, states
// are std::set<std::string>, and everything is recomputed from scratch.

#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "queryplan/pddl.hpp"

namespace qp_test {

using StrState = std::set<std::string>;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string data_path(const std::string& rel) { return std::string(QP_DATA_DIR) + "/" + rel; }

inline std::string bw_domain() { return read_file(data_path("domains/blocksworld/domain.pddl")); }

inline StrState to_strings(const queryplan::State& s) {
  StrState out;
  for (auto id : s.atoms()) out.insert(s.table().key(id));
  return out;
}

// Substitutes a binding into one template: "pred(x,y)".
inline std::string instantiate(const queryplan::Domain& d, const queryplan::AtomTemplate& t,
                               const std::vector<std::string>& binding) {
  std::string out = d.predicates.at(t.predicate).name + "(";
  for (std::size_t i = 0; i < t.args.size(); ++i) {
    if (i) out += ",";
    if (t.args[i].kind == queryplan::Term::Kind::Parameter) {
      out += binding.at(t.args[i].index);
    } else {
      out += d.constants.at(t.args[i].index).name;
    }
  }
  return out + ")";
}

/// Evaluates schema `schema` with object names `binding` on `s`; nullopt when
/// a precondition fails.
inline std::optional<StrState> naive_apply(const queryplan::Domain& d, const queryplan::ActionSchema& schema,
                                           const std::vector<std::string>& binding, const StrState& s) {
  for (const auto& p : schema.preconditions) {
    if (!s.count(instantiate(d, p, binding))) return std::nullopt;
  }
  StrState next = s;
  for (const auto& t : schema.delete_effects) next.erase(instantiate(d, t, binding));
  for (const auto& t : schema.add_effects) next.insert(instantiate(d, t, binding));
  return next;
}

/// Atom-string rendering of a Blocksworld tower configuration. Each tower is
/// listed bottom to top.
inline std::string bw_init_atoms(const std::vector<std::vector<std::string>>& towers) {
  std::string out = "(handempty)";
  for (const auto& t : towers) {
    out += " (ontable " + t.front() + ")";
    for (std::size_t i = 1; i < t.size(); ++i) out += " (on " + t[i] + " " + t[i - 1] + ")";
    out += " (clear " + t.back() + ")";
  }
  return out;
}

/// Every arrangement of `blocks` into unordered stacks (Lah-number many).
inline std::vector<std::vector<std::vector<std::string>>> all_tower_sets(const std::vector<std::string>& blocks) {
  std::vector<std::vector<std::vector<std::string>>> out;
  if (blocks.empty()) {
    out.push_back({});
    return out;
  }
  // Every arrangement of n blocks arises exactly once from one of n-1 blocks
  // by inserting the last block at some position or as a new tower.
  std::vector<std::string> rest(blocks.begin(), blocks.end() - 1);
  const std::string& b = blocks.back();
  for (const auto& config : all_tower_sets(rest)) {
    auto fresh = config;
    fresh.push_back({b});
    out.push_back(fresh);
    for (std::size_t t = 0; t < config.size(); ++t) {
      for (std::size_t pos = 0; pos <= config[t].size(); ++pos) {
        auto c = config;
        c[t].insert(c[t].begin() + static_cast<long>(pos), b);
        out.push_back(c);
      }
    }
  }
  return out;
}

inline std::string bw_problem(const std::vector<std::string>& blocks,
                              const std::vector<std::vector<std::string>>& towers,
                              const std::string& goal_atoms) {
  std::string objs;
  for (const auto& b : blocks) objs += " " + b;
  return "(define (problem t) (:domain blocksworld-4ops) (:objects" + objs + ") (:init " +
         bw_init_atoms(towers) + ") (:goal (and " + goal_atoms + ")))";
}

inline std::vector<std::string> block_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + i)));
  return out;
}

/// Every (schema, object-name binding) over `objects` for the domain, ignoring
/// types (untyped Blocksworld only).
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> all_bindings(
    const queryplan::Domain& d, const std::vector<std::string>& objects) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> out;
  for (std::size_t si = 0; si < d.schemas.size(); ++si) {
    const std::size_t arity = d.schemas[si].params.size();
    if (arity > 0 && objects.empty()) continue;
    std::vector<std::size_t> idx(arity, 0);
    while (true) {
      std::vector<std::string> b;
      for (auto i : idx) b.push_back(objects[i]);
      out.emplace_back(si, b);
      std::size_t k = 0;
      while (k < arity && ++idx[k] == objects.size()) idx[k++] = 0;
      if (k == arity) break;
    }
  }
  return out;
}

/// Optimal plan length by BFS over string states with naive semantics.
inline std::optional<std::size_t> naive_optimal_length(const queryplan::Domain& d,
                                                       const std::vector<std::string>& objects,
                                                       const StrState& init, const StrState& goal) {
  auto sat = [&](const StrState& s) {
    for (const auto& g : goal) {
      if (!s.count(g)) return false;
    }
    return true;
  };
  const auto bindings = all_bindings(d, objects);
  std::map<StrState, std::size_t> dist{{init, 0}};
  std::deque<StrState> q{init};
  while (!q.empty()) {
    StrState s = q.front();
    q.pop_front();
    if (sat(s)) return dist[s];
    for (const auto& [si, b] : bindings) {
      auto n = naive_apply(d, d.schemas[si], b, s);
      if (n && !dist.count(*n)) {
        dist[*n] = dist[s] + 1;
        q.push_back(*n);
      }
    }
  }
  return std::nullopt;
}

/// Optimal delete-relaxed plan length (h+) by BFS over relaxed fact sets.
inline std::optional<std::size_t> brute_force_h_plus(const queryplan::Domain& d,
                                                     const std::vector<std::string>& objects,
                                                     const StrState& init, const StrState& goal) {
  queryplan::Domain relaxed = d;
  for (auto& s : relaxed.schemas) s.delete_effects.clear();
  return naive_optimal_length(relaxed, objects, init, goal);
}

}  // namespace qp_test
