#pragma once

// STRIPS subset of PDDL (:strips + :typing): parsing, grounding and exact
// action semantics. Every ground atom of a problem is interned up front in
// lexicographic order of its key, so sorted id vectors order the same way as
// the canonical string form.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace queryplan {

using ObjectId = std::uint32_t;
using AtomId = std::uint32_t;
using ActionId = std::uint32_t;

inline constexpr std::string_view kDefaultType = "default";
inline constexpr std::string_view kObjectType = "object";

// ---------------------------------------------------------------------------
// Errors

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, std::string token,
             const std::string& message);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& token() const noexcept { return token_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string token_;
};

class UnsupportedFeature : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GroundingExplosion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownAction : public std::runtime_error {
 public:
  explicit UnknownAction(std::string text);
  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

// ---------------------------------------------------------------------------
// Domain

struct PredicateSig {
  std::string name;
  std::vector<std::string> param_types;

  std::size_t arity() const noexcept { return param_types.size(); }
};

/// Argument of an atom template: a schema parameter or a domain constant.
struct Term {
  enum class Kind : std::uint8_t { Parameter, Constant };
  Kind kind = Kind::Parameter;
  std::uint32_t index = 0;  // parameter position, or ObjectId for constants
};

struct AtomTemplate {
  std::uint32_t predicate = 0;
  std::vector<Term> args;
};

struct TypedName {
  std::string name;
  std::string type;
};

struct ActionSchema {
  std::string name;
  std::vector<TypedName> params;
  std::vector<AtomTemplate> preconditions;
  std::vector<AtomTemplate> add_effects;
  std::vector<AtomTemplate> delete_effects;
};

struct Domain {
  std::string name;
  std::vector<std::string> requirements;
  bool typed = false;
  // child -> parent; every chain ends at "object".
  std::map<std::string, std::string> type_parent;
  std::vector<TypedName> constants;
  std::vector<PredicateSig> predicates;
  std::vector<ActionSchema> schemas;

  /// True when `type` equals `ancestor` or inherits from it.
  bool is_subtype(std::string_view type, std::string_view ancestor) const;
  std::optional<std::uint32_t> find_predicate(std::string_view name) const;
};

// ---------------------------------------------------------------------------
// Ground atoms and states

struct GroundAtom {
  std::uint32_t predicate = 0;
  std::vector<ObjectId> args;

  bool operator==(const GroundAtom&) const = default;
};

/// All type-consistent ground atoms of one problem, ids assigned in
/// lexicographic order of their keys (`pred(a,b)`).
class AtomTable {
 public:
  AtomTable(std::shared_ptr<const Domain> domain,
            std::vector<TypedName> objects, std::size_t cap);

  std::size_t size() const noexcept { return keys_.size(); }
  /// `on(a,b)`; used for canonical keys and ordering.
  const std::string& key(AtomId id) const { return keys_.at(id); }
  /// `on(a:default,b:default)`; the form shown in prompts and feedback.
  const std::string& display(AtomId id) const { return displays_.at(id); }
  const GroundAtom& atom(AtomId id) const { return atoms_.at(id); }

  std::optional<AtomId> find(const GroundAtom& atom) const;
  std::optional<AtomId> find_key(std::string_view key) const;

  const Domain& domain() const noexcept { return *domain_; }
  const std::vector<TypedName>& objects() const noexcept { return objects_; }
  std::optional<ObjectId> find_object(std::string_view name) const;
  /// Objects whose type conforms to `type`, in declaration order.
  std::vector<ObjectId> objects_of_type(std::string_view type) const;

  std::string render(const GroundAtom& atom, bool with_types) const;

 private:
  std::shared_ptr<const Domain> domain_;
  std::vector<TypedName> objects_;
  std::unordered_map<std::string, ObjectId> object_index_;
  std::vector<GroundAtom> atoms_;
  std::vector<std::string> keys_;
  std::vector<std::string> displays_;
  std::unordered_map<std::string, AtomId> key_index_;
};

/// Sorted, duplicate-free atom ids.
using AtomSet = std::vector<AtomId>;

AtomSet make_atom_set(std::vector<AtomId> ids);
bool is_subset(std::span<const AtomId> sub, std::span<const AtomId> super);

class State {
 public:
  State() = default;
  State(std::shared_ptr<const AtomTable> table, AtomSet atoms);

  std::span<const AtomId> atoms() const noexcept { return atoms_; }
  const AtomSet& atom_set() const noexcept { return atoms_; }
  bool contains(AtomId id) const;
  std::size_t size() const noexcept { return atoms_.size(); }

  /// Atom keys sorted lexicographically and joined with '|'.
  std::string canonical_key() const;
  /// `on(a:default,b:default), clear(a:default), ...` in canonical order.
  std::string describe() const;

  const AtomTable& table() const { return *table_; }
  const std::shared_ptr<const AtomTable>& table_ptr() const noexcept {
    return table_;
  }

  std::size_t hash() const noexcept;

  friend bool operator==(const State& a, const State& b) noexcept {
    return a.atoms_ == b.atoms_;
  }

 private:
  std::shared_ptr<const AtomTable> table_;
  AtomSet atoms_;
};

struct StateHash {
  std::size_t operator()(const State& s) const noexcept { return s.hash(); }
};

// ---------------------------------------------------------------------------
// Problems and ground actions

struct ProblemInstance {
  std::string name;
  std::shared_ptr<const Domain> domain;
  std::shared_ptr<const AtomTable> atoms;
  State init;
  AtomSet goal;

  const std::vector<TypedName>& objects() const { return atoms->objects(); }
  std::string describe_goal() const;
};

struct GroundAction {
  ActionId id = 0;
  std::uint32_t schema = 0;
  std::vector<ObjectId> binding;
  AtomSet pre;
  AtomSet add;
  AtomSet del;
  std::string display_name;  // stack(a:default,b:default)
  std::string key;           // stack(a,b)
};

struct Inapplicable {
  AtomSet missing;
};

using ApplyResult = std::variant<State, Inapplicable>;

/// A problem together with its ground action set; the unit every other
/// module works against.
struct Task {
  std::shared_ptr<const ProblemInstance> problem;
  std::vector<GroundAction> actions;  // ordered by display_name
  std::unordered_map<std::string, ActionId> by_key;

  const State& init() const { return problem->init; }
  const AtomSet& goal() const { return problem->goal; }
  const GroundAction& action(ActionId id) const { return actions.at(id); }
  const std::string& name(ActionId id) const { return actions.at(id).display_name; }
};

inline constexpr std::size_t kDefaultGroundingCap = 1'000'000;

Domain parse_domain(std::string_view domain_text);
ProblemInstance parse_problem(std::shared_ptr<const Domain> domain,
                              std::string_view problem_text,
                              std::size_t atom_cap = kDefaultGroundingCap);
ProblemInstance parse_pddl(std::string_view domain_text,
                           std::string_view problem_text);

std::vector<GroundAction> ground_problem(
    const ProblemInstance& problem, std::size_t cap = kDefaultGroundingCap);

Task make_task(std::shared_ptr<const ProblemInstance> problem,
               std::size_t cap = kDefaultGroundingCap);
Task load_task(std::string_view domain_text, std::string_view problem_text);

ApplyResult apply_action(const State& s, const GroundAction& a);
bool applicable(const State& s, const GroundAction& a);
bool satisfies_goal(const State& s, std::span<const AtomId> goal);

/// Actions applicable in `s`, in ground-set order.
std::vector<ActionId> applicable_actions(const Task& task, const State& s);

/// Normalizes `text` (whitespace, `:type` annotations, case) and looks it up in
/// the ground set. Throws UnknownAction.
ActionId parse_action_string(std::string_view text, const Task& task);

/// Keys of `atoms` rendered with types, comma-separated.
std::string describe_atoms(const AtomTable& table, std::span<const AtomId> atoms);

/// Serializes a problem back to PDDL text.
std::string write_problem_pddl(const ProblemInstance& problem);

}  // namespace queryplan
