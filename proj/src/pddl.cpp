#include "queryplan/pddl.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <sstream>

namespace queryplan {

ParseError::ParseError(std::size_t line, std::size_t column, std::string token,
                       const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + message +
                         (token.empty() ? "" : " (at '" + token + "')")),
      line_(line),
      column_(column),
      token_(std::move(token)) {}

UnknownAction::UnknownAction(std::string text)
    : std::runtime_error("unknown action '" + text + "'"), text_(std::move(text)) {}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// ---------------------------------------------------------------------------
// S-expressions

struct SExpr {
  bool is_list = false;
  std::string atom;
  std::vector<SExpr> items;
  std::size_t line = 0;
  std::size_t column = 0;

  bool is_atom(std::string_view value) const { return !is_list && atom == value; }
};

[[noreturn]] void fail(const SExpr& at, const std::string& message) {
  throw ParseError(at.line, at.column, at.is_list ? "(" : at.atom, message);
}

class SExprReader {
 public:
  explicit SExprReader(std::string_view text) : text_(text) {}

  SExpr read_document() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError(line_, column_, "", "empty input");
    SExpr root = read();
    skip_space();
    if (pos_ < text_.size()) {
      throw ParseError(line_, column_, std::string(1, text_[pos_]),
                       "trailing input after top-level expression");
    }
    return root;
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  SExpr read() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError(line_, column_, "", "unexpected end of input");
    SExpr node;
    node.line = line_;
    node.column = column_;
    const char c = text_[pos_];
    if (c == ')') throw ParseError(line_, column_, ")", "unexpected ')'");
    if (c == '(') {
      node.is_list = true;
      advance();
      for (;;) {
        skip_space();
        if (pos_ >= text_.size()) {
          throw ParseError(node.line, node.column, "(", "unbalanced '('");
        }
        if (text_[pos_] == ')') {
          advance();
          break;
        }
        node.items.push_back(read());
      }
      return node;
    }
    std::string token;
    while (pos_ < text_.size()) {
      const char ch = text_[pos_];
      if (ch == '(' || ch == ')' || ch == ';' ||
          std::isspace(static_cast<unsigned char>(ch))) {
        break;
      }
      token.push_back(ch);
      advance();
    }
    node.atom = lower(token);
    return node;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

const SExpr& expect_list(const SExpr& e, const std::string& what) {
  if (!e.is_list) fail(e, "expected " + what);
  return e;
}

const std::string& expect_name(const SExpr& e, const std::string& what) {
  if (e.is_list || e.atom.empty()) fail(e, "expected " + what);
  return e.atom;
}

struct TypedEntry {
  const SExpr* node;
  std::string name;
  std::string type;
};

// `a b - t c` ; untyped trailing names receive `fallback`.
std::vector<TypedEntry> parse_typed_list(const SExpr& list, std::size_t first,
                                         const std::string& fallback) {
  std::vector<TypedEntry> out;
  std::vector<TypedEntry> pending;
  for (std::size_t i = first; i < list.items.size(); ++i) {
    const SExpr& item = list.items[i];
    if (item.is_list) fail(item, "unexpected list in typed list");
    if (item.atom == "-") {
      if (i + 1 >= list.items.size()) fail(item, "missing type after '-'");
      const SExpr& type = list.items[++i];
      if (type.is_list) {
        if (!type.items.empty() && type.items.front().is_atom("either")) {
          throw UnsupportedFeature("'either' types are not supported");
        }
        fail(type, "expected type name");
      }
      if (pending.empty()) fail(item, "'-' without preceding names");
      for (auto& p : pending) {
        p.type = type.atom;
        out.push_back(std::move(p));
      }
      pending.clear();
    } else {
      pending.push_back({&item, item.atom, {}});
    }
  }
  for (auto& p : pending) {
    p.type = fallback;
    out.push_back(std::move(p));
  }
  return out;
}

bool is_requirement_supported(std::string_view r) {
  return r == ":strips" || r == ":typing";
}

struct SchemaScope {
  const Domain& domain;
  const ActionSchema& schema;
};

Term resolve_term(const SExpr& e, const SchemaScope& scope) {
  const std::string& name = expect_name(e, "term");
  if (name.front() == '?') {
    for (std::uint32_t i = 0; i < scope.schema.params.size(); ++i) {
      if (scope.schema.params[i].name == name) return {Term::Kind::Parameter, i};
    }
    fail(e, "variable not declared in :parameters");
  }
  for (std::uint32_t i = 0; i < scope.domain.constants.size(); ++i) {
    if (scope.domain.constants[i].name == name) return {Term::Kind::Constant, i};
  }
  fail(e, "unknown constant");
}

AtomTemplate parse_atom_template(const SExpr& e, const SchemaScope& scope) {
  expect_list(e, "atom");
  if (e.items.empty()) fail(e, "empty atom");
  const std::string& pred = expect_name(e.items.front(), "predicate name");
  if (pred == "=") throw UnsupportedFeature("equality atoms are not supported");
  auto index = scope.domain.find_predicate(pred);
  if (!index) fail(e.items.front(), "undeclared predicate");
  const PredicateSig& sig = scope.domain.predicates[*index];
  if (e.items.size() - 1 != sig.arity()) {
    fail(e, "predicate '" + pred + "' expects " + std::to_string(sig.arity()) +
                " argument(s)");
  }
  AtomTemplate atom;
  atom.predicate = *index;
  for (std::size_t i = 1; i < e.items.size(); ++i) {
    atom.args.push_back(resolve_term(e.items[i], scope));
  }
  return atom;
}

void reject_connective(const SExpr& e) {
  if (!e.is_list || e.items.empty() || e.items.front().is_list) return;
  const std::string& head = e.items.front().atom;
  static const std::set<std::string> unsupported = {
      "or", "imply", "exists", "forall", "when", "increase", "decrease",
      "assign", "scale-up", "scale-down"};
  if (unsupported.count(head) != 0u) {
    throw UnsupportedFeature("'" + head + "' is not supported (STRIPS subset only)");
  }
}

void collect_precondition(const SExpr& e, const SchemaScope& scope,
                          std::vector<AtomTemplate>& out) {
  expect_list(e, "precondition");
  if (e.items.empty()) return;
  if (e.items.front().is_atom("and")) {
    for (std::size_t i = 1; i < e.items.size(); ++i) {
      collect_precondition(e.items[i], scope, out);
    }
    return;
  }
  if (e.items.front().is_atom("not")) {
    throw UnsupportedFeature("negative preconditions are not supported");
  }
  reject_connective(e);
  out.push_back(parse_atom_template(e, scope));
}

void collect_effect(const SExpr& e, const SchemaScope& scope, ActionSchema& schema) {
  expect_list(e, "effect");
  if (e.items.empty()) return;
  if (e.items.front().is_atom("and")) {
    for (std::size_t i = 1; i < e.items.size(); ++i) collect_effect(e.items[i], scope, schema);
    return;
  }
  if (e.items.front().is_atom("not")) {
    if (e.items.size() != 2) fail(e, "malformed negative effect");
    reject_connective(e.items[1]);
    schema.delete_effects.push_back(parse_atom_template(e.items[1], scope));
    return;
  }
  reject_connective(e);
  schema.add_effects.push_back(parse_atom_template(e, scope));
}

ActionSchema parse_action(const SExpr& e, const Domain& domain) {
  if (e.items.size() < 2) fail(e, "malformed :action");
  ActionSchema schema;
  schema.name = expect_name(e.items[1], "action name");
  const SExpr* precondition = nullptr;
  const SExpr* effect = nullptr;
  bool have_params = false;
  const std::string fallback = domain.typed ? std::string(kObjectType)
                                            : std::string(kDefaultType);
  for (std::size_t i = 2; i < e.items.size(); ++i) {
    const SExpr& key = e.items[i];
    const std::string& k = expect_name(key, "action keyword");
    if (i + 1 >= e.items.size()) fail(key, "missing value for " + k);
    const SExpr& value = e.items[++i];
    if (k == ":parameters") {
      expect_list(value, "parameter list");
      for (auto& p : parse_typed_list(value, 0, fallback)) {
        if (p.name.empty() || p.name.front() != '?') fail(*p.node, "parameter must start with '?'");
        if (domain.typed && p.type != kObjectType && !domain.type_parent.count(p.type)) {
          fail(*p.node, "undeclared type '" + p.type + "'");
        }
        schema.params.push_back({p.name, p.type});
      }
      have_params = true;
    } else if (k == ":precondition") {
      precondition = &value;
    } else if (k == ":effect") {
      effect = &value;
    } else {
      fail(key, "unsupported action keyword");
    }
  }
  (void)have_params;
  SchemaScope scope{domain, schema};
  std::vector<AtomTemplate> pre;
  if (precondition != nullptr) collect_precondition(*precondition, scope, pre);
  schema.preconditions = std::move(pre);
  if (effect != nullptr) collect_effect(*effect, scope, schema);
  return schema;
}

}  // namespace

// ---------------------------------------------------------------------------
// Domain

bool Domain::is_subtype(std::string_view type, std::string_view ancestor) const {
  if (ancestor == kObjectType || ancestor == kDefaultType) return true;
  std::string current(type);
  for (std::size_t guard = 0; guard <= type_parent.size(); ++guard) {
    if (current == ancestor) return true;
    auto it = type_parent.find(current);
    if (it == type_parent.end()) return false;
    current = it->second;
  }
  return false;
}

std::optional<std::uint32_t> Domain::find_predicate(std::string_view name) const {
  for (std::uint32_t i = 0; i < predicates.size(); ++i) {
    if (predicates[i].name == name) return i;
  }
  return std::nullopt;
}

Domain parse_domain(std::string_view domain_text) {
  const SExpr root = SExprReader(domain_text).read_document();
  expect_list(root, "(define ...)");
  if (root.items.size() < 2 || !root.items[0].is_atom("define")) fail(root, "expected (define ...)");
  const SExpr& header = expect_list(root.items[1], "(domain <name>)");
  if (header.items.size() != 2 || !header.items[0].is_atom("domain")) {
    fail(header, "expected (domain <name>)");
  }
  Domain domain;
  domain.name = expect_name(header.items[1], "domain name");

  // :requirements and :types first; later sections depend on them.
  std::vector<const SExpr*> sections;
  for (std::size_t i = 2; i < root.items.size(); ++i) {
    const SExpr& s = expect_list(root.items[i], "domain section");
    if (s.items.empty()) fail(s, "empty section");
    sections.push_back(&s);
  }
  for (const SExpr* s : sections) {
    const std::string& key = expect_name(s->items[0], "section keyword");
    if (key == ":requirements") {
      for (std::size_t i = 1; i < s->items.size(); ++i) {
        const std::string& r = expect_name(s->items[i], "requirement");
        if (!is_requirement_supported(r)) {
          throw UnsupportedFeature("requirement " + r + " is not supported (only :strips, :typing)");
        }
        domain.requirements.push_back(r);
        if (r == ":typing") domain.typed = true;
      }
    } else if (key == ":types") {
      domain.typed = true;
    }
  }
  for (const SExpr* s : sections) {
    if (!s->items[0].is_atom(":types")) continue;
    for (auto& t : parse_typed_list(*s, 1, std::string(kObjectType))) {
      if (t.name == kObjectType) continue;
      domain.type_parent[t.name] = t.type;
    }
    for (const auto& [child, parent] : domain.type_parent) {
      if (parent != kObjectType && !domain.type_parent.count(parent)) {
        domain.type_parent[parent] = std::string(kObjectType);
      }
      (void)child;
    }
  }
  const std::string fallback = domain.typed ? std::string(kObjectType) : std::string(kDefaultType);
  auto check_type = [&](const TypedEntry& e) {
    if (!domain.typed) return;
    if (e.type != kObjectType && !domain.type_parent.count(e.type)) {
      fail(*e.node, "undeclared type '" + e.type + "'");
    }
  };
  for (const SExpr* s : sections) {
    const std::string& key = s->items[0].atom;
    if (key == ":requirements" || key == ":types") continue;
    if (key == ":constants") {
      for (auto& c : parse_typed_list(*s, 1, fallback)) {
        check_type(c);
        domain.constants.push_back({c.name, c.type});
      }
    } else if (key == ":predicates") {
      for (std::size_t i = 1; i < s->items.size(); ++i) {
        const SExpr& p = expect_list(s->items[i], "predicate declaration");
        if (p.items.empty()) fail(p, "empty predicate declaration");
        PredicateSig sig;
        sig.name = expect_name(p.items[0], "predicate name");
        if (domain.find_predicate(sig.name)) fail(p.items[0], "duplicate predicate");
        for (auto& param : parse_typed_list(p, 1, fallback)) {
          check_type(param);
          sig.param_types.push_back(param.type);
        }
        domain.predicates.push_back(std::move(sig));
      }
    } else if (key == ":action") {
      domain.schemas.push_back(parse_action(*s, domain));
    } else if (key == ":functions" || key == ":derived" || key == ":durative-action" ||
               key == ":constraints") {
      throw UnsupportedFeature("section " + key + " is not supported");
    } else {
      fail(s->items[0], "unknown domain section");
    }
  }
  return domain;
}

// ---------------------------------------------------------------------------
// AtomTable

namespace {

template <typename Fn>
void for_each_binding(const std::vector<std::vector<ObjectId>>& domains, Fn&& fn) {
  for (const auto& d : domains) {
    if (d.empty()) return;
  }
  std::vector<std::size_t> cursor(domains.size(), 0);
  std::vector<ObjectId> binding(domains.size());
  for (;;) {
    for (std::size_t i = 0; i < domains.size(); ++i) binding[i] = domains[i][cursor[i]];
    fn(binding);
    std::size_t i = domains.size();
    while (i > 0) {
      --i;
      if (++cursor[i] < domains[i].size()) break;
      cursor[i] = 0;
      if (i == 0) return;
    }
    if (domains.empty()) return;
  }
}

std::size_t binding_count(const std::vector<std::vector<ObjectId>>& domains, std::size_t cap) {
  std::size_t n = 1;
  for (const auto& d : domains) {
    if (d.empty()) return 0;
    if (n > cap / d.size() + 1) return cap + 1;
    n *= d.size();
  }
  return n;
}

}  // namespace

AtomTable::AtomTable(std::shared_ptr<const Domain> domain, std::vector<TypedName> objects,
                     std::size_t cap)
    : domain_(std::move(domain)), objects_(std::move(objects)) {
  for (ObjectId i = 0; i < objects_.size(); ++i) object_index_.emplace(objects_[i].name, i);

  std::vector<GroundAtom> atoms;
  for (std::uint32_t p = 0; p < domain_->predicates.size(); ++p) {
    const PredicateSig& sig = domain_->predicates[p];
    std::vector<std::vector<ObjectId>> domains;
    for (const auto& t : sig.param_types) domains.push_back(objects_of_type(t));
    if (atoms.size() + binding_count(domains, cap) > cap) {
      throw GroundingExplosion("ground atom count exceeds cap of " + std::to_string(cap));
    }
    for_each_binding(domains, [&](const std::vector<ObjectId>& b) {
      atoms.push_back({p, b});
    });
  }
  std::vector<std::string> keys;
  keys.reserve(atoms.size());
  for (const auto& a : atoms) keys.push_back(render(a, false));
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  atoms_.reserve(atoms.size());
  for (std::size_t idx : order) {
    const auto id = static_cast<AtomId>(atoms_.size());
    atoms_.push_back(atoms[idx]);
    keys_.push_back(keys[idx]);
    displays_.push_back(render(atoms[idx], true));
    key_index_.emplace(keys_.back(), id);
  }
}

std::string AtomTable::render(const GroundAtom& atom, bool with_types) const {
  std::string out = domain_->predicates.at(atom.predicate).name;
  out.push_back('(');
  for (std::size_t i = 0; i < atom.args.size(); ++i) {
    if (i > 0) out.push_back(',');
    const TypedName& obj = objects_.at(atom.args[i]);
    out += obj.name;
    if (with_types) {
      out.push_back(':');
      out += obj.type;
    }
  }
  out.push_back(')');
  return out;
}

std::optional<AtomId> AtomTable::find(const GroundAtom& atom) const {
  return find_key(render(atom, false));
}

std::optional<AtomId> AtomTable::find_key(std::string_view key) const {
  auto it = key_index_.find(std::string(key));
  if (it == key_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<ObjectId> AtomTable::find_object(std::string_view name) const {
  auto it = object_index_.find(std::string(name));
  if (it == object_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<ObjectId> AtomTable::objects_of_type(std::string_view type) const {
  std::vector<ObjectId> out;
  for (ObjectId i = 0; i < objects_.size(); ++i) {
    if (domain_->is_subtype(objects_[i].type, type)) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// State

AtomSet make_atom_set(std::vector<AtomId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

bool is_subset(std::span<const AtomId> sub, std::span<const AtomId> super) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

State::State(std::shared_ptr<const AtomTable> table, AtomSet atoms)
    : table_(std::move(table)), atoms_(std::move(atoms)) {}

bool State::contains(AtomId id) const {
  return std::binary_search(atoms_.begin(), atoms_.end(), id);
}

std::string State::canonical_key() const {
  std::string out;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (i > 0) out.push_back('|');
    out += table_->key(atoms_[i]);
  }
  return out;
}

std::string State::describe() const { return describe_atoms(*table_, atoms_); }

std::size_t State::hash() const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (AtomId id : atoms_) {
    h ^= id;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

std::string describe_atoms(const AtomTable& table, std::span<const AtomId> atoms) {
  std::string out;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (i > 0) out += ", ";
    out += table.display(atoms[i]);
  }
  return out;
}

std::string ProblemInstance::describe_goal() const { return describe_atoms(*atoms, goal); }

// ---------------------------------------------------------------------------
// Problem

namespace {

AtomId resolve_ground_atom(const SExpr& e, const AtomTable& table) {
  expect_list(e, "atom");
  if (e.items.empty()) fail(e, "empty atom");
  const std::string& pred = expect_name(e.items.front(), "predicate name");
  if (pred == "not") throw UnsupportedFeature("negative literals are not supported");
  if (pred == "=") throw UnsupportedFeature("equality atoms are not supported");
  reject_connective(e);
  const Domain& domain = table.domain();
  auto p = domain.find_predicate(pred);
  if (!p) fail(e.items.front(), "undeclared predicate");
  const PredicateSig& sig = domain.predicates[*p];
  if (e.items.size() - 1 != sig.arity()) {
    fail(e, "predicate '" + pred + "' expects " + std::to_string(sig.arity()) + " argument(s)");
  }
  GroundAtom atom{*p, {}};
  for (std::size_t i = 1; i < e.items.size(); ++i) {
    const std::string& name = expect_name(e.items[i], "object name");
    auto obj = table.find_object(name);
    if (!obj) fail(e.items[i], "undeclared object");
    if (!domain.is_subtype(table.objects()[*obj].type, sig.param_types[i - 1])) {
      fail(e.items[i], "object type does not match parameter type '" +
                           sig.param_types[i - 1] + "'");
    }
    atom.args.push_back(*obj);
  }
  auto id = table.find(atom);
  if (!id) fail(e, "atom is not type-consistent");
  return *id;
}

void collect_goal(const SExpr& e, const AtomTable& table, std::vector<AtomId>& out) {
  expect_list(e, "goal");
  if (e.items.empty()) return;
  if (e.items.front().is_atom("and")) {
    for (std::size_t i = 1; i < e.items.size(); ++i) collect_goal(e.items[i], table, out);
    return;
  }
  out.push_back(resolve_ground_atom(e, table));
}

}  // namespace

ProblemInstance parse_problem(std::shared_ptr<const Domain> domain,
                              std::string_view problem_text, std::size_t atom_cap) {
  const SExpr root = SExprReader(problem_text).read_document();
  expect_list(root, "(define ...)");
  if (root.items.size() < 2 || !root.items[0].is_atom("define")) fail(root, "expected (define ...)");
  const SExpr& header = expect_list(root.items[1], "(problem <name>)");
  if (header.items.size() != 2 || !header.items[0].is_atom("problem")) {
    fail(header, "expected (problem <name>)");
  }
  ProblemInstance problem;
  problem.name = expect_name(header.items[1], "problem name");
  problem.domain = domain;

  const std::string fallback = domain->typed ? std::string(kObjectType) : std::string(kDefaultType);
  std::vector<TypedName> objects = domain->constants;
  const SExpr* init = nullptr;
  const SExpr* goal = nullptr;
  for (std::size_t i = 2; i < root.items.size(); ++i) {
    const SExpr& s = expect_list(root.items[i], "problem section");
    if (s.items.empty()) fail(s, "empty section");
    const std::string& key = expect_name(s.items[0], "section keyword");
    if (key == ":domain") {
      continue;
    } else if (key == ":requirements") {
      for (std::size_t j = 1; j < s.items.size(); ++j) {
        const std::string& r = expect_name(s.items[j], "requirement");
        if (!is_requirement_supported(r)) throw UnsupportedFeature("requirement " + r + " is not supported");
      }
    } else if (key == ":objects") {
      for (auto& o : parse_typed_list(s, 1, fallback)) {
        if (domain->typed && o.type != kObjectType && !domain->type_parent.count(o.type)) {
          fail(*o.node, "undeclared type '" + o.type + "'");
        }
        for (const auto& existing : objects) {
          if (existing.name == o.name) fail(*o.node, "duplicate object");
        }
        objects.push_back({o.name, o.type});
      }
    } else if (key == ":init") {
      init = &s;
    } else if (key == ":goal") {
      if (s.items.size() != 2) fail(s, "expected a single goal formula");
      goal = &s.items[1];
    } else if (key == ":metric") {
      throw UnsupportedFeature(":metric is not supported");
    } else {
      fail(s.items[0], "unknown problem section");
    }
  }
  if (goal == nullptr) fail(root, "missing :goal");

  auto table = std::make_shared<const AtomTable>(domain, std::move(objects), atom_cap);
  std::vector<AtomId> init_atoms;
  if (init != nullptr) {
    for (std::size_t j = 1; j < init->items.size(); ++j) {
      init_atoms.push_back(resolve_ground_atom(init->items[j], *table));
    }
  }
  std::vector<AtomId> goal_atoms;
  collect_goal(*goal, *table, goal_atoms);
  problem.atoms = table;
  problem.init = State(table, make_atom_set(std::move(init_atoms)));
  problem.goal = make_atom_set(std::move(goal_atoms));
  return problem;
}

ProblemInstance parse_pddl(std::string_view domain_text, std::string_view problem_text) {
  auto domain = std::make_shared<const Domain>(parse_domain(domain_text));
  return parse_problem(std::move(domain), problem_text);
}

// ---------------------------------------------------------------------------
// Grounding

std::vector<GroundAction> ground_problem(const ProblemInstance& problem, std::size_t cap) {
  const AtomTable& table = *problem.atoms;
  const Domain& domain = *problem.domain;
  std::vector<GroundAction> out;

  for (std::uint32_t s = 0; s < domain.schemas.size(); ++s) {
    const ActionSchema& schema = domain.schemas[s];
    std::vector<std::vector<ObjectId>> domains;
    for (const auto& p : schema.params) domains.push_back(table.objects_of_type(p.type));
    if (out.size() + binding_count(domains, cap) > cap) {
      throw GroundingExplosion("ground action count exceeds cap of " + std::to_string(cap));
    }
    auto instantiate = [&](const AtomTemplate& t, const std::vector<ObjectId>& b)
        -> std::optional<AtomId> {
      GroundAtom atom{t.predicate, {}};
      for (const Term& term : t.args) {
        atom.args.push_back(term.kind == Term::Kind::Parameter ? b[term.index] : term.index);
      }
      return table.find(atom);
    };
    for_each_binding(domains, [&](const std::vector<ObjectId>& b) {
      GroundAction g;
      g.schema = s;
      g.binding = b;
      for (const auto& t : schema.preconditions) {
        auto id = instantiate(t, b);
        if (!id) return;  // precondition can never hold
        g.pre.push_back(*id);
      }
      for (const auto& t : schema.add_effects) {
        auto id = instantiate(t, b);
        if (!id) {
          throw UnsupportedFeature("action " + schema.name +
                                   " adds an atom that is not type-consistent");
        }
        g.add.push_back(*id);
      }
      for (const auto& t : schema.delete_effects) {
        if (auto id = instantiate(t, b)) g.del.push_back(*id);
      }
      g.pre = make_atom_set(std::move(g.pre));
      g.add = make_atom_set(std::move(g.add));
      g.del = make_atom_set(std::move(g.del));
      g.display_name = schema.name + "(";
      g.key = schema.name + "(";
      for (std::size_t i = 0; i < b.size(); ++i) {
        if (i > 0) {
          g.display_name.push_back(',');
          g.key.push_back(',');
        }
        const TypedName& obj = table.objects()[b[i]];
        g.display_name += obj.name + ":" + obj.type;
        g.key += obj.name;
      }
      g.display_name.push_back(')');
      g.key.push_back(')');
      out.push_back(std::move(g));
    });
  }
  std::sort(out.begin(), out.end(), [](const GroundAction& a, const GroundAction& b) {
    return a.display_name < b.display_name;
  });
  for (ActionId i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

Task make_task(std::shared_ptr<const ProblemInstance> problem, std::size_t cap) {
  Task task;
  task.actions = ground_problem(*problem, cap);
  for (const auto& a : task.actions) task.by_key.emplace(a.key, a.id);
  task.problem = std::move(problem);
  return task;
}

Task load_task(std::string_view domain_text, std::string_view problem_text) {
  return make_task(std::make_shared<const ProblemInstance>(parse_pddl(domain_text, problem_text)));
}

// ---------------------------------------------------------------------------
// Semantics

bool applicable(const State& s, const GroundAction& a) { return is_subset(a.pre, s.atoms()); }

ApplyResult apply_action(const State& s, const GroundAction& a) {
  if (!applicable(s, a)) {
    Inapplicable result;
    std::set_difference(a.pre.begin(), a.pre.end(), s.atoms().begin(), s.atoms().end(),
                        std::back_inserter(result.missing));
    return result;
  }
  AtomSet kept;
  kept.reserve(s.size());
  std::set_difference(s.atoms().begin(), s.atoms().end(), a.del.begin(), a.del.end(),
                      std::back_inserter(kept));
  AtomSet next;
  next.reserve(kept.size() + a.add.size());
  std::set_union(kept.begin(), kept.end(), a.add.begin(), a.add.end(), std::back_inserter(next));
  return State(s.table_ptr(), std::move(next));
}

bool satisfies_goal(const State& s, std::span<const AtomId> goal) {
  return is_subset(goal, s.atoms());
}

std::vector<ActionId> applicable_actions(const Task& task, const State& s) {
  std::vector<ActionId> out;
  for (const auto& a : task.actions) {
    if (applicable(s, a)) out.push_back(a.id);
  }
  return out;
}

ActionId parse_action_string(std::string_view text, const Task& task) {
  std::string raw(text);
  // trim
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  raw.erase(raw.begin(), std::find_if(raw.begin(), raw.end(), not_space));
  raw.erase(std::find_if(raw.rbegin(), raw.rend(), not_space).base(), raw.end());
  const std::string original = raw;

  std::string compact;
  for (char c : raw) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      compact.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  while (!compact.empty() && (compact.back() == '.' || compact.back() == ';')) compact.pop_back();
  if (compact.empty()) throw UnknownAction(original);

  std::string key;
  const auto open = compact.find('(');
  if (open == std::string::npos) {
    key = compact + "()";
  } else {
    if (compact.back() != ')' || open == 0) throw UnknownAction(original);
    key = compact.substr(0, open + 1);
    const std::string args = compact.substr(open + 1, compact.size() - open - 2);
    std::size_t start = 0;
    bool first = true;
    while (start <= args.size() && !args.empty()) {
      auto comma = args.find(',', start);
      std::string arg = args.substr(start, comma == std::string::npos ? std::string::npos
                                                                      : comma - start);
      std::string type;
      if (auto colon = arg.find(':'); colon != std::string::npos) {
        type = arg.substr(colon + 1);
        arg.resize(colon);
        if (type.empty() || type.find(':') != std::string::npos) throw UnknownAction(original);
      }
      if (arg.empty() || arg.find_first_of("()") != std::string::npos) {
        throw UnknownAction(original);
      }
      if (!type.empty()) {
        // An annotation must name the object's declared type.
        const auto& objs = task.problem->atoms->objects();
        auto obj = std::find_if(objs.begin(), objs.end(), [&](const auto& o) { return o.name == arg; });
        if (obj == objs.end() || obj->type != type) throw UnknownAction(original);
      }
      if (!first) key.push_back(',');
      key += arg;
      first = false;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    key.push_back(')');
  }
  auto it = task.by_key.find(key);
  if (it == task.by_key.end()) throw UnknownAction(original);
  return it->second;
}

std::string write_problem_pddl(const ProblemInstance& problem) {
  std::ostringstream out;
  const AtomTable& table = *problem.atoms;
  out << "(define (problem " << problem.name << ")\n";
  out << "  (:domain " << problem.domain->name << ")\n";
  out << "  (:objects";
  for (const auto& o : table.objects()) {
    bool is_constant = std::any_of(problem.domain->constants.begin(), problem.domain->constants.end(),
                                   [&](const TypedName& c) { return c.name == o.name; });
    if (is_constant) continue;
    out << ' ' << o.name;
    if (problem.domain->typed && o.type != kObjectType) out << " - " << o.type;
  }
  out << ")\n";
  auto write_atom = [&](AtomId id) {
    const GroundAtom& a = table.atom(id);
    out << '(' << problem.domain->predicates[a.predicate].name;
    for (ObjectId arg : a.args) out << ' ' << table.objects()[arg].name;
    out << ')';
  };
  out << "  (:init";
  for (AtomId id : problem.init.atoms()) {
    out << "\n    ";
    write_atom(id);
  }
  out << ")\n";
  out << "  (:goal (and";
  for (AtomId id : problem.goal) {
    out << "\n    ";
    write_atom(id);
  }
  out << ")))\n";
  return out.str();
}

}  // namespace queryplan
