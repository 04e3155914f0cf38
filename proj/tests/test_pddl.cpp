#include <gtest/gtest.h>

#include <algorithm>

#include "queryplan/pddl.hpp"
#include "support/oracles.hpp"

using namespace queryplan;
using qp_test::read_file;
using qp_test::data_path;

namespace {

Task three_blocks() {
  return load_task(qp_test::bw_domain(), read_file(data_path("domains/blocksworld/three_blocks.pddl")));
}

State state_of(const Task& t, const std::vector<std::string>& keys) {
  std::vector<AtomId> ids;
  for (const auto& k : keys) ids.push_back(*t.problem->atoms->find_key(k));
  return State(t.problem->atoms, make_atom_set(ids));
}

std::vector<std::string> keys_of(const State& s) {
  std::vector<std::string> out;
  for (auto id : s.atoms()) out.push_back(s.table().key(id));
  return out;
}

}  // namespace

TEST(Parse, BlocksworldDomainShape) {
  Domain d = parse_domain(qp_test::bw_domain());
  EXPECT_EQ(d.name, "blocksworld-4ops");
  EXPECT_FALSE(d.typed);
  ASSERT_EQ(d.schemas.size(), 4u);
  EXPECT_EQ(d.predicates.size(), 5u);
  std::vector<std::string> names;
  for (const auto& s : d.schemas) names.push_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"pick-up", "put-down", "stack", "unstack"}));
}

TEST(Parse, UntypedObjectsGetDefaultType) {
  Task t = three_blocks();
  for (const auto& o : t.problem->objects()) EXPECT_EQ(o.type, "default");
  EXPECT_EQ(t.problem->atoms->display(*t.problem->atoms->find_key("on(a,b)")), "on(a:default,b:default)");
}

TEST(Parse, UndeclaredGoalObjectIsParseError) {
  const std::string prob =
      "(define (problem p) (:domain blocksworld-4ops) (:objects a b)\n"
      "  (:init (handempty) (ontable a) (ontable b) (clear a) (clear b))\n"
      "  (:goal (and (on a z))))";
  try {
    parse_pddl(qp_test::bw_domain(), prob);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.token(), "z");
    EXPECT_EQ(e.line(), 3u);
    EXPECT_GT(e.column(), 1u);
  }
}

TEST(Parse, RejectsUnsupportedRequirementsAndNegation) {
  const std::string adl = "(define (domain d) (:requirements :strips :adl) (:predicates (p)))";
  EXPECT_THROW(parse_domain(adl), UnsupportedFeature);
  const std::string neg =
      "(define (domain d) (:requirements :strips) (:predicates (p) (q))"
      " (:action a :parameters () :precondition (and (not (p))) :effect (and (q))))";
  EXPECT_THROW(parse_domain(neg), UnsupportedFeature);
  const std::string cond =
      "(define (domain d) (:requirements :strips) (:predicates (p) (q))"
      " (:action a :parameters () :precondition (and (p)) :effect (when (p) (q))))";
  EXPECT_THROW(parse_domain(cond), UnsupportedFeature);
}

TEST(Parse, MalformedSyntaxReportsPosition) {
  try {
    parse_domain("(define (domain d)\n  (:predicates (p)");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GE(e.line(), 1u);
  }
  EXPECT_THROW(parse_domain("(define (domain d)) )"), ParseError);
}

TEST(Parse, GripperTyped) {
  Task t = load_task(read_file(data_path("domains/gripper/domain.pddl")),
                     read_file(data_path("domains/gripper/two_balls.pddl")));
  const Domain& d = *t.problem->domain;
  EXPECT_TRUE(d.typed);
  std::vector<std::string> names;
  for (const auto& s : d.schemas) names.push_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"move", "pick", "drop"}));
  // move: 1 robot x 2 x 2 rooms; pick/drop: 1 x 2 balls x 2 rooms x 2 grippers.
  EXPECT_EQ(t.actions.size(), 4u + 8u + 8u);
  EXPECT_NO_THROW(parse_action_string("move(robot1,room1,room2)", t));
}

TEST(Parse, LogisticsTypeHierarchy) {
  Task t = load_task(read_file(data_path("domains/logistics/domain.pddl")),
                     read_file(data_path("domains/logistics/two_cities.pddl")));
  EXPECT_FALSE(t.actions.empty());
  EXPECT_EQ(t.problem->domain->schemas.size(), 6u);
}

TEST(Ground, ThreeBlocksCount) {
  Task t = three_blocks();
  // 3 pick-up + 3 put-down + 9 stack + 9 unstack: repeated-variable bindings kept.
  EXPECT_EQ(t.actions.size(), 24u);
  EXPECT_TRUE(std::is_sorted(t.actions.begin(), t.actions.end(),
                             [](const auto& a, const auto& b) { return a.display_name < b.display_name; }));
  for (ActionId i = 0; i < t.actions.size(); ++i) EXPECT_EQ(t.actions[i].id, i);
}

TEST(Ground, SelfStackGeneratedButNeverApplicable) {
  const std::string prob =
      "(define (problem one) (:domain blocksworld-4ops) (:objects a)"
      " (:init (handempty) (ontable a) (clear a)) (:goal (and (ontable a))))";
  Task t = load_task(qp_test::bw_domain(), prob);
  EXPECT_EQ(t.actions.size(), 4u);
  ActionId sa = parse_action_string("stack(a,a)", t);
  ActionId ua = parse_action_string("unstack(a,a)", t);
  State held = std::get<State>(apply_action(t.init(), t.action(parse_action_string("pick-up(a)", t))));
  EXPECT_FALSE(applicable(t.init(), t.action(sa)));
  EXPECT_FALSE(applicable(held, t.action(sa)));
  EXPECT_FALSE(applicable(t.init(), t.action(ua)));
}

TEST(Ground, ZeroObjects) {
  const std::string prob =
      "(define (problem none) (:domain blocksworld-4ops) (:init (handempty)) (:goal (and (handempty))))";
  Task t = load_task(qp_test::bw_domain(), prob);
  EXPECT_TRUE(t.actions.empty());
}

TEST(Ground, ExplosionCap) {
  auto p = std::make_shared<const ProblemInstance>(
      parse_pddl(qp_test::bw_domain(), read_file(data_path("domains/blocksworld/three_blocks.pddl"))));
  EXPECT_THROW(ground_problem(*p, 10), GroundingExplosion);
}

TEST(Apply, HandExamples) {
  Task t = three_blocks();
  State s = state_of(t, {"ontable(a)", "ontable(b)", "clear(a)", "clear(b)", "handempty()"});
  auto r = apply_action(s, t.action(parse_action_string("pick-up(a)", t)));
  ASSERT_TRUE(std::holds_alternative<State>(r));
  auto got = keys_of(std::get<State>(r));
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::string>{"clear(b)", "holding(a)", "ontable(b)"}));

  State h = state_of(t, {"holding(a)", "ontable(b)", "clear(b)"});
  r = apply_action(h, t.action(parse_action_string("stack(a,b)", t)));
  ASSERT_TRUE(std::holds_alternative<State>(r));
  got = keys_of(std::get<State>(r));
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::string>{"clear(a)", "handempty()", "on(a,b)", "ontable(b)"}));

  r = apply_action(h, t.action(parse_action_string("pick-up(b)", t)));
  ASSERT_TRUE(std::holds_alternative<Inapplicable>(r));
  const auto& missing = std::get<Inapplicable>(r).missing;
  ASSERT_EQ(missing.size(), 1u);
  EXPECT_EQ(t.problem->atoms->key(missing[0]), "handempty()");
}

TEST(Apply, DeleteBeforeAdd) {
  const std::string dom =
      "(define (domain d) (:requirements :strips) (:predicates (p) (q))"
      " (:action flip :parameters () :precondition (and (p)) :effect (and (p) (q) (not (p)))))";
  const std::string prob = "(define (problem x) (:domain d) (:init (p)) (:goal (and (q))))";
  Task t = load_task(dom, prob);
  State next = std::get<State>(apply_action(t.init(), t.action(0)));
  EXPECT_EQ(keys_of(next), (std::vector<std::string>{"p()", "q()"}));
}

TEST(Apply, FramePropertyAndNaiveAgreement) {
  Task t = three_blocks();
  const Domain& d = *t.problem->domain;
  for (const auto& a : t.actions) {
    auto r = apply_action(t.init(), a);
    std::vector<std::string> names;
    for (auto o : a.binding) names.push_back(t.problem->objects()[o].name);
    auto naive = qp_test::naive_apply(d, d.schemas[a.schema], names, qp_test::to_strings(t.init()));
    ASSERT_EQ(naive.has_value(), std::holds_alternative<State>(r)) << a.display_name;
    if (!naive) continue;
    const State& next = std::get<State>(r);
    EXPECT_EQ(qp_test::to_strings(next), *naive);
    for (AtomId id = 0; id < t.problem->atoms->size(); ++id) {
      const bool touched = std::binary_search(a.add.begin(), a.add.end(), id) ||
                           std::binary_search(a.del.begin(), a.del.end(), id);
      if (!touched) EXPECT_EQ(t.init().contains(id), next.contains(id));
    }
  }
}

TEST(Goal, SubsetSemantics) {
  Task t = three_blocks();
  State s = state_of(t, {"on(b,c)"});
  EXPECT_TRUE(satisfies_goal(s, s.atoms()));
  State bigger = state_of(t, {"on(b,c)", "clear(b)", "handempty()"});
  EXPECT_TRUE(satisfies_goal(bigger, t.goal()));
  State swapped = state_of(t, {"on(c,b)"});
  EXPECT_FALSE(satisfies_goal(swapped, t.goal()));
  EXPECT_TRUE(satisfies_goal(s, AtomSet{}));
}

TEST(ActionString, NormalizationAndRoundTrip) {
  Task t = load_task(qp_test::bw_domain(), read_file(data_path("domains/blocksworld/eight_blocks.pddl")));
  const ActionId u = parse_action_string("unstack(d:default,g:default)", t);
  EXPECT_EQ(t.action(u).key, "unstack(d,g)");
  EXPECT_EQ(t.action(parse_action_string("pick-up(a)", t)).display_name, "pick-up(a:default)");
  EXPECT_EQ(parse_action_string("  UNSTACK( d , g ) ", t), u);
  try {
    parse_action_string("teleport(a)", t);
    FAIL();
  } catch (const UnknownAction& e) {
    EXPECT_EQ(e.text(), "teleport(a)");
  }
  for (const auto& a : t.actions) EXPECT_EQ(parse_action_string(a.display_name, t), a.id);
}

TEST(State, CanonicalKeyStableAndOrdered) {
  Task t = three_blocks();
  EXPECT_EQ(t.init().canonical_key(), "clear(a)|clear(c)|handempty()|on(a,b)|ontable(b)|ontable(c)");
  Task again = three_blocks();
  EXPECT_EQ(t.init().canonical_key(), again.init().canonical_key());
  EXPECT_EQ(t.init().describe(),
            "clear(a:default), clear(c:default), handempty(), on(a:default,b:default), "
            "ontable(b:default), ontable(c:default)");
}

TEST(State, MonotoneGoal) {
  Task t = three_blocks();
  State s = state_of(t, {"on(b,c)"});
  for (AtomId id = 0; id < t.problem->atoms->size(); ++id) {
    auto ids = s.atom_set();
    ids.push_back(id);
    State bigger(t.problem->atoms, make_atom_set(ids));
    EXPECT_TRUE(satisfies_goal(bigger, t.goal()));
  }
}

TEST(Write, ProblemRoundTrip) {
  Task t = three_blocks();
  const std::string text = write_problem_pddl(*t.problem);
  Task back = load_task(qp_test::bw_domain(), text);
  EXPECT_EQ(back.init().canonical_key(), t.init().canonical_key());
  EXPECT_EQ(back.problem->describe_goal(), t.problem->describe_goal());
}

TEST(Oracle, LahCounts) {
  EXPECT_EQ(qp_test::all_tower_sets(qp_test::block_names(2)).size(), 3u);
  EXPECT_EQ(qp_test::all_tower_sets(qp_test::block_names(3)).size(), 13u);
  EXPECT_EQ(qp_test::all_tower_sets(qp_test::block_names(4)).size(), 73u);
}
