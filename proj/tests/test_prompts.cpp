#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "queryplan/prompts.hpp"
#include "queryplan/random.hpp"
#include "support/oracles.hpp"
#include "support/prompt_fixtures.hpp"

using namespace queryplan;
using qp_test::golden_inputs;
using qp_test::golden_path;
using qp_test::render;
using qp_test::fuzz_corpus;

namespace {

Task three_blocks() {
  return load_task(qp_test::bw_domain(),
                   qp_test::read_file(qp_test::data_path("domains/blocksworld/three_blocks.pddl")));
}

Task eight_blocks() {
  return load_task(qp_test::bw_domain(),
                   qp_test::read_file(qp_test::data_path("domains/blocksworld/eight_blocks.pddl")));
}





// QP_UPDATE_GOLDEN=1 rewrites the files instead of comparing.
void check_golden(const std::string& name, const std::string& actual) {
  const std::string path = golden_path(name);
  if (const char* up = std::getenv("QP_UPDATE_GOLDEN"); up && std::string(up) == "1") {
    std::ofstream(path, std::ios::binary) << actual;
    return;
  }
  std::string expected;
  ASSERT_NO_THROW(expected = qp_test::read_file(path)) << path;
  EXPECT_EQ(actual, expected) << "golden mismatch: " << path;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST(PromptKinds, NamesRoundTrip) {
  std::set<std::string> seen;
  for (PromptKind k : kAllPromptKinds) {
    EXPECT_EQ(prompt_kind_from_string(to_string(k)), k);
    seen.insert(to_string(k));
  }
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_FALSE(prompt_kind_from_string("tot"));
}

TEST(Golden, AllTenKindsByteForByte) {
  Task t = three_blocks();
  const WorldContext ctx = context_for_domain(*t.problem->domain);
  for (PromptKind k : kAllPromptKinds) {
    SCOPED_TRACE(to_string(k));
    check_golden(to_string(k), render(build_prompt(k, golden_inputs(k, *t.problem->domain), ctx)));
  }
}

TEST(Golden, Translation) {
  Task t = three_blocks();
  const WorldContext ctx = context_for_domain(*t.problem->domain);
  std::string out = render(build_translation_prompt({"on(a:default,b:default)", "handempty()"},
                                                    {"a:default", "b:default"}, false, ctx));
  out += render(build_translation_prompt({"on(b:default,c:default)"}, {}, true, ctx));
  check_golden("translation", out);
}

// Skeleton lines typed independently of the library's templates.
TEST(Golden, PublishedSkeletonsPresent) {
  auto g = [](const char* name) { return qp_test::read_file(golden_path(name)); };
  const std::string boomerang = g("boomerang_plan");
  EXPECT_TRUE(contains(boomerang,
                       "You must propose a sequence of actions given previous interactions with the environment\n"
                       "from the starting state to the goal state.\n"));
  EXPECT_TRUE(contains(boomerang, "Optional[Error Feedback: ...]\nStates Visited: ...\n<action1>: ...\n"));
  EXPECT_TRUE(contains(boomerang, "Reflect: ...\nThink: ...\nAction Sequence: <action1>, <action2>, ..., <actionN>\n"));
  EXPECT_TRUE(contains(boomerang, "Note that the action sequence must always start from the 'Starting State' and "
                                  "end at the 'Goal State'.\n\nBelow is a description of the environment:\n"));
  EXPECT_TRUE(contains(boomerang, "The 4-operator version of the classic Blocksworld."));
  EXPECT_TRUE(contains(boomerang, "- unstack(x:default,y:default) where x is unstacked from the top of y"));

  const std::string propose = g("toi_propose");
  EXPECT_TRUE(contains(propose, "You will propose various options for actions that could be taken in the "
                                "environment to make progress towards the goal.\n"));
  EXPECT_TRUE(contains(propose, "Number of Actions: ...\nCurrent State: ...\nValid Actions: ...\nGoal State: ...\n"));
  EXPECT_TRUE(contains(propose, "Actions: <action1>, <action2>, ..., <actionN>\n"));
  EXPECT_TRUE(contains(propose, "Number of Actions: 2\nCurrent State:\n"));

  const std::string evaluate = g("toi_evaluate");
  EXPECT_TRUE(contains(evaluate, "You will evaluate the current state based on its likelihood to be on the path "
                                 "to the goal state.\n"));
  EXPECT_TRUE(contains(evaluate, "Think: ...\nRating: <sure/maybe/impossible>\n"));
  EXPECT_TRUE(contains(evaluate, "  - impossible: the current state is definitely not on the path to the goal state\n"));

  const std::string translation = g("translation");
  EXPECT_TRUE(contains(translation, "You are an assistant that summarizes PDDL predicates into natural language.\n"));
  EXPECT_TRUE(contains(translation, "It is important to incorporate all predicates and objects into the succinct "
                                    "summary.\n"));

  for (const char* io : {"io", "io_cot", "io_p", "io_cot_p"}) {
    EXPECT_TRUE(contains(g(io), "Action Sequence: <action1>, <action2>, ..., <actionN>\n")) << io;
  }
  EXPECT_TRUE(contains(g("io_p"), "Action Rules:\n"));
  EXPECT_FALSE(contains(g("io"), "Action Rules"));
  EXPECT_TRUE(contains(g("react_step"), "Action: <action>\n"));
  EXPECT_TRUE(contains(g("react_select"), "Query: state <number>, <action>\n"));
  EXPECT_TRUE(contains(g("reflexion"), "Feedback: state 0 was visited twice"));
}

TEST(Build, MissingFieldThrows) {
  Task t = three_blocks();
  const WorldContext ctx = context_for_domain(*t.problem->domain);
  for (PromptKind k : kAllPromptKinds) {
    PromptInputs in;
    EXPECT_THROW(build_prompt(k, in, ctx), MissingField) << to_string(k);
  }
  PromptInputs in = golden_inputs(PromptKind::ToiPropose, *t.problem->domain);
  in.num_actions.reset();
  EXPECT_THROW(build_prompt(PromptKind::ToiPropose, in, ctx), MissingField);
  EXPECT_THROW(build_translation_prompt({}, {}, false, ctx), MissingField);
}

TEST(Build, EmptyHistoryAndExample) {
  Task t = three_blocks();
  const WorldContext ctx = context_for_domain(*t.problem->domain);
  PromptInputs in = golden_inputs(PromptKind::BoomerangPlan, *t.problem->domain);
  in.history_text = "";
  in.error_feedback.reset();
  in.in_context_example = "EXAMPLE";
  Prompt p = build_prompt(PromptKind::BoomerangPlan, in, ctx);
  EXPECT_EQ(p.user.rfind("States Visited:\nStarting State:\n", 0), 0u);
  EXPECT_TRUE(p.system.size() > 9 && p.system.substr(p.system.size() - 9) == "\n\nEXAMPLE");
}

TEST(Context, GeneratedForUnknownDomain) {
  const std::string dom =
      "(define (domain lamps) (:requirements :strips) (:predicates (lit ?x) (off ?x))"
      " (:action switch :parameters (?x) :precondition (and (off ?x)) :effect (and (lit ?x) (not (off ?x)))))";
  Domain d = parse_domain(dom);
  WorldContext ctx = context_for_domain(d);
  EXPECT_TRUE(contains(ctx.text(), "lamps"));
  EXPECT_TRUE(contains(ctx.text(), "switch("));
  const std::string rules = describe_action_rules(d);
  EXPECT_TRUE(contains(rules, "off(")) << rules;
  EXPECT_TRUE(contains(rules, "lit(")) << rules;
}

TEST(Context, PublishedDomainsMatchByName) {
  for (const char* rel : {"domains/gripper/domain.pddl", "domains/logistics/domain.pddl"}) {
    Domain d = parse_domain(qp_test::read_file(qp_test::data_path(rel)));
    const std::string text = context_for_domain(d).text();
    EXPECT_FALSE(contains(text, "planning domain.")) << rel;
    EXPECT_NE(text.substr(0, 2), "  ") << rel;
  }
}

// ---------------------------------------------------------------------------
// Parsing

TEST(Parse, PublishedEightActionResponse) {
  Task t = eight_blocks();
  const std::string response = qp_test::kEightActionResponse;
  auto plan = parse_action_sequence(response, t);
  ASSERT_EQ(plan.size(), 8u);
  std::vector<std::string> keys;
  for (auto a : plan) keys.push_back(t.action(a).key);
  EXPECT_EQ(keys, (std::vector<std::string>{"unstack(d,g)", "put-down(d)", "unstack(h,e)", "put-down(h)",
                                            "pick-up(e)", "stack(e,a)", "pick-up(h)", "stack(h,e)"}));
}

TEST(Parse, ProposalAndRatingExamples) {
  Task t = eight_blocks();
  auto acts = parse_actions("Think: both help.\nActions: pick-up(a:default), unstack(d:default,g:default)", t);
  ASSERT_EQ(acts.size(), 2u);
  EXPECT_EQ(t.action(acts[1]).key, "unstack(d,g)");
  EXPECT_EQ(parse_rating("Think: hard to say.\nRating: maybe").value, RatingValue::Maybe);
  EXPECT_EQ(parse_rating("**Rating:** Sure.").value, RatingValue::Certain);
  EXPECT_EQ(parse_rating("Rating: impossible\n").value, RatingValue::Impossible);
}

TEST(Parse, LastMarkerWinsAndVariants) {
  Task t = three_blocks();
  auto p = parse_action_sequence("Action Sequence: pick-up(c)\nThink: no\nAction Sequence: [unstack(a,b), put-down(a).]", t);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(t.action(p[1]).key, "put-down(a)");
  auto bullets = parse_action_sequence("Action Sequence:\n- unstack(a,b)\n- put-down(a)\n\ntrailing words", t);
  EXPECT_EQ(bullets.size(), 2u);
  EXPECT_EQ(t.action(parse_single_action("Think: x\nAction: pick-up(c:default)", t)).key, "pick-up(c)");
  auto [ref, act] = parse_selection("Query: state 3, unstack(a:default,b:default)", t);
  EXPECT_EQ(ref, 3u);
  EXPECT_EQ(t.action(act).key, "unstack(a,b)");
  EXPECT_EQ(parse_reflection("Reflect: went in a loop.\nNext time stack first."),
            "went in a loop.\nNext time stack first.");
  EXPECT_EQ(split_action_list("stack(a,b), pick-up(c);"), (std::vector<std::string>{"stack(a,b)", "pick-up(c)"}));
}

TEST(Parse, SelectionErrors) {
  Task t = three_blocks();
  EXPECT_THROW(parse_selection("Query: 3, pick-up(c)", t), ResponseFormatError);
  EXPECT_THROW(parse_selection("Query: state , pick-up(c)", t), ResponseFormatError);
  EXPECT_THROW(parse_selection("Query: state 1234567890, pick-up(c)", t), ResponseFormatError);
  EXPECT_THROW(parse_selection("Query: state 1 pick-up(c)", t), ResponseFormatError);
  EXPECT_THROW(parse_selection("Query: state 1, pick-up(c), put-down(c)", t), ResponseFormatError);
  EXPECT_THROW(parse_single_action("Action: pick-up(c), put-down(c)", t), ResponseFormatError);
  EXPECT_THROW(parse_reflection("Reflect:   \n  "), ResponseFormatError);
}


TEST(Fuzz, MalformedCorpusYieldsStructuredErrors) {
  Task t = three_blocks();
  const auto corpus = fuzz_corpus();
  ASSERT_EQ(corpus.size(), 100u);
  std::size_t structured = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& c = corpus[i];
    try {
      if (c.rating) {
        (void)parse_rating(c.text);
      } else {
        (void)parse_action_sequence(c.text, t);
      }
      ADD_FAILURE() << "case " << i << " parsed: " << c.text;
    } catch (const ResponseFormatError&) {
      ++structured;
    } catch (const UnknownAction&) {
      ++structured;
    } catch (const std::exception& e) {
      ADD_FAILURE() << "case " << i << " unstructured error: " << e.what();
    }
  }
  EXPECT_EQ(structured, 100u);
}

TEST(Fuzz, RandomBytesNeverEscapeAsOtherErrors) {
  Task t = three_blocks();
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    std::string s = i % 2 ? "Action Sequence: " : "Rating: ";
    const std::size_t n = uniform_below(rng, 80);
    for (std::size_t j = 0; j < n; ++j) s.push_back(static_cast<char>(uniform_below(rng, 256)));
    for (auto fn : {0, 1, 2, 3}) {
      try {
        switch (fn) {
          case 0: (void)parse_action_sequence(s, t); break;
          case 1: (void)parse_rating(s); break;
          case 2: (void)parse_single_action(s, t); break;
          case 3: (void)parse_selection(s, t); break;
        }
      } catch (const ResponseFormatError&) {
      } catch (const UnknownAction&) {
      } catch (const std::exception& e) {
        ADD_FAILURE() << "unstructured: " << e.what();
      }
    }
  }
}
