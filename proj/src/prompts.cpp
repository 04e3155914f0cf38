#include "queryplan/prompts.hpp"

#include <algorithm>
#include <cctype>

namespace queryplan {

namespace {

// Published templates, up to the environment description.
constexpr std::string_view kTranslateHeader = R"(You are an assistant that summarizes PDDL predicates into natural language.

You will receive the following to summarize into natural language
Predicates: ...
Objects: ...

where
- 'Predicates' is a list of PDDL predicates
- 'Objects' is a list of objects

You may also receive the following:
Goal: ...

where
- 'Goal' is a list of PDDL predicates

It is important to incorporate all predicates and objects into the succinct summary.
An agent will be using this summary to understand the state of the environment and
if anything is missing, it may lead to confusion.

)";

constexpr std::string_view kBoomerangHeader = R"(You must propose a sequence of actions given previous interactions with the environment
from the starting state to the goal state.

You will receive the initial state and the goal as follows:
Optional[Error Feedback: ...]
States Visited: ...
<action1>: ...
<action2>: ...
...
<actionN>: ...
Starting State: ...
Valid Actions: ...
Goal State: ...

where
- 'States Visited' are the states you visited in your previous action sequence
  - This will be empty if this is your first action sequence
  - Each action will be followed by the state that resulted from executing that action
- 'Starting State' is the state you will start from
- 'Valid Actions' are the actions you can take in the starting state
- 'Goal State' is the state you need to reach to achieve the goal
- 'Error Feedback' includes feedback about either
  - the sequence of actions you proposed in the previous step included an invalid action
  - the sequence of actions you proposed in the previous step did not reach the goal state

Always format your response as follows:
Reflect: ...
Think: ...
Action Sequence: <action1>, <action2>, ..., <actionN>

where:
- 'Reflect' includes lessons learned about the rules of the environment
  - Upon receiving error feedback, reflect on the feedback and propose a new plan
    - If the action is invalid, first verify that the action isn't malformed
      - Refer to the action format in the environment description
    - If it isn't malformed, consider why the action is invalid at that state
  - Consider which action(s) in the previous sequence led to the error
- 'Think' includes your thought process for the next action sequence to propose
  - Use your current and previous reflections to inform the next action sequence
- 'Action Sequence' is the sequence of actions you propose to take in the environment from the starting state to the goal state
  - This sequence should be a comma-separated list of actions
  - Each action should be formatted to match the templates in the environment description.

Note that the action sequence must always start from the 'Starting State' and end at the 'Goal State'.

)";

constexpr std::string_view kToiProposeHeader = R"(You will propose various options for actions that could be taken in the environment to make progress towards the goal.

You will receive the initial state and the goal as follows:
Optional[Error Feedback: ...]
Number of Actions: ...
Current State: ...
Valid Actions: ...
Goal State: ...

where
- 'Number of Actions' is the number of actions you need to propose
- 'Current State' is the state you will start from
- 'Valid Actions' are the actions that can be executed in the current state
- 'Goal State' is the state you need to reach to achieve the goal
- 'Error Feedback' includes feedback about the actions you proposed in the previous step such as
  - the sequence of actions you proposed included an invalid action
  - the sequence of actions did not include the specified number of actions

Always format your response as follows:
Think: ...
Actions: <action1>, <action2>, ..., <actionN>

where:
- 'Think' includes reasoning about the actions you will propose to take
  - You should consider actions from the valid actions that will help you reach the goal state
- 'Actions' are <Number of Actions> actions that you propose to take at the current state
  - These actions should come directly from the valid actions
  - This sequence should be a comma-separated list of actions
  - The actions should be formatted exactly as they are in the environment description

)";

constexpr std::string_view kToiEvaluateHeader = R"(You will evaluate the current state based on its likelihood to be on the path to the goal state.

You will receive the initial state and the goal as follows:
Optional[Error Feedback: ...]
Current State: ...
Goal State: ...

where
- 'Current State' is the state you will evaluate
- 'Goal State' is the state you need to reach to achieve the goal
- 'Error Feedback' includes feedback about the evaluation you provided in the previous step such as
  - the evaluation you provided was not formatted correctly

Always format your response as follows:
Think: ...
Rating: <sure/maybe/impossible>

where:
- 'Think' includes reasoning about the likelihood of the current state being on the path to the goal state
  - You should consider the current state and the goal state
- 'Rating' is your evaluation of the current state based on the likelihood of it being on the path to the goal state
  - sure: the current state is definitely on the path to the goal state
  - maybe: the current state might be on the path to the goal state
  - impossible: the current state is definitely not on the path to the goal state


)";

constexpr std::string_view kReactStepHeader = R"(You will propose the next action to take in the environment to make progress towards the goal.

You will receive the current state and the goal as follows:
Optional[Error Feedback: ...]
History: ...
Current State: ...
Goal State: ...

where
- 'History' lists the actions you have taken so far, each followed by the response from the environment
  - This will be empty if this is your first action
  - An invalid action leaves the state unchanged
- 'Current State' is the state you will act from
- 'Goal State' is the state you need to reach to achieve the goal
- 'Error Feedback' includes feedback about the action you proposed in the previous step such as
  - the action you proposed was not formatted correctly
  - the action you proposed does not exist in the environment

Always format your response as follows:
Think: ...
Action: <action>

where:
- 'Think' includes reasoning about which action makes progress towards the goal state
  - Use the history to avoid repeating actions that were invalid
- 'Action' is the single action you propose to take at the current state
  - The action should be formatted exactly as in the environment description

)";

constexpr std::string_view kReactSelectHeader = R"(You will choose a state you already visited and an action to try from that state to make progress towards the goal.

You will receive the interaction history and the goal as follows:
Optional[Error Feedback: ...]
States Visited: ...
Queries: ...
Goal State: ...

where
- 'States Visited' lists every state reached so far, numbered in the order they were first visited
  - State 0 is the starting state
- 'Queries' lists the state and action pairs you tried so far, each followed by the response from the environment
  - This will be empty if this is your first query
- 'Goal State' is the state you need to reach to achieve the goal
- 'Error Feedback' includes feedback about the query you proposed in the previous step such as
  - the state number you chose does not exist
  - the action you proposed does not exist in the environment

Always format your response as follows:
Think: ...
Query: state <number>, <action>

where:
- 'Think' includes reasoning about which state and action make progress towards the goal state
  - You may return to any visited state, including one visited long ago
- 'Query' is the number of a visited state followed by the action to take from it
  - The action should be formatted exactly as in the environment description

)";

constexpr std::string_view kIoInputs = R"(You will receive the initial state and the goal as follows:
Starting State: ...
Goal State: ...

where
- 'Starting State' is the state you will start from
- 'Goal State' is the state you need to reach to achieve the goal
)";

constexpr std::string_view kIoRulesInputs = R"(You will receive the initial state and the goal as follows:
Action Rules: ...
Starting State: ...
Goal State: ...

where
- 'Action Rules' lists, for every action, the facts that must hold before it can be taken and how it changes the state
  - Actions with similar names can apply to different situations, so check the rules before choosing one
- 'Starting State' is the state you will start from
- 'Goal State' is the state you need to reach to achieve the goal
)";

constexpr std::string_view kSequenceBullets = R"(- 'Action Sequence' is the sequence of actions you propose to take in the environment from the starting state to the goal state
  - This sequence should be a comma-separated list of actions
  - Each action should be formatted to match the templates in the environment description.
)";

constexpr std::string_view kReflexionHeader = R"(You will reflect on a failed attempt to reach the goal in the environment.

You will receive the attempt and the goal as follows:
History: ...
Starting State: ...
Goal State: ...
Feedback: ...

where
- 'History' lists the actions taken in the attempt, each followed by the response from the environment
- 'Starting State' is the state the attempt started from and the state you will restart from
- 'Goal State' is the state you need to reach to achieve the goal
- 'Feedback' explains why the attempt was stopped, such as
  - a state was visited twice, meaning the actions went around in a cycle

Always format your response as follows:
Reflect: ...

where:
- 'Reflect' includes lessons learned about the rules of the environment and about the attempt
  - Consider which action(s) led back to a state that was already visited
  - Describe what to do differently after restarting from the starting state

)";

std::string io_header(bool cot, bool rules) {
  std::string h = "You must propose a sequence of actions from the starting state to the goal state.\n\n";
  h += rules ? kIoRulesInputs : kIoInputs;
  h += "\nAlways format your response as follows:\n";
  if (!cot) {
    h += "Action Sequence: <action1>, <action2>, ..., <actionN>\n\nwhere:\n";
  } else if (!rules) {
    h += "Think: ...\nAction Sequence: <action1>, <action2>, ..., <actionN>\n\nwhere:\n";
    h += "- 'Think' includes your step-by-step reasoning from the starting state to the goal state\n";
  } else {
    h += "Think: ...\n"
         "<action1>: <state after action1>\n"
         "Goal: ...\n"
         "<action2>: <state after action2>\n"
         "Goal: ...\n"
         "...\n"
         "Action Sequence: <action1>, <action2>, ..., <actionN>\n\nwhere:\n";
    h += "- 'Think' includes your step-by-step reasoning from the starting state to the goal state\n"
         "- After 'Think', write each action followed by the state that results from executing it\n"
         "  - Restate the goal state on a 'Goal' line after every action and resulting state pair\n"
         "  - Compare the resulting state with the goal state before writing the next action\n";
  }
  h += kSequenceBullets;
  h += "\nNote that the action sequence must always start from the 'Starting State' and end at the 'Goal State'.\n\n";
  return h;
}

const std::string& require(const std::optional<std::string>& field, const char* name, PromptKind kind) {
  if (!field) throw MissingField(std::string(to_string(kind)) + ": missing field '" + name + "'");
  return *field;
}

std::string system_text(std::string_view header, const WorldContext& ctx, const std::string& example) {
  std::string s(header);
  s += "Below is a description of the environment:\n";
  s += ctx.text();
  if (!example.empty()) s += "\n\n" + example;
  return s;
}

// Sections of the user message. Multi-line values start on the line after
// their label.
class UserText {
 public:
  void line(const std::string& text) { lines_.push_back(text); }
  void block(const std::string& label, const std::string& body) {
    lines_.push_back(label + ":");
    if (!body.empty()) lines_.push_back(body);
  }
  void feedback(const std::optional<std::string>& fb) {
    if (fb) lines_.push_back("Error Feedback: " + *fb);
  }
  void actions(const std::vector<std::string>& valid) {
    lines_.push_back("Valid Actions:");
    for (const auto& a : valid) lines_.push_back("- " + a);
  }
  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < lines_.size(); ++i) {
      if (i) out += '\n';
      out += lines_[i];
    }
    return out;
  }

 private:
  std::vector<std::string> lines_;
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_indent(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    std::size_t k = 0;
    while (k < line.size() && k < 2 && line[k] == ' ') ++k;
    line.remove_prefix(k);
    if (line.find_first_not_of(' ') == std::string_view::npos) line = {};
    out.append(line);
    if (nl < text.size()) out.push_back('\n');
    pos = nl + 1;
  }
  return out;
}

}  // namespace

const char* to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::BoomerangPlan: return "boomerang_plan";
    case PromptKind::ToiPropose: return "toi_propose";
    case PromptKind::ToiEvaluate: return "toi_evaluate";
    case PromptKind::ReactStep: return "react_step";
    case PromptKind::ReactSelect: return "react_select";
    case PromptKind::Io: return "io";
    case PromptKind::IoCot: return "io_cot";
    case PromptKind::IoP: return "io_p";
    case PromptKind::IoCotP: return "io_cot_p";
    case PromptKind::Reflexion: return "reflexion";
  }
  return "?";
}

std::optional<PromptKind> prompt_kind_from_string(std::string_view name) {
  for (PromptKind k : kAllPromptKinds) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

Prompt build_prompt(PromptKind kind, const PromptInputs& in, const WorldContext& ctx) {
  auto need_actions = [&]() -> const std::vector<std::string>& {
    if (!in.valid_actions) throw MissingField(std::string(to_string(kind)) + ": missing field 'valid_actions'");
    return *in.valid_actions;
  };
  Prompt p;
  UserText u;
  switch (kind) {
    case PromptKind::BoomerangPlan: {
      p.system = system_text(kBoomerangHeader, ctx, in.in_context_example);
      u.feedback(in.error_feedback);
      u.block("States Visited", require(in.history_text, "history_text", kind));
      u.block("Starting State", require(in.state_text, "state_text", kind));
      u.actions(need_actions());
      u.block("Goal State", require(in.goal_text, "goal_text", kind));
      break;
    }
    case PromptKind::ToiPropose: {
      if (!in.num_actions) throw MissingField("toi_propose: missing field 'num_actions'");
      p.system = system_text(kToiProposeHeader, ctx, in.in_context_example);
      u.feedback(in.error_feedback);
      u.line("Number of Actions: " + std::to_string(*in.num_actions));
      u.block("Current State", require(in.state_text, "state_text", kind));
      u.actions(need_actions());
      u.block("Goal State", require(in.goal_text, "goal_text", kind));
      break;
    }
    case PromptKind::ToiEvaluate: {
      p.system = system_text(kToiEvaluateHeader, ctx, in.in_context_example);
      u.feedback(in.error_feedback);
      u.block("Current State", require(in.state_text, "state_text", kind));
      u.block("Goal State", require(in.goal_text, "goal_text", kind));
      break;
    }
    case PromptKind::ReactStep: {
      p.system = system_text(kReactStepHeader, ctx, in.in_context_example);
      u.feedback(in.error_feedback);
      u.block("History", require(in.history_text, "history_text", kind));
      u.block("Current State", require(in.state_text, "state_text", kind));
      u.block("Goal State", require(in.goal_text, "goal_text", kind));
      break;
    }
    case PromptKind::ReactSelect: {
      p.system = system_text(kReactSelectHeader, ctx, in.in_context_example);
      u.feedback(in.error_feedback);
      u.block("States Visited", require(in.visited_text, "visited_text", kind));
      u.block("Queries", require(in.history_text, "history_text", kind));
      u.block("Goal State", require(in.goal_text, "goal_text", kind));
      break;
    }
    case PromptKind::Io:
    case PromptKind::IoCot:
    case PromptKind::IoP:
    case PromptKind::IoCotP: {
      const bool cot = kind == PromptKind::IoCot || kind == PromptKind::IoCotP;
      const bool rules = kind == PromptKind::IoP || kind == PromptKind::IoCotP;
      p.system = system_text(io_header(cot, rules), ctx, in.in_context_example);
      if (rules) u.block("Action Rules", require(in.action_rules, "action_rules", kind));
      u.block("Starting State", require(in.state_text, "state_text", kind));
      u.block("Goal State", require(in.goal_text, "goal_text", kind));
      break;
    }
    case PromptKind::Reflexion: {
      p.system = system_text(kReflexionHeader, ctx, in.in_context_example);
      u.block("History", require(in.history_text, "history_text", kind));
      u.block("Starting State", require(in.state_text, "state_text", kind));
      u.block("Goal State", require(in.goal_text, "goal_text", kind));
      u.line("Feedback: " + require(in.error_feedback, "error_feedback", kind));
      break;
    }
  }
  p.user = u.str();
  return p;
}

Prompt build_translation_prompt(const std::vector<std::string>& predicates,
                                const std::vector<std::string>& objects, bool is_goal,
                                const WorldContext& ctx) {
  if (predicates.empty()) throw MissingField("translation: no predicates to describe");
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += v[i];
    }
    return out;
  };
  Prompt p;
  p.system = system_text(kTranslateHeader, ctx, "");
  if (is_goal) {
    p.user = "Goal: " + join(predicates);
  } else {
    p.user = "Predicates: " + join(predicates) + "\nObjects: " + join(objects);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Contexts

namespace {

constexpr std::string_view kBlocksworldDescription =
    "The 4-operator version of the classic Blocksworld. This domain consists of a set of blocks, a table and a robot hand. The blocks can be on top of other blocks or on the table; a block that has nothing on it is clear; and the robot hand can hold one block or be empty. The goal is to find a plan to move from one configuration of blocks to another.";
constexpr std::string_view kBlocksworldActions = R"(The actions are formatted as follows:
- put-down(x:default) where x is the block to put down
- pick-up(x:default) where x is the block to pick up
- stack(x:default,y:default) where x is stacked on top of y
- unstack(x:default,y:default) where x is unstacked from the top of y)";

constexpr std::string_view kGrippersDescription =
    "  Given a robot with one or more gripper hands, transport a number of balls from their starting rooms to their destination rooms.";
constexpr std::string_view kGrippersActions = R"(  Examples of how some actions might be formatted are as follows:
  - move(robot1,room1,room2) to move robot robot1 from room room1 to room room2
  - pick(robot1,ball2,room3,gripper3) to have robot robot1 pick up ball ball2 using gripper gripper3 in room room3
  - drop(robot1,ball2,room3,gripper3) to have robot robot1 drop ball ball2 using gripper gripper3 in room room3)";

constexpr std::string_view kLogisticsDescription =
    "  Transport packages within cities via trucks, and between cities via airplanes. Locations within a city are directly connected (trucks can move between any two such locations), and so are the cities. In each city there is exactly one truck, each city has one location that serves as an airport.";
constexpr std::string_view kLogisticsActions = R"(  The actions are formatted as follows:
  - drive-truck(t0,l1-2,l3-2,c2) where t0 is a truck driving from location l1-2 to location l3-2 in city c2
  - fly-airplane(a0,l1-2,l3-4) where a0 is the airplane flying from the location l1-2 in city 2 to location l3-4 in city 4
  - load-airplane(p0,a1,l2-3) where p0 is the package loaded onto airplane a1 at location l2-3 in city 3
  - load-truck(p0,t1,l2-3) where p0 is the package loaded onto truck t1 at location l2-3 in city 3
  - unload-airplane(p0,a1,l2-3) where p0 is the package unloaded from airplane a1 at location l2-3 in city 3
  - unload-truck(p0,t1,l2-3) where p0 is the package unloaded from truck t1 at location l2-3 in city 3)";

std::string param_name(const std::string& var) {
  return var.empty() || var[0] != '?' ? var : var.substr(1);
}

std::string template_text(const Domain& d, const ActionSchema& s, const AtomTemplate& t) {
  std::string out = d.predicates.at(t.predicate).name + "(";
  for (std::size_t i = 0; i < t.args.size(); ++i) {
    if (i) out += ",";
    out += t.args[i].kind == Term::Kind::Parameter ? param_name(s.params.at(t.args[i].index).name)
                                                   : d.constants.at(t.args[i].index).name;
  }
  return out + ")";
}

std::string template_list(const Domain& d, const ActionSchema& s, const std::vector<AtomTemplate>& ts) {
  if (ts.empty()) return "nothing";
  std::string out;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i) out += ", ";
    out += template_text(d, s, ts[i]);
  }
  return out;
}

std::string schema_signature(const ActionSchema& s, bool typed_names) {
  std::string out = s.name + "(";
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    if (i) out += ",";
    out += param_name(s.params[i].name);
    if (typed_names) out += ":" + s.params[i].type;
  }
  return out + ")";
}

}  // namespace

WorldContext context_for_domain(const Domain& domain) {
  const std::string name = lower(domain.name);
  if (name.find("blocksworld") != std::string::npos) {
    return {std::string(kBlocksworldDescription), std::string(kBlocksworldActions)};
  }
  if (name.find("gripper") != std::string::npos) {
    return {strip_indent(kGrippersDescription), strip_indent(kGrippersActions)};
  }
  if (name.find("logistics") != std::string::npos) {
    return {strip_indent(kLogisticsDescription), strip_indent(kLogisticsActions)};
  }
  WorldContext ctx;
  ctx.domain_description = "The " + domain.name + " planning domain.";
  ctx.action_format_notes = "The actions are formatted as follows:";
  for (const auto& s : domain.schemas) ctx.action_format_notes += "\n- " + schema_signature(s, true);
  return ctx;
}

std::string describe_action_rules(const Domain& domain) {
  std::string out;
  for (const auto& s : domain.schemas) {
    if (!out.empty()) out += '\n';
    out += "- " + schema_signature(s, false) + ": requires " + template_list(domain, s, s.preconditions) +
           "; adds " + template_list(domain, s, s.add_effects) + "; removes " +
           template_list(domain, s, s.delete_effects);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    pos = nl + 1;
  }
  return out;
}

// Strips whitespace plus markdown emphasis and heading characters.
std::string_view strip_decoration(std::string_view s) {
  auto deco = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '*' || c == '#' || c == '`' || c == '_';
  };
  while (!s.empty() && deco(s.front())) s.remove_prefix(1);
  while (!s.empty() && deco(s.back())) s.remove_suffix(1);
  return s;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::string_view strip_bullet(std::string_view s) {
  s = strip_decoration(s);
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    s.remove_prefix(1);
  } else {
    std::size_t k = 0;
    while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
    if (k > 0 && k < s.size() && (s[k] == '.' || s[k] == ')')) s.remove_prefix(k + 1);
  }
  return strip_decoration(s);
}

struct MarkerHit {
  std::size_t line = 0;
  std::string payload;  // text after the marker on the same line
};

// Last line whose decorated start is `marker` (case-insensitive).
std::optional<MarkerHit> find_last_marker(const std::vector<std::string_view>& lines, std::string_view marker) {
  std::optional<MarkerHit> hit;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view l = strip_decoration(lines[i]);
    if (!starts_with_ci(l, marker)) continue;
    std::string_view rest = l.substr(marker.size());
    hit = MarkerHit{i, std::string(strip_decoration(rest))};
  }
  return hit;
}

// Marker payload, or when empty the following non-empty lines up to a blank.
std::string marker_body(std::string_view response, std::string_view marker, bool multiline) {
  const auto lines = split_lines(response);
  auto hit = find_last_marker(lines, marker);
  if (!hit) throw ResponseFormatError("response has no '" + std::string(marker) + "' line");
  if (!hit->payload.empty() || !multiline) return hit->payload;
  std::string body;
  std::size_t i = hit->line + 1;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;
  for (; i < lines.size(); ++i) {
    std::string_view l = strip_bullet(lines[i]);
    if (trim(lines[i]).empty()) break;
    if (l.empty()) continue;
    if (!body.empty() && body.back() != ',') body += ',';
    body.append(l);
  }
  return body;
}

std::vector<ActionId> resolve_list(const std::string& body, const Task& task, std::string_view marker) {
  std::string payload = trim(body);
  if (payload.size() >= 2 && payload.front() == '[' && payload.back() == ']') {
    payload = payload.substr(1, payload.size() - 2);
  }
  std::vector<ActionId> out;
  for (const auto& piece : split_action_list(payload)) out.push_back(parse_action_string(piece, task));
  if (out.empty()) throw ResponseFormatError("'" + std::string(marker) + "' lists no actions");
  return out;
}

}  // namespace

std::vector<std::string> split_action_list(std::string_view text) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  auto flush = [&] {
    std::string t = trim(cur);
    while (!t.empty() && (t.back() == '.' || t.back() == ';')) t.pop_back();
    t = trim(t);
    if (!t.empty()) out.push_back(t);
    cur.clear();
  };
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')' && depth > 0) --depth;
    if (c == ',' && depth == 0) {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::vector<ActionId> parse_action_sequence(std::string_view response, const Task& task) {
  return resolve_list(marker_body(response, "Action Sequence:", true), task, "Action Sequence:");
}

std::vector<ActionId> parse_actions(std::string_view response, const Task& task) {
  return resolve_list(marker_body(response, "Actions:", true), task, "Actions:");
}

Rating parse_rating(std::string_view response) {
  std::string body = marker_body(response, "Rating:", false);
  // A single leading word; "<sure/maybe/impossible>" echoed from the template is not an answer.
  std::size_t i = 0;
  std::string word;
  while (i < body.size() && std::isalpha(static_cast<unsigned char>(body[i]))) word.push_back(body[i++]);
  if (i < body.size() && (body[i] == '/' || body[i] == '>')) word.clear();
  auto r = rating_from_label(word);
  if (!r) throw ResponseFormatError("unrecognized rating '" + trim(body) + "'; expected sure, maybe or impossible");
  return *r;
}

ActionId parse_single_action(std::string_view response, const Task& task) {
  std::string body = trim(marker_body(response, "Action:", true));
  auto pieces = split_action_list(body);
  if (pieces.empty()) throw ResponseFormatError("'Action:' line is empty");
  if (pieces.size() > 1) throw ResponseFormatError("'Action:' must name exactly one action");
  return parse_action_string(pieces.front(), task);
}

std::pair<std::size_t, ActionId> parse_selection(std::string_view response, const Task& task) {
  std::string body = trim(marker_body(response, "Query:", false));
  std::string_view rest = body;
  if (!starts_with_ci(rest, "state")) throw ResponseFormatError("'Query:' must start with 'state <number>'");
  rest.remove_prefix(5);
  while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  std::size_t k = 0;
  while (k < rest.size() && std::isdigit(static_cast<unsigned char>(rest[k]))) ++k;
  if (k == 0 || k > 9) throw ResponseFormatError("'Query:' state number missing or malformed");
  const std::size_t ref = std::stoul(std::string(rest.substr(0, k)));
  rest.remove_prefix(k);
  while (!rest.empty() && (std::isspace(static_cast<unsigned char>(rest.front())) || rest.front() == ':')) {
    rest.remove_prefix(1);
  }
  if (rest.empty() || rest.front() != ',') throw ResponseFormatError("'Query:' expects 'state <number>, <action>'");
  rest.remove_prefix(1);
  auto pieces = split_action_list(rest);
  if (pieces.size() != 1) throw ResponseFormatError("'Query:' must name exactly one action");
  return {ref, parse_action_string(pieces.front(), task)};
}

std::string parse_reflection(std::string_view response) {
  const auto lines = split_lines(response);
  auto hit = find_last_marker(lines, "Reflect:");
  if (!hit) throw ResponseFormatError("response has no 'Reflect:' line");
  std::string out = hit->payload;
  for (std::size_t i = hit->line + 1; i < lines.size(); ++i) {
    if (!out.empty()) out += '\n';
    out.append(lines[i]);
  }
  out = trim(out);
  if (out.empty()) throw ResponseFormatError("'Reflect:' is empty");
  return out;
}

}  // namespace queryplan
