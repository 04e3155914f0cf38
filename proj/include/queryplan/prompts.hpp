#pragma once

// Prompt assembly and response parsing. The translation, plan proposal,
// action proposal and state evaluation templates reproduce the published
// wording; the remaining kinds follow the same layout.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "queryplan/pddl.hpp"
#include "queryplan/policy.hpp"

namespace queryplan {

class MissingField : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Response lacks the expected marker or its payload is malformed.
class ResponseFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PromptKind {
  BoomerangPlan,
  ToiPropose,
  ToiEvaluate,
  ReactStep,
  ReactSelect,
  Io,
  IoCot,
  IoP,
  IoCotP,
  Reflexion,
};

inline constexpr PromptKind kAllPromptKinds[] = {
    PromptKind::BoomerangPlan, PromptKind::ToiPropose, PromptKind::ToiEvaluate,
    PromptKind::ReactStep,     PromptKind::ReactSelect, PromptKind::Io,
    PromptKind::IoCot,         PromptKind::IoP,         PromptKind::IoCotP,
    PromptKind::Reflexion,
};

const char* to_string(PromptKind kind);
std::optional<PromptKind> prompt_kind_from_string(std::string_view name);

struct Prompt {
  std::string system;
  std::string user;

  bool operator==(const Prompt&) const = default;
};

/// Everything a template may need. Which fields are required depends on the
/// kind; build_prompt throws MissingField when one is absent.
struct PromptInputs {
  std::optional<std::string> state_text;       // current or starting state
  std::optional<std::string> goal_text;
  std::optional<std::vector<std::string>> valid_actions;
  std::optional<std::string> history_text;     // rendered history; may be empty
  std::optional<std::string> visited_text;     // numbered visited states (ReAct-Select)
  std::optional<std::string> error_feedback;
  std::optional<std::size_t> num_actions;      // ToI proposal k
  std::optional<std::string> action_rules;     // schema preconditions, IO-P only
  std::string in_context_example;              // optional, appended to system
};

Prompt build_prompt(PromptKind kind, const PromptInputs& in, const WorldContext& ctx);

/// State or goal translation prompt. `objects` is empty for goals.
Prompt build_translation_prompt(const std::vector<std::string>& predicates,
                                const std::vector<std::string>& objects, bool is_goal,
                                const WorldContext& ctx);

/// Context block for a domain: the published text for Blocksworld, Grippers
/// and Logistics (matched on the domain name), otherwise one generated from
/// the action schemas.
WorldContext context_for_domain(const Domain& domain);

/// One line per schema listing its preconditions and effects.
std::string describe_action_rules(const Domain& domain);

// ---------------------------------------------------------------------------
// Response parsing. All parsers scan for the LAST occurrence of their marker.

/// `Action Sequence:` followed by a comma list, on the same line or on the
/// following non-empty lines up to a blank line. Throws ResponseFormatError
/// or UnknownAction.
std::vector<ActionId> parse_action_sequence(std::string_view response, const Task& task);

/// `Actions:` list (ToI proposals).
std::vector<ActionId> parse_actions(std::string_view response, const Task& task);

/// `Rating: sure|maybe|impossible` (case-insensitive; `certain` accepted).
Rating parse_rating(std::string_view response);

/// `Action: <action>` (ReAct step).
ActionId parse_single_action(std::string_view response, const Task& task);

/// `Query: state <i>, <action>` (ReAct-Select). Range checking is the caller's.
std::pair<std::size_t, ActionId> parse_selection(std::string_view response, const Task& task);

/// `Reflect: ...` through the end of the response.
std::string parse_reflection(std::string_view response);

/// Splits on commas at parenthesis depth zero and trims each piece.
std::vector<std::string> split_action_list(std::string_view text);

}  // namespace queryplan
