#include "queryplan/llm.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>

#include "json.hpp"

namespace queryplan {

void LlmConfig::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw std::invalid_argument("temperature must lie in [0, 2]");
  }
}

std::string request_fingerprint(const std::string& system, const std::string& user,
                                const std::string& model, double temperature) {
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.3f", temperature);
  // Length-prefix each field so boundaries cannot shift between them.
  std::string material;
  for (const std::string* part : {&system, &user, &model}) {
    material += std::to_string(part->size());
    material += ':';
    material += *part;
  }
  material += temp;

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(material.data(), material.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transcript

std::string exchange_to_json_line(const ChatExchange& e) {
  nlohmann::ordered_json j;
  j["run_id"] = e.run_id;
  j["seq"] = e.seq;
  j["fingerprint"] = e.fingerprint;
  j["system"] = e.system;
  j["user"] = e.user;
  j["response"] = e.response;
  j["prompt_tokens"] = e.prompt_tokens;
  j["completion_tokens"] = e.completion_tokens;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

ChatExchange exchange_from_json_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  ChatExchange e;
  e.run_id = j.at("run_id").get<std::string>();
  e.seq = j.at("seq").get<std::size_t>();
  e.fingerprint = j.at("fingerprint").get<std::string>();
  e.system = j.at("system").get<std::string>();
  e.user = j.at("user").get<std::string>();
  e.response = j.at("response").get<std::string>();
  e.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
  e.completion_tokens = j.at("completion_tokens").get<std::size_t>();
  return e;
}

std::vector<ChatExchange> read_transcript(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transcript '" + path + "'");
  std::vector<ChatExchange> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(exchange_from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(n) + ": bad transcript line: " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replay and recording

ReplayChatClient::ReplayChatClient(const std::vector<ChatExchange>& transcript, std::string model,
                                   double temperature)
    : model_(std::move(model)), temperature_(temperature) {
  std::vector<ChatExchange> ordered = transcript;
  std::stable_sort(ordered.begin(), ordered.end(), [](const ChatExchange& a, const ChatExchange& b) {
    return a.run_id == b.run_id ? a.seq < b.seq : a.run_id < b.run_id;
  });
  for (auto& e : ordered) queues_[{e.run_id, e.fingerprint}].push_back(std::move(e));
}

std::unique_ptr<ReplayChatClient> ReplayChatClient::from_file(const std::string& path, std::string model,
                                                              double temperature) {
  return std::make_unique<ReplayChatClient>(read_transcript(path), std::move(model), temperature);
}

ChatExchange ReplayChatClient::complete(const ChatRequest& req) {
  const std::string fp = request_fingerprint(req.system, req.user, model_, temperature_);
  std::lock_guard<std::mutex> lock(mu_);
  auto it = queues_.find({req.run_id, fp});
  if (it == queues_.end() || it->second.empty()) {
    throw ReplayMiss("no recorded exchange for run '" + req.run_id + "' seq " + std::to_string(req.seq) +
                     " (fingerprint " + fp.substr(0, 16) + ")");
  }
  ChatExchange e = std::move(it->second.front());
  it->second.pop_front();
  return e;
}

RecordingChatClient::RecordingChatClient(std::shared_ptr<ChatClient> inner, const std::string& path, bool append)
    : inner_(std::move(inner)), out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open transcript '" + path + "' for writing");
}

ChatExchange RecordingChatClient::complete(const ChatRequest& req) {
  ChatExchange e = inner_->complete(req);
  std::lock_guard<std::mutex> lock(mu_);
  out_ << exchange_to_json_line(e) << '\n';
  out_.flush();
  return e;
}

// ---------------------------------------------------------------------------
// Session

LlmSession::LlmSession(std::shared_ptr<ChatClient> client, std::string run_id)
    : client_(std::move(client)), run_id_(std::move(run_id)) {}

ChatExchange LlmSession::call(const Prompt& prompt) {
  ChatRequest req{run_id_, seq_++, prompt.system, prompt.user};
  ChatExchange e = client_->complete(req);
  ++calls_;
  prompt_tokens_ += e.prompt_tokens;
  completion_tokens_ += e.completion_tokens;
  exchanges_.push_back(e);
  return e;
}

// ---------------------------------------------------------------------------
// LlmPolicy

namespace {

// A response that parsed but does not answer the question asked.
class InvalidResponse : public ResponseFormatError {
 public:
  using ResponseFormatError::ResponseFormatError;
};

std::string trim_copy(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> display_names(const Task& task, const std::vector<ActionId>& ids) {
  std::vector<std::string> out;
  for (ActionId a : ids) out.push_back(task.name(a));
  return out;
}

PromptKind kind_for(PlanStyle style) {
  switch (style) {
    case PlanStyle::Boomerang: return PromptKind::BoomerangPlan;
    case PlanStyle::Io: return PromptKind::Io;
    case PlanStyle::IoCot: return PromptKind::IoCot;
    case PlanStyle::IoP: return PromptKind::IoP;
    case PlanStyle::IoCotP: return PromptKind::IoCotP;
  }
  return PromptKind::Io;
}

}  // namespace

LlmPolicy::LlmPolicy(const Task& task, std::shared_ptr<LlmSession> session, LlmPolicyOptions options)
    : task_(&task), session_(std::move(session)), options_(std::move(options)) {
  if (options_.max_attempts == 0) options_.max_attempts = 1;
}

template <typename T, typename Build, typename Parse>
T LlmPolicy::with_retries(Build build, Parse parse) {
  std::optional<std::string> feedback;
  std::string last;
  for (std::size_t attempt = 0; attempt < options_.max_attempts; ++attempt) {
    Prompt prompt = build(feedback);
    ChatExchange ex;
    try {
      ex = session_->call(prompt);
    } catch (const EndpointError& e) {
      throw PolicyFailure(std::string("endpoint: ") + e.what());
    } catch (const ReplayMiss& e) {
      throw PolicyFailure(std::string("replay miss: ") + e.what());
    }
    try {
      return parse(ex.response);
    } catch (const ResponseFormatError& e) {
      last = e.what();
    } catch (const UnknownAction& e) {
      last = e.what();
    }
    ++malformed_;
    feedback = last;
  }
  throw PolicyFailure("no usable response after " + std::to_string(options_.max_attempts) +
                      " attempt(s): " + last);
}

std::string LlmPolicy::state_text(const State& s, const WorldContext& ctx) {
  if (!options_.translate_states) return s.describe();
  const std::string key = s.canonical_key();
  if (auto it = state_cache_.find(key); it != state_cache_.end()) return it->second;
  std::vector<std::string> predicates;
  for (AtomId id : s.atoms()) predicates.push_back(s.table().display(id));
  std::vector<std::string> objects;
  for (const auto& o : s.table().objects()) objects.push_back(o.name + ":" + o.type);
  if (predicates.empty()) predicates.push_back("(none)");
  std::string text;
  try {
    text = trim_copy(session_->call(build_translation_prompt(predicates, objects, false, ctx)).response);
  } catch (const EndpointError& e) {
    throw PolicyFailure(std::string("endpoint: ") + e.what());
  } catch (const ReplayMiss& e) {
    throw PolicyFailure(std::string("replay miss: ") + e.what());
  }
  if (text.empty()) text = s.describe();
  state_cache_.emplace(key, text);
  return text;
}

std::string LlmPolicy::goal_text(const WorldContext& ctx) {
  if (!options_.translate_states) return task_->problem->describe_goal();
  if (goal_cache_) return *goal_cache_;
  std::vector<std::string> predicates;
  for (AtomId id : task_->goal()) predicates.push_back(task_->problem->atoms->display(id));
  if (predicates.empty()) predicates.push_back("(none)");
  std::string text;
  try {
    text = trim_copy(session_->call(build_translation_prompt(predicates, {}, true, ctx)).response);
  } catch (const EndpointError& e) {
    throw PolicyFailure(std::string("endpoint: ") + e.what());
  } catch (const ReplayMiss& e) {
    throw PolicyFailure(std::string("replay miss: ") + e.what());
  }
  if (text.empty()) text = task_->problem->describe_goal();
  goal_cache_ = text;
  return text;
}

std::string LlmPolicy::apply_cap(std::vector<std::string> blocks, bool drop_oldest) {
  auto total = [&] {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size() + 1;
    return n;
  };
  if (options_.history_char_cap > 0 && drop_oldest) {
    while (blocks.size() > 1 && total() > options_.history_char_cap) {
      blocks.erase(blocks.begin());
      truncated_ = true;
    }
  }
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out += '\n';
    out += blocks[i];
  }
  return out;
}

std::string LlmPolicy::render_boomerang_history(const InteractionHistory& h, const WorldContext& ctx) {
  std::vector<std::string> blocks;
  std::size_t attempt = 0;
  for (const auto& entry : h.entries()) {
    const auto* pa = std::get_if<PlanAttempt>(&entry);
    if (!pa) continue;
    std::string b = "Attempt " + std::to_string(++attempt) + ":";
    const auto& v = pa->verification;
    for (std::size_t i = 0; i < v.actions.size(); ++i) {
      b += "\n" + task_->name(v.actions[i]) + ": " + state_text(v.states[i + 1], ctx);
    }
    if (v.error) b += "\nError: " + v.error->detail;
    blocks.push_back(std::move(b));
  }
  return apply_cap(std::move(blocks), true);
}

std::string LlmPolicy::render_react_history(const InteractionHistory& h, const WorldContext& ctx) {
  std::vector<std::string> blocks;
  std::size_t n = 0;
  for (const auto& entry : h.entries()) {
    if (const auto* q = std::get_if<QueryExchange>(&entry)) {
      std::string line = std::to_string(++n) + ". " + task_->name(q->action) + ": ";
      if (q->result.ok()) {
        line += state_text(*q->result.next_state, ctx);
      } else if (q->result.error) {
        line += q->result.error->detail;
      }
      blocks.push_back(std::move(line));
    } else if (const auto* r = std::get_if<ReflectionNote>(&entry)) {
      blocks.push_back("Reflection: " + r->text);
    }
  }
  return apply_cap(std::move(blocks), true);
}

std::string LlmPolicy::render_select_queries(const InteractionHistory& h) {
  std::vector<std::string> blocks;
  std::size_t n = 0;
  for (const auto& entry : h.entries()) {
    const auto* q = std::get_if<QueryExchange>(&entry);
    if (!q) continue;
    std::string line = std::to_string(++n) + ". state " + std::to_string(q->state_ref) + ", " +
                       task_->name(q->action) + ": ";
    if (q->next_ref) {
      line += "reached state " + std::to_string(*q->next_ref);
    } else if (q->result.error) {
      line += q->result.error->detail;
    }
    blocks.push_back(std::move(line));
  }
  return apply_cap(std::move(blocks), true);
}

std::string LlmPolicy::render_visited(const InteractionHistory& h, const WorldContext& ctx) {
  std::vector<std::string> blocks;
  for (std::size_t i = 0; i < h.visited().size(); ++i) {
    blocks.push_back("State " + std::to_string(i) + ": " + state_text(h.state(i), ctx));
  }
  return apply_cap(std::move(blocks), false);
}

std::vector<ActionId> LlmPolicy::propose_actions(const ProposalRequest& req, const WorldContext& ctx) {
  if (req.valid_actions.empty()) return {};
  const std::string st = state_text(req.state, ctx);
  const std::string gt = goal_text(ctx);
  const auto valid_names = display_names(*task_, req.valid_actions);
  const std::size_t want = std::min(req.k, req.valid_actions.size());
  return with_retries<std::vector<ActionId>>(
      [&](const std::optional<std::string>& fb) {
        PromptInputs in;
        in.state_text = st;
        in.goal_text = gt;
        in.valid_actions = valid_names;
        in.num_actions = req.k;
        in.error_feedback = fb ? fb : req.feedback;
        in.in_context_example = options_.in_context_example;
        return build_prompt(PromptKind::ToiPropose, in, ctx);
      },
      [&](const std::string& response) {
        std::vector<ActionId> out;
        for (ActionId a : parse_actions(response, *task_)) {
          if (std::find(req.valid_actions.begin(), req.valid_actions.end(), a) == req.valid_actions.end()) {
            throw InvalidResponse("the sequence of actions you proposed included an invalid action: " +
                                  task_->name(a));
          }
          if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
        }
        if (out.size() < want) {
          throw InvalidResponse("the sequence of actions did not include the specified number of actions (" +
                                std::to_string(want) + " distinct valid actions expected)");
        }
        out.resize(std::min(out.size(), req.k));
        return out;
      });
}

Rating LlmPolicy::evaluate_state(const State& s, const AtomSet&, const WorldContext& ctx) {
  const std::string st = state_text(s, ctx);
  const std::string gt = goal_text(ctx);
  return with_retries<Rating>(
      [&](const std::optional<std::string>& fb) {
        PromptInputs in;
        in.state_text = st;
        in.goal_text = gt;
        if (fb) in.error_feedback = "the evaluation you provided was not formatted correctly: " + *fb;
        in.in_context_example = options_.in_context_example;
        return build_prompt(PromptKind::ToiEvaluate, in, ctx);
      },
      [](const std::string& response) { return parse_rating(response); });
}

std::vector<ActionId> LlmPolicy::generate_plan(const PlanRequest& req, const WorldContext& ctx) {
  if (!req.s0) throw PolicyFailure("generate_plan: no start state");
  const PromptKind kind = kind_for(req.style);
  const std::string st = state_text(*req.s0, ctx);
  const std::string gt = goal_text(ctx);
  std::optional<std::string> history;
  std::optional<std::string> attempt_error;
  if (kind == PromptKind::BoomerangPlan) {
    history = req.history ? render_boomerang_history(*req.history, ctx) : std::string();
    if (req.history && !req.history->empty()) {
      if (const auto* pa = std::get_if<PlanAttempt>(&req.history->entries().back())) {
        if (pa->verification.error) attempt_error = pa->verification.error->detail;
      }
    }
  }
  const auto valid_names = display_names(*task_, req.valid_at_start);
  return with_retries<std::vector<ActionId>>(
      [&](const std::optional<std::string>& fb) {
        PromptInputs in;
        in.state_text = st;
        in.goal_text = gt;
        in.history_text = history;
        in.valid_actions = valid_names;
        in.error_feedback = fb ? fb : attempt_error;
        if (kind == PromptKind::IoP || kind == PromptKind::IoCotP) {
          in.action_rules = describe_action_rules(*task_->problem->domain);
        }
        in.in_context_example = options_.in_context_example;
        return build_prompt(kind, in, ctx);
      },
      [&](const std::string& response) { return parse_action_sequence(response, *task_); });
}

ActionId LlmPolicy::next_action(const State& s, const WorldContext& ctx, const InteractionHistory& h) {
  const std::string st = state_text(s, ctx);
  const std::string gt = goal_text(ctx);
  const std::string hist = render_react_history(h, ctx);
  return with_retries<ActionId>(
      [&](const std::optional<std::string>& fb) {
        PromptInputs in;
        in.state_text = st;
        in.goal_text = gt;
        in.history_text = hist;
        in.error_feedback = fb;
        in.in_context_example = options_.in_context_example;
        return build_prompt(PromptKind::ReactStep, in, ctx);
      },
      [&](const std::string& response) { return parse_single_action(response, *task_); });
}

QuerySelection LlmPolicy::select_query(const WorldContext& ctx, const InteractionHistory& h) {
  const std::string gt = goal_text(ctx);
  const std::string visited = render_visited(h, ctx);
  const std::string queries = render_select_queries(h);
  const std::size_t n = h.visited().size();
  return with_retries<QuerySelection>(
      [&](const std::optional<std::string>& fb) {
        PromptInputs in;
        in.goal_text = gt;
        in.visited_text = visited;
        in.history_text = queries;
        in.error_feedback = fb;
        in.in_context_example = options_.in_context_example;
        return build_prompt(PromptKind::ReactSelect, in, ctx);
      },
      [&](const std::string& response) {
        auto [ref, action] = parse_selection(response, *task_);
        if (ref >= n) {
          throw InvalidResponse("state " + std::to_string(ref) + " does not exist; choose a state between 0 and " +
                                std::to_string(n - 1));
        }
        return QuerySelection{ref, action};
      });
}

std::string LlmPolicy::reflect(const WorldContext& ctx, const InteractionHistory& h, const std::string& feedback) {
  const std::string st = state_text(h.state(0), ctx);
  const std::string gt = goal_text(ctx);
  const std::string hist = render_react_history(h, ctx);
  return with_retries<std::string>(
      [&](const std::optional<std::string>& fb) {
        PromptInputs in;
        in.state_text = st;
        in.goal_text = gt;
        in.history_text = hist;
        in.error_feedback = fb ? feedback + " (previous reply: " + *fb + ")" : feedback;
        in.in_context_example = options_.in_context_example;
        return build_prompt(PromptKind::Reflexion, in, ctx);
      },
      [](const std::string& response) { return parse_reflection(response); });
}

PolicyStats LlmPolicy::stats() const {
  PolicyStats s;
  s.llm_calls = session_->calls();
  s.prompt_tokens = session_->prompt_tokens();
  s.completion_tokens = session_->completion_tokens();
  s.malformed_actions = malformed_;
  s.history_truncated = truncated_;
  return s;
}

}  // namespace queryplan
