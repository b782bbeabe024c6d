#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tacitsim/backend.hpp"
#include "tacitsim/draft.hpp"
#include "tacitsim/knowledge.hpp"
#include "tacitsim/orggen.hpp"
#include "tacitsim/personas.hpp"
#include "tacitsim/prompts.hpp"
#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// The knowledge-retrieval agent. Traverses the company on a stack ordered
// deepest-level-first, and on every step runs the prompt chain
//   greet (first contact) -> question -> persona reply -> merge -> critique
//   -> continue/switch decision,
// terminating once the self-critic score reaches epsilon or the interaction
// budget is spent.
// ---------------------------------------------------------------------------

struct AgentConfig {
  double epsilon = 8.0;          // stop once the self-critic scores the draft this high
  int max_interactions = 0;      // 0 = 2 * n_employees, resolved at init
  int max_turns_per_employee = 6;
  std::uint64_t rng_seed = 0;
};

struct AgentState {
  std::string draft;            // current description text (k_t in the making)
  double score = 0.0;
  std::string critique;
  std::string suggestions;
  std::vector<ChatMessage> history;  // conversation with the current employee
  std::vector<EmployeeId> stack;     // back() is the top
  std::vector<EmployeeId> path;      // contacted employees, non-unique
  int interactions_used = 0;

  EmployeeId current = -1;           // -1: next step opens a new conversation
  int turns_with_current = 0;
  std::set<EmployeeId> greeted;
  std::vector<EmployeeId> init_order;  // original visit order, for stack refills
  std::vector<double> score_trace;
  bool terminated = false;
};

struct CriticReview {
  double score = 0.0;
  std::string reasoning;
  std::string suggestions;
};

struct CriticParseError : BackendError {
  using BackendError::BackendError;
};

namespace detail {

/// Splits a critic reply into Score / Reasoning / Suggestions fields.
inline std::optional<CriticReview> try_parse_review(const std::string& reply) {
  CriticReview review;
  bool have_score = false;
  std::string* sink = nullptr;
  for (const std::string& raw : split_lines(reply)) {
    const std::string line = trim(raw);
    if (starts_with(line, "Score:")) {
      try {
        review.score = std::stod(trim(line.substr(6)));
      } catch (const std::exception&) {
        return std::nullopt;
      }
      have_score = true;
      sink = nullptr;
    } else if (starts_with(line, "Reasoning:")) {
      review.reasoning = trim(line.substr(10));
      sink = &review.reasoning;
    } else if (starts_with(line, "Suggestions:")) {
      review.suggestions = trim(line.substr(12));
      sink = &review.suggestions;
    } else if (sink && !line.empty()) {
      *sink += (sink->empty() ? "" : " ") + line;
    }
  }
  if (!have_score || review.score < 0.0 || review.score > 10.0) return std::nullopt;
  return review;
}

}  // namespace detail

/// Runs the self-critic on a description. With `reference` set, the critic
/// additionally sees the ground-truth description (the SCS+C variant).
/// An unparseable reply earns one re-prompt, then a CriticParseError.
inline CriticReview run_critic(const std::string& description, ChatBackend& backend,
                               const PromptPack& prompts,
                               const std::optional<std::string>& reference = std::nullopt) {
  std::vector<ChatMessage> messages;
  if (reference) {
    messages.push_back(system_msg(
        prompts.render("critic_context", {{"draft", description}, {"reference", *reference}})));
  } else {
    messages.push_back(system_msg(prompts.render("critic", {{"draft", description}})));
  }
  messages.push_back(user_msg("Write the review now."));

  std::string reply = backend.complete(messages);
  if (auto review = detail::try_parse_review(reply)) return *review;

  messages.push_back(assistant_msg(reply));
  messages.push_back(user_msg(
      "That review could not be parsed. Reply again using exactly this format:\n"
      "Score: <integer 0-10>\nReasoning: <text>\nSuggestions: <text>"));
  reply = backend.complete(messages);
  if (auto review = detail::try_parse_review(reply)) return *review;
  throw CriticParseError("critic reply unparseable after re-prompt: " + reply);
}

inline AgentState init_agent(const OrgStructure& org, const TableKnowledge& k0,
                             const AgentConfig& config) {
  if (org.size() < 1) throw std::invalid_argument("cannot run the agent on an empty org");
  if (config.epsilon <= 0.0 || config.epsilon > 10.0) {
    throw std::invalid_argument("epsilon must lie in (0, 10]");
  }
  if (config.max_turns_per_employee < 1) {
    throw std::invalid_argument("max_turns_per_employee must be >= 1");
  }

  AgentState state;
  state.draft = render_draft(draft_skeleton(k0));

  // Visit order: deepest level first, seeded shuffle within each level.
  std::map<int, std::vector<EmployeeId>> by_level;
  for (const auto& e : org.employees) by_level[e.level].push_back(e.id);
  Rng rng(mix_seed(config.rng_seed, 0x57AC));
  for (auto it = by_level.rbegin(); it != by_level.rend(); ++it) {
    std::vector<EmployeeId> level_ids = it->second;
    rng.shuffle(level_ids);
    state.init_order.insert(state.init_order.end(), level_ids.begin(), level_ids.end());
  }
  state.stack.assign(state.init_order.rbegin(), state.init_order.rend());
  return state;
}

namespace detail {

inline int resolved_budget(const AgentConfig& config, const OrgStructure& org) {
  return config.max_interactions > 0 ? config.max_interactions : 2 * org.size();
}

inline std::string column_name_list(const TableKnowledge& k0) {
  std::vector<std::string> names;
  for (const auto& col : k0.columns) names.push_back(col.name);
  return join(names, "\n");
}

/// Set of ground-truth column names present in a draft text.
inline std::set<std::string> covered_columns(const std::string& draft_text,
                                             const TableKnowledge& k0) {
  const Draft d = parse_draft(draft_text);
  std::set<std::string> covered;
  for (const auto& col : k0.columns) {
    if (d.find_column(col.name)) covered.insert(to_lower(col.name));
  }
  return covered;
}

/// Pops the next employee to talk to, refilling an empty stack with all
/// previously visited employees in the original visit order.
inline EmployeeId pop_next(AgentState& state) {
  if (state.stack.empty()) {
    const std::set<EmployeeId> visited(state.path.begin(), state.path.end());
    for (auto it = state.init_order.rbegin(); it != state.init_order.rend(); ++it) {
      if (visited.count(*it)) state.stack.push_back(*it);
    }
  }
  if (state.stack.empty()) throw std::logic_error("agent stack empty before any contact");
  const EmployeeId next = state.stack.back();
  state.stack.pop_back();
  return next;
}

/// Every employee whose display name appears verbatim in the reply, current
/// excluded, moved to the top of the stack (smallest id topmost on ties).
inline void apply_referrals(AgentState& state, const OrgStructure& org,
                            const std::string& reply) {
  std::vector<EmployeeId> mentioned;
  for (const auto& e : org.employees) {
    if (e.id != state.current && reply.find(e.display_name) != std::string::npos) {
      mentioned.push_back(e.id);
    }
  }
  for (auto it = mentioned.rbegin(); it != mentioned.rend(); ++it) {
    state.stack.erase(std::remove(state.stack.begin(), state.stack.end(), *it),
                      state.stack.end());
    state.stack.push_back(*it);
  }
}

}  // namespace detail

/// One full step of the conversation loop. Returns the successor state; on
/// backend failure the input state is untouched (the caller owns retries).
inline AgentState step_agent(const AgentState& before, const OrgStructure& org,
                             const std::vector<PersonaProfile>& personas,
                             const TableKnowledge& k0, const AgentConfig& config,
                             const PromptPack& prompts, ChatBackend& backend) {
  if (before.terminated) throw std::logic_error("step_agent called after termination");
  AgentState state = before;

  // (a) open the conversation, greeting on first-ever contact
  if (state.current < 0) {
    state.current = detail::pop_next(state);
    state.history.clear();
    state.turns_with_current = 0;
    state.path.push_back(state.current);
    if (!state.greeted.count(state.current)) {
      const std::string greeting = backend.complete({system_msg(prompts.render(
          "greeting", {{"employee_name", org.employee(state.current).display_name},
                       {"table_name", k0.table_name}}))});
      const std::string hello =
          answer_query(personas[static_cast<std::size_t>(state.current)], org, k0, prompts,
                       greeting, state.history, backend);
      state.history.push_back(user_msg(greeting));
      state.history.push_back(assistant_msg(hello));
      state.greeted.insert(state.current);
    }
  }

  // (b) question targeting the gaps flagged by the last critique
  const std::string question = backend.complete({system_msg(prompts.render(
      "question", {{"table_name", k0.table_name},
                   {"columns", detail::column_name_list(k0)},
                   {"draft", state.draft},
                   {"critique", state.critique},
                   {"suggestions", state.suggestions}}))});
  const std::string reply =
      answer_query(personas[static_cast<std::size_t>(state.current)], org, k0, prompts, question,
                   state.history, backend);
  state.history.push_back(user_msg(question));
  state.history.push_back(assistant_msg(reply));

  // (c) merge the reply into the draft; a rewrite that loses a column the
  // draft already covered is rejected so coverage can only grow
  const std::string merged = backend.complete({system_msg(prompts.render(
      "merge", {{"table_name", k0.table_name},
                {"columns", detail::column_name_list(k0)},
                {"draft", state.draft},
                {"reply", reply}}))});
  const auto old_cover = detail::covered_columns(state.draft, k0);
  const auto new_cover = detail::covered_columns(merged, k0);
  if (std::includes(new_cover.begin(), new_cover.end(), old_cover.begin(), old_cover.end())) {
    state.draft = merged;
  }

  // (d) self-critique
  const CriticReview review = run_critic(state.draft, backend, prompts);
  state.score = review.score;
  state.critique = review.reasoning;
  state.suggestions = review.suggestions;
  state.score_trace.push_back(review.score);
  state.interactions_used += 1;
  state.turns_with_current += 1;

  // referral grounding: exact display-name mentions jump the queue
  detail::apply_referrals(state, org, reply);

  // (e) terminate / continue / switch
  if (state.score >= config.epsilon ||
      state.interactions_used >= detail::resolved_budget(config, org)) {
    state.terminated = true;
    return state;
  }
  bool do_switch = state.turns_with_current >= config.max_turns_per_employee;
  if (!do_switch) {
    const std::string decision = backend.complete({system_msg(prompts.render(
        "decision", {{"turns_used", std::to_string(state.turns_with_current)},
                     {"max_turns", std::to_string(config.max_turns_per_employee)},
                     {"reply", reply}}))});
    do_switch = to_lower(decision).find("switch") != std::string::npos;
  }
  if (do_switch) {
    state.current = -1;
    state.history.clear();
  }
  return state;
}

struct AgentRunResult {
  std::string k_t;        // final description
  AgentState state;       // terminal agent state
  bool failed = false;    // aborted after repeated backend errors
  std::string failure;
};

/// Iterates step_agent to termination. Three consecutive backend failures
/// abort the run; any success resets the counter.
inline AgentRunResult run_agent(const OrgStructure& org,
                                const std::vector<PersonaProfile>& personas,
                                const TableKnowledge& k0, const AgentConfig& config,
                                const PromptPack& prompts, ChatBackend& backend) {
  if (static_cast<int>(personas.size()) != org.size()) {
    throw std::invalid_argument("need one persona per employee");
  }
  AgentRunResult result;
  AgentState state = init_agent(org, k0, config);
  int consecutive_failures = 0;
  while (!state.terminated) {
    try {
      state = step_agent(state, org, personas, k0, config, prompts, backend);
      consecutive_failures = 0;
    } catch (const BackendError& e) {
      if (++consecutive_failures >= 3) {
        result.failed = true;
        result.failure = std::string("conversation error: ") + e.what();
        break;
      }
    }
  }
  result.k_t = state.draft;
  result.state = std::move(state);
  return result;
}

}  // namespace tacitsim
