#pragma once

#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tacitsim/agent.hpp"
#include "tacitsim/backend.hpp"
#include "tacitsim/draft.hpp"
#include "tacitsim/knowledge.hpp"
#include "tacitsim/meteor.hpp"
#include "tacitsim/orggen.hpp"
#include "tacitsim/prompts.hpp"
#include "tacitsim/text.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Post-hoc evaluation: reconstruction quality of the final description k_t
// against the ground truth k*, plus conversational statistics of the run.
// ---------------------------------------------------------------------------

struct RunMetrics {
  bool full_recall = false;
  double recall_fraction = 0.0;
  double c_meteor = 0.0;
  double c_geval_coh = 1.0;
  double c_geval_faith = 1.0;
  double scs = 0.0;
  double scs_context = 0.0;
  int len_path = 0;
  int n_hubs = 0;
  int min_dist_p0 = 0;
  bool reached_p0 = false;
  double avg_score = 0.0;
};

/// A column counts as mentioned when its name occurs in k_t under
/// case-insensitive, punctuation-normalized matching.
inline std::pair<bool, double> full_knowledge_recall(const TableKnowledge& k_star,
                                                     const std::string& k_t) {
  if (k_star.columns.empty()) throw std::invalid_argument("reference table has no columns");
  std::size_t mentioned = 0;
  for (const auto& col : k_star.columns) {
    if (mentions_phrase(k_t, col.name)) ++mentioned;
  }
  const double fraction = static_cast<double>(mentioned) /
                          static_cast<double>(k_star.columns.size());
  return {mentioned == k_star.columns.size(), fraction};
}

/// The candidate passage for a column: every sentence of k_t naming it,
/// joined in order. Empty when the column is never mentioned.
inline std::string column_passage(const std::string& k_t, const std::string& column_name) {
  std::string passage;
  for (const std::string& sentence : split_sentences(k_t)) {
    if (mentions_phrase(sentence, column_name)) {
      if (!passage.empty()) passage += " ";
      passage += sentence;
    }
  }
  return passage;
}

/// Mean per-column METEOR of the extracted passages against the reference
/// column sentences; unmentioned columns score 0.
inline double c_meteor(const TableKnowledge& k_star, const std::string& k_t) {
  if (k_star.columns.empty()) throw std::invalid_argument("reference table has no columns");
  double total = 0.0;
  for (const auto& col : k_star.columns) {
    const std::string passage = column_passage(k_t, col.name);
    if (!passage.empty()) total += meteor(passage, render_column_sentence(col));
  }
  return total / static_cast<double>(k_star.columns.size());
}

enum class GEvalDefinition { kCoherence, kFaithfulness };

struct JudgeParseError : BackendError {
  using BackendError::BackendError;
};

/// One LLM-as-judge rating of a candidate column description, 1-5.
inline int g_eval(const std::string& column_ref, const std::string& column_cand,
                  GEvalDefinition definition, ChatBackend& backend, const PromptPack& prompts) {
  const char* tmpl =
      definition == GEvalDefinition::kCoherence ? "geval_coherence" : "geval_faithfulness";
  std::vector<ChatMessage> messages;
  messages.push_back(system_msg(
      prompts.render(tmpl, {{"reference", column_ref}, {"candidate", column_cand}})));
  messages.push_back(user_msg("Provide the rating now."));

  auto parse = [](const std::string& reply) -> std::optional<int> {
    const auto pos = reply.find("Rating:");
    if (pos == std::string::npos) return std::nullopt;
    try {
      const int rating = std::stoi(trim(reply.substr(pos + 7)));
      if (rating >= 1 && rating <= 5) return rating;
    } catch (const std::exception&) {
    }
    return std::nullopt;
  };

  std::string reply = backend.complete(messages);
  if (auto rating = parse(reply)) return *rating;
  messages.push_back(assistant_msg(reply));
  messages.push_back(
      user_msg("That could not be parsed. Reply with exactly: Rating: <integer 1-5>"));
  reply = backend.complete(messages);
  if (auto rating = parse(reply)) return *rating;
  throw JudgeParseError("judge reply unparseable after re-prompt: " + reply);
}

/// Column-averaged judge score (cGEvalCoh / cGEvalFaith).
inline double c_geval(const TableKnowledge& k_star, const std::string& k_t,
                      GEvalDefinition definition, ChatBackend& backend,
                      const PromptPack& prompts) {
  if (k_star.columns.empty()) throw std::invalid_argument("reference table has no columns");
  double total = 0.0;
  for (const auto& col : k_star.columns) {
    total += g_eval(render_column_sentence(col), column_passage(k_t, col.name), definition,
                    backend, prompts);
  }
  return total / static_cast<double>(k_star.columns.size());
}

struct ConversationalStats {
  int len_path = 0;
  int n_hubs = 0;
  int min_dist_p0 = 0;
  bool reached_p0 = false;
};

/// Path statistics: total contacts, employees contacted twice or more, the
/// relationship-graph distance from the starting employee to patient zero,
/// and whether patient zero was ever contacted.
inline ConversationalStats conversational_stats(const std::vector<EmployeeId>& path,
                                                const OrgStructure& org,
                                                EmployeeId patient_zero, EmployeeId start) {
  if (path.empty()) throw std::invalid_argument("conversational_stats: empty path");
  ConversationalStats stats;
  stats.len_path = static_cast<int>(path.size());
  std::map<EmployeeId, int> visits;
  for (EmployeeId id : path) ++visits[id];
  for (const auto& [id, count] : visits) {
    if (count >= 2) ++stats.n_hubs;
    if (id == patient_zero) stats.reached_p0 = true;
  }
  stats.min_dist_p0 = shortest_distance(org, start, patient_zero);
  return stats;
}

/// SCS+C: the self-critic run with the ground-truth description as context.
inline double scs_with_context(const std::string& k_t, const TableKnowledge& k_star,
                               ChatBackend& backend, const PromptPack& prompts) {
  return run_critic(k_t, backend, prompts, render_knowledge(k_star)).score;
}

/// Assembles the full metric battery for one finished run.
inline RunMetrics compute_metrics(const TableKnowledge& k_star, const std::string& k_t,
                                  const std::vector<EmployeeId>& path,
                                  const std::vector<double>& score_trace, double final_score,
                                  const OrgStructure& org, EmployeeId patient_zero,
                                  ChatBackend& backend, const PromptPack& prompts) {
  RunMetrics m;
  const auto [full, fraction] = full_knowledge_recall(k_star, k_t);
  m.full_recall = full;
  m.recall_fraction = fraction;
  m.c_meteor = c_meteor(k_star, k_t);
  m.c_geval_coh = c_geval(k_star, k_t, GEvalDefinition::kCoherence, backend, prompts);
  m.c_geval_faith = c_geval(k_star, k_t, GEvalDefinition::kFaithfulness, backend, prompts);
  m.scs = final_score;
  m.scs_context = scs_with_context(k_t, k_star, backend, prompts);
  if (!path.empty()) {
    const ConversationalStats stats =
        conversational_stats(path, org, patient_zero, path.front());
    m.len_path = stats.len_path;
    m.n_hubs = stats.n_hubs;
    m.min_dist_p0 = stats.min_dist_p0;
    m.reached_p0 = stats.reached_p0;
  }
  m.avg_score = score_trace.empty()
                    ? 0.0
                    : std::accumulate(score_trace.begin(), score_trace.end(), 0.0) /
                          static_cast<double>(score_trace.size());
  return m;
}

}  // namespace tacitsim
