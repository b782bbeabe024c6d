#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tacitsim/backend.hpp"
#include "tacitsim/draft.hpp"
#include "tacitsim/knowledge.hpp"
#include "tacitsim/text.hpp"
#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Scripted backend: a pure, deterministic stand-in for the chat model. The
// system prompt's `#role:` header routes to a rule; everything a rule needs
// travels inside the messages themselves (structured `#key:` lines and
// `--- BEGIN X --- / --- END X ---` blocks), so the exact same call sites
// serve both the live and the scripted backend.
// ---------------------------------------------------------------------------

/// Text between `--- BEGIN name ---` and `--- END name ---`, or "" if the
/// markers are absent.
inline std::string extract_block(const std::string& text, const std::string& name) {
  const std::string begin = "--- BEGIN " + name + " ---";
  const std::string end = "--- END " + name + " ---";
  const auto b = text.find(begin);
  if (b == std::string::npos) return "";
  const auto body_start = b + begin.size();
  const auto e = text.find(end, body_start);
  if (e == std::string::npos) return "";
  std::string body = text.substr(body_start, e - body_start);
  // strip one leading/trailing newline, keep inner structure
  if (!body.empty() && body.front() == '\n') body.erase(body.begin());
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  return body;
}

namespace scripted {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---- generator rule --------------------------------------------------------

struct PoolColumn {
  const char* name;
  const char* dtype;
  const char* meaning;
  const char* examples;
};

inline const std::vector<PoolColumn>& column_pool() {
  static const std::vector<PoolColumn> pool = {
      {"record_id", "integer", "Unique identifier of the record", "1041; 1042; 1077"},
      {"created_date", "date", "Day the record was created", "2023-01-14; 2023-02-02"},
      {"status", "categorical", "Current processing status of the record",
       "open; closed; pending"},
      {"quantity", "integer", "Number of units involved", "3; 12; 40"},
      {"unit_price", "float", "Price per unit in company currency", "4.75; 12.5"},
      {"is_active", "boolean", "Whether the record is still in active use", "true; false"},
      {"region_code", "string", "Short code of the responsible sales region", "NA-1; EU-4"},
      {"total_cost", "float", "Total cost across all units", "57.0; 150.25"},
      {"owner_team", "categorical", "Team accountable for the record", "ops; sales; support"},
      {"updated_date", "date", "Day of the most recent update", "2023-03-09; 2023-04-21"},
      {"priority_level", "integer", "Priority from one for low to five for critical", "1; 3; 5"},
      {"source_system", "string", "Name of the upstream system the record came from",
       "legacy_crm; webform"},
      {"is_verified", "boolean", "Whether the record passed the verification check",
       "true; false"},
      {"batch_code", "string", "Production or import batch label", "B-118; B-204"},
      {"weight_kg", "float", "Weight of the item in kilograms", "0.75; 12.0; 3.5"},
      {"category_tag", "categorical", "Coarse marketing category of the record",
       "standard; premium; trial"},
      {"start_date", "date", "Day the underlying activity started", "2022-11-01; 2023-01-20"},
      {"end_date", "date", "Day the underlying activity ended", "2023-06-30; 2023-07-15"},
      {"review_score", "float", "Average internal review score", "3.8; 4.2"},
      {"contact_count", "integer", "How many contact events are linked", "0; 2; 9"},
      {"currency_code", "string", "Currency code applying to the monetary fields", "USD; EUR"},
      {"is_archived", "boolean", "Whether the record was moved to the archive", "true; false"},
      {"approval_stage", "categorical", "Stage of the record in the approval pipeline",
       "draft; review; final"},
      {"margin_pct", "float", "Profit margin as a percentage of revenue", "12.5; 30.0"},
  };
  return pool;
}

/// Deterministic table synthesis from (#subject, #n_columns, #seed), emitted
/// in the fenced format the knowledge parser expects.
inline std::string generate_reply(const std::string& system_prompt) {
  const std::string subject = prompt_header(system_prompt, "subject");
  const int n_columns = std::stoi(prompt_header(system_prompt, "n_columns"));
  const std::uint64_t seed = std::stoull(prompt_header(system_prompt, "seed"));
  Rng rng(mix_seed(seed, fnv1a(subject)));

  const auto& pool = column_pool();
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<PoolColumn> chosen;
  std::vector<std::string> names;
  for (int i = 0; i < n_columns; ++i) {
    PoolColumn c = pool[order[static_cast<std::size_t>(i) % pool.size()]];
    std::string name = c.name;
    if (static_cast<std::size_t>(i) >= pool.size()) {
      name += "_" + std::to_string(i / pool.size() + 1);
    }
    names.push_back(name);
    chosen.push_back(c);
  }

  std::string table_name;
  for (char c : to_lower(subject)) {
    table_name += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  }
  table_name += "_records";

  std::string out = "Here is the table description.\n\n```table\n";
  out += "TABLE: " + table_name + "\n";
  out += "OVERVIEW: Tracks the core " + subject +
         " activity of the company across reporting periods.\n";
  out += "COLUMNS:\n";
  for (int i = 0; i < n_columns; ++i) {
    const PoolColumn& c = chosen[static_cast<std::size_t>(i)];
    out += names[static_cast<std::size_t>(i)];
    out += std::string(" | ") + c.dtype + " | " + c.meaning + " | " + c.examples + "\n";
  }
  out += "RELATIONS:\n";
  const int n_relations = 1 + static_cast<int>(rng.uniform_index(3));
  for (int r = 0; r < n_relations; ++r) {
    if (n_columns < 2) {
      out += "- The column " + names[0] + " stands alone in this table.\n";
      break;
    }
    const std::size_t a = rng.uniform_index(names.size());
    std::size_t b = rng.uniform_index(names.size() - 1);
    if (b >= a) ++b;
    static const char* kForms[] = {
        "Records with a higher %s usually also show a higher %s.",
        "When %s changes, %s tends to move with it.",
        "The value of %s constrains the plausible range of %s.",
    };
    char buf[256];
    std::snprintf(buf, sizeof(buf), kForms[r % 3], names[a].c_str(), names[b].c_str());
    out += std::string("- ") + buf + "\n";
  }
  out += "```\n";
  return out;
}

// ---- persona rule ----------------------------------------------------------

struct PersonaContext {
  std::vector<DraftColumn> facts;  // known columns, fully specified
  std::vector<std::pair<std::string, int>> aware;  // peer name, #facts believed known
  std::vector<std::string> relations;
  std::string overview;
};

inline PersonaContext parse_persona_context(const std::string& system_prompt) {
  PersonaContext ctx;
  for (const std::string& raw : split_lines(system_prompt)) {
    const std::string line = trim(raw);
    if (starts_with(line, "#fact:")) {
      const auto parts = split(line.substr(6), '|');
      if (parts.size() != 5) continue;
      DraftColumn col;
      col.name = trim(parts[1]);
      col.dtype = dtype_from_string(trim(parts[2]));
      col.meaning = trim(parts[3]);
      for (const auto& e : split(parts[4], ';')) {
        const std::string v = trim(e);
        if (!v.empty()) col.examples.push_back(v);
      }
      ctx.facts.push_back(std::move(col));
    } else if (starts_with(line, "#aware:")) {
      const auto parts = split(line.substr(7), '|');
      if (parts.empty()) continue;
      const int count = parts.size() > 1 ? static_cast<int>(split(parts[1], ',').size()) : 0;
      ctx.aware.push_back({trim(parts[0]), count});
    } else if (starts_with(line, "#relation:")) {
      ctx.relations.push_back(trim(line.substr(10)));
    } else if (starts_with(line, "#overview:")) {
      ctx.overview = trim(line.substr(10));
    }
  }
  return ctx;
}

inline bool wants_referral(const std::string& question) {
  const std::string q = to_lower(question);
  return q.find("who else") != std::string::npos || q.find("who should") != std::string::npos ||
         q.find("who could") != std::string::npos;
}

/// Deterministic persona reply. Facts are only ever quoted for columns the
/// persona holds; a referral names exactly one aware peer (largest believed
/// knowledge, ties to the earliest listed) and never mentions column text,
/// and it only fires when the persona had nothing substantive to offer.
inline std::string persona_reply(const std::string& system_prompt, const std::string& question) {
  const PersonaContext ctx = parse_persona_context(system_prompt);
  const std::string q = to_lower(question);

  std::vector<const DraftColumn*> asked;
  for (const auto& col : ctx.facts) {
    if (mentions_phrase(question, col.name)) asked.push_back(&col);
  }
  const bool asked_overview =
      q.find("overview") != std::string::npos || q.find("overall") != std::string::npos;
  const bool asked_relations = q.find("relation") != std::string::npos;
  const bool asked_anything = q.find("column") != std::string::npos || asked_overview ||
                              asked_relations || !asked.empty() || wants_referral(question);

  if (!asked_anything) {
    return "Hi! Sure, happy to help where I can.";
  }

  std::string body;
  if (!asked.empty()) {
    body += "Here is what I know:\n";
    for (const DraftColumn* col : asked) body += "- " + render_draft_column(*col) + "\n";
  }
  if (asked_overview && !ctx.overview.empty()) {
    body += "The table overall: " + ctx.overview + "\n";
  }
  if (asked_relations && !ctx.relations.empty()) {
    body += "Known relations:\n";
    for (const auto& rel : ctx.relations) body += "- " + rel + "\n";
  }

  if (!body.empty()) return trim(body);

  std::string reply = "I'm sorry, I don't really know those details.";
  if (wants_referral(question) && !ctx.aware.empty()) {
    const std::pair<std::string, int>* best = &ctx.aware.front();
    for (const auto& peer : ctx.aware) {
      if (peer.second > best->second) best = &peer;
    }
    reply += " You could also ask " + best->first + ".";
  }
  return reply;
}

// ---- critic rule -----------------------------------------------------------

inline bool normalized_contains_either(const std::string& a, const std::string& b) {
  const std::string na = normalize_text(a);
  const std::string nb = normalize_text(b);
  if (na.empty() || nb.empty()) return false;
  return na.find(nb) != std::string::npos || nb.find(na) != std::string::npos;
}

struct CriticVerdict {
  int score = 0;
  std::vector<std::string> missing;  // what to chase next
};

/// Rubric tiers from the draft's own structure (the critic has no reference):
/// below 5 until every column has a dtype and a meaning, then +2 for examples
/// everywhere (+1 for some), +1 for any relation, +1 for an overview.
inline CriticVerdict critic_structural(const Draft& d) {
  CriticVerdict v;
  if (d.columns.empty()) return v;
  std::size_t core = 0, with_examples = 0;
  for (const auto& col : d.columns) {
    if (column_core_complete(col)) ++core;
    if (!col.examples.empty()) ++with_examples;
    if (!column_core_complete(col)) v.missing.push_back(col.name);
  }
  const double frac = static_cast<double>(core) / static_cast<double>(d.columns.size());
  if (core < d.columns.size()) {
    v.score = static_cast<int>(std::lround(4.0 * frac));
    return v;
  }
  v.score = 5;
  if (with_examples == d.columns.size()) {
    v.score += 2;
  } else if (with_examples > 0) {
    v.score += 1;
  }
  if (!d.relations.empty()) v.score += 1;
  if (!d.overview.empty()) v.score += 1;
  if (d.relations.empty()) v.missing.push_back("relations");
  if (d.overview.empty()) v.missing.push_back("overview");
  return v;
}

/// Same tiers, but completeness is judged against the reference description.
inline CriticVerdict critic_against_reference(const Draft& d, const Draft& ref) {
  CriticVerdict v;
  if (ref.columns.empty()) return v;
  std::size_t core = 0;
  bool examples_all = true, examples_any = false;
  for (const auto& rc : ref.columns) {
    const DraftColumn* dc = d.find_column(rc.name);
    const bool core_ok = dc && dc->dtype && rc.dtype && *dc->dtype == *rc.dtype &&
                         normalized_contains_either(dc->meaning, rc.meaning);
    if (core_ok) {
      ++core;
    } else {
      v.missing.push_back(rc.name);
    }
    for (const auto& ex : rc.examples) {
      bool found = false;
      if (dc) {
        for (const auto& de : dc->examples) {
          if (normalize_text(de) == normalize_text(ex)) {
            found = true;
            break;
          }
        }
      }
      if (found) {
        examples_any = true;
      } else {
        examples_all = false;
      }
    }
  }
  const double frac = static_cast<double>(core) / static_cast<double>(ref.columns.size());
  if (core < ref.columns.size()) {
    v.score = static_cast<int>(std::lround(4.0 * frac));
    return v;
  }
  v.score = 5;
  if (examples_all) {
    v.score += 2;
  } else if (examples_any) {
    v.score += 1;
  }
  bool relations_all = true;
  for (const auto& rr : ref.relations) {
    bool found = false;
    for (const auto& dr : d.relations) {
      if (normalized_contains_either(dr, rr)) {
        found = true;
        break;
      }
    }
    if (!found) relations_all = false;
  }
  if (relations_all) {
    v.score += 1;
  } else {
    v.missing.push_back("relations");
  }
  if (!d.overview.empty() && (ref.overview.empty() ||
                              normalized_contains_either(d.overview, ref.overview))) {
    v.score += 1;
  } else {
    v.missing.push_back("overview");
  }
  return v;
}

inline std::string critic_reply(const std::string& system_prompt) {
  const std::string description = extract_block(system_prompt, "DESCRIPTION");
  const std::string reference = extract_block(system_prompt, "REFERENCE");
  const Draft d = parse_draft(description);

  CriticVerdict v;
  if (reference.empty()) {
    v = critic_structural(d);
  } else {
    v = critic_against_reference(d, parse_draft(reference));
  }

  std::string reasoning;
  if (v.missing.empty()) {
    reasoning = "The description covers the columns, their types and meanings, examples, and "
                "the table context.";
  } else {
    reasoning = "The description is still incomplete; information is missing for: " +
                join(v.missing, ", ") + ".";
  }
  std::string suggestions;
  if (!v.missing.empty()) {
    suggestions = "Gather details on: " + join(v.missing, ", ") + ".";
  }
  return "Score: " + std::to_string(v.score) + "\nReasoning: " + reasoning +
         "\nSuggestions: " + suggestions;
}

// ---- judge rule ------------------------------------------------------------

inline std::string judge_reply(const std::string& system_prompt) {
  const std::string definition = prompt_header(system_prompt, "definition");
  const std::string reference = extract_block(system_prompt, "REFERENCE");
  const std::string candidate = extract_block(system_prompt, "CANDIDATE");

  std::set<std::string> ref_tokens, cand_tokens;
  for (const auto& t : tokenize(reference)) ref_tokens.insert(t);
  for (const auto& t : tokenize(candidate)) cand_tokens.insert(t);

  int rating = 1;
  if (!cand_tokens.empty() && !ref_tokens.empty()) {
    std::size_t shared = 0;
    for (const auto& t : cand_tokens) shared += ref_tokens.count(t);
    const double denom = definition == "faithfulness" ? static_cast<double>(cand_tokens.size())
                                                      : static_cast<double>(ref_tokens.size());
    const double ratio = static_cast<double>(shared) / denom;
    if (ratio >= 0.95) {
      rating = 5;
    } else if (ratio >= 0.7) {
      rating = 4;
    } else if (ratio >= 0.45) {
      rating = 3;
    } else if (ratio >= 0.2) {
      rating = 2;
    }
  }
  return "Rating: " + std::to_string(rating);
}

// ---- agent rules -----------------------------------------------------------

inline std::string greet_reply(const std::string& system_prompt) {
  const std::string who = prompt_header(system_prompt, "employee");
  const std::string table = prompt_header(system_prompt, "table");
  return "Hi " + who + "! I'm putting together documentation for the \"" + table +
         "\" table and was told you might be able to help. Mind if I ask a few questions?";
}

inline std::string question_reply(const std::string& system_prompt) {
  const Draft d = parse_draft(extract_block(system_prompt, "DRAFT"));
  std::vector<std::string> gaps;
  for (const auto& col : d.columns) {
    if (!column_core_complete(col)) gaps.push_back(col.name);
    if (gaps.size() == 5) break;
  }
  if (!gaps.empty()) {
    return "Could you tell me about these columns of the table: " + join(gaps, ", ") +
           " — their data type, what they mean, and a few example values? "
           "If you don't know them, who else could I ask?";
  }
  return "Could you share the table's overview and any relations between the columns? "
         "If you don't know, who else could I ask?";
}

inline std::string merge_reply(const std::string& system_prompt) {
  Draft draft = parse_draft(extract_block(system_prompt, "DRAFT"));
  const std::string reply = extract_block(system_prompt, "REPLY");

  std::set<std::string> roster;
  for (const std::string& line : split_lines(extract_block(system_prompt, "COLUMNS"))) {
    const std::string name = trim(line);
    if (!name.empty()) roster.insert(to_lower(name));
  }

  bool in_relations = false;
  for (const std::string& raw : split_lines(reply)) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (starts_with(to_lower(line), "known relations:")) {
      in_relations = true;
      continue;
    }
    if (starts_with(line, "The table overall:")) {
      if (draft.overview.empty()) draft.overview = trim(line.substr(18));
      continue;
    }
    if (!starts_with(line, "- ")) continue;
    if (in_relations) {
      const std::string rel = trim(line.substr(2));
      bool dup = false;
      for (const auto& existing : draft.relations) {
        if (normalize_text(existing) == normalize_text(rel)) {
          dup = true;
          break;
        }
      }
      if (!dup && !rel.empty()) draft.relations.push_back(rel);
      continue;
    }
    DraftColumn parsed = parse_draft_column(line);
    if (parsed.name.empty() || !roster.count(to_lower(parsed.name))) continue;
    DraftColumn* mine = draft.find_column(parsed.name);
    if (!mine) {
      draft.columns.push_back(parsed);
      continue;
    }
    if (!mine->dtype && parsed.dtype) mine->dtype = parsed.dtype;
    if (trim(mine->meaning).empty() && !parsed.meaning.empty()) mine->meaning = parsed.meaning;
    if (mine->examples.empty() && !parsed.examples.empty()) mine->examples = parsed.examples;
  }
  return render_draft(draft);
}

inline std::string decide_reply(const std::string& system_prompt) {
  const std::string reply = extract_block(system_prompt, "REPLY");
  if (reply.find("You could also ask") != std::string::npos) return "Decision: switch";
  const bool productive = reply.find("The table overall:") != std::string::npos ||
                          reply.find("Known relations:") != std::string::npos ||
                          reply.find("\n- ") != std::string::npos ||
                          starts_with(trim(reply), "- ");
  return productive ? "Decision: continue" : "Decision: switch";
}

}  // namespace scripted

class ScriptedBackend : public ChatBackend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(const BackendConfig& config) : config_(config) {}

  std::string complete(const std::vector<ChatMessage>& messages) override {
    if (messages.empty()) throw RoutingError("scripted backend: empty message list");
    const ChatMessage& head = messages.front();
    if (head.role != Role::kSystem) {
      throw RoutingError("scripted backend: first message must be a system prompt");
    }
    const std::string role = prompt_header(head.content, "role");

    if (role == "generator") return scripted::generate_reply(head.content);
    if (role == "persona") return scripted::persona_reply(head.content, last_user(messages));
    if (role == "critic") return scripted::critic_reply(head.content);
    if (role == "judge") return scripted::judge_reply(head.content);
    if (role == "agent") {
      const std::string task = prompt_header(head.content, "task");
      if (task == "greet") return scripted::greet_reply(head.content);
      if (task == "question") return scripted::question_reply(head.content);
      if (task == "merge") return scripted::merge_reply(head.content);
      if (task == "decide") return scripted::decide_reply(head.content);
      throw RoutingError("scripted backend: unknown #task tag: " + task);
    }
    throw RoutingError("scripted backend: unknown #role tag: " + role);
  }

 private:
  static std::string last_user(const std::vector<ChatMessage>& messages) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
      if (it->role == Role::kUser) return it->content;
    }
    return "";
  }

  BackendConfig config_;
};

inline std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
  if (config.kind == BackendKind::kScripted) {
    return std::make_unique<ScriptedBackend>(config);
  }
  return std::make_unique<LiveBackend>(config);
}

}  // namespace tacitsim

