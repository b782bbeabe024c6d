#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tacitsim/backend.hpp"
#include "tacitsim/dissemination.hpp"
#include "tacitsim/knowledge.hpp"
#include "tacitsim/orggen.hpp"
#include "tacitsim/prompts.hpp"
#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Personas: each employee's textual background plus the knowledge rules
// governing how they answer the agent. Awareness of colleagues' knowledge is
// correct but incomplete: an employee can only believe a neighbor knows a
// fact that the neighbor actually holds.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& archetype_catalog() {
  static const std::vector<std::string> archetypes = {
      "methodical", "chatty", "terse", "skeptical", "helpful", "busy", "new-hire", "veteran",
  };
  return archetypes;
}

struct PersonaProfile {
  EmployeeId employee_id = 0;
  std::string archetype;
  std::string background_text;
  FactSet known_facts;
  std::map<EmployeeId, FactSet> peer_awareness;

  bool operator==(const PersonaProfile&) const = default;
};

namespace detail {

inline std::string archetype_flavor(const std::string& archetype) {
  if (archetype == "methodical") return "You answer carefully and precisely.";
  if (archetype == "chatty") return "You enjoy talking and add a friendly aside now and then.";
  if (archetype == "terse") return "You keep answers as short as possible.";
  if (archetype == "skeptical") return "You like to know why someone is asking.";
  if (archetype == "helpful") return "You go out of your way to be useful.";
  if (archetype == "busy") return "You answer quickly between meetings.";
  if (archetype == "new-hire") return "You joined recently and are still finding your feet.";
  return "You have seen the company change a lot over the years.";
}

}  // namespace detail

/// Builds one profile per employee. For every neighbor pair (u, v) and every
/// fact v holds, u becomes aware of it independently with awareness_prob.
inline std::vector<PersonaProfile> build_personas(const OrgStructure& org,
                                                  const DisseminationResult& spread,
                                                  double awareness_prob,
                                                  std::uint64_t rng_seed) {
  if (awareness_prob < 0.0 || awareness_prob > 1.0) {
    throw std::invalid_argument("awareness_prob must lie in [0, 1]");
  }
  if (static_cast<int>(spread.knowledge.size()) != org.size()) {
    throw std::invalid_argument("spread result does not cover this organization");
  }

  std::vector<PersonaProfile> profiles(static_cast<std::size_t>(org.size()));
  for (EmployeeId id = 0; id < org.size(); ++id) {
    Rng rng(mix_seed(rng_seed, 0xBA5E, static_cast<std::uint64_t>(id)));
    PersonaProfile& p = profiles[static_cast<std::size_t>(id)];
    p.employee_id = id;
    p.archetype = archetype_catalog()[rng.uniform_index(archetype_catalog().size())];
    const int tenure = 1 + static_cast<int>(rng.uniform_index(24));
    const Employee& e = org.employee(id);
    p.background_text = e.display_name + " is a " + p.archetype + " " + e.role_title +
                        " who has been with the company for " + std::to_string(tenure) +
                        (tenure == 1 ? " year. " : " years. ") +
                        detail::archetype_flavor(p.archetype);
    p.known_facts = spread.knowledge[static_cast<std::size_t>(id)];
  }

  Rng awareness_rng(mix_seed(rng_seed, 0xAA33));
  for (EmployeeId u = 0; u < org.size(); ++u) {
    for (EmployeeId v : org.neighbors(u)) {
      for (const Fact& f : spread.knowledge[static_cast<std::size_t>(v)]) {
        if (awareness_rng.bernoulli(awareness_prob)) {
          profiles[static_cast<std::size_t>(u)].peer_awareness[v].insert(f);
        }
      }
    }
  }
  return profiles;
}

/// Columns a relation statement names, as indices into k.columns.
inline std::vector<int> relation_mentions(const TableKnowledge& k, const std::string& relation) {
  std::vector<int> out;
  for (std::size_t i = 0; i < k.columns.size(); ++i) {
    if (mentions_phrase(relation, k.columns[i].name)) out.push_back(static_cast<int>(i));
  }
  return out;
}

inline bool knows_all_facts(const PersonaProfile& p, const TableKnowledge& k) {
  return p.known_facts.size() == k.columns.size();
}

/// A persona can state a relation iff it holds the facts of every column the
/// relation names; a relation naming no columns (or the table overview) is
/// only known to personas holding every fact.
inline bool knows_relation(const PersonaProfile& p, const TableKnowledge& k,
                           const std::string& relation) {
  const std::vector<int> mentioned = relation_mentions(k, relation);
  if (mentioned.empty()) return knows_all_facts(p, k);
  for (int idx : mentioned) {
    if (!p.known_facts.count(Fact{idx})) return false;
  }
  return true;
}

/// Renders the persona's system prompt from persona.tmpl. Structured #fact /
/// #aware / #relation / #overview lines carry the ground truth so the
/// scripted backend can answer without any side channel; a live model reads
/// the same lines as its context.
inline std::string render_persona_prompt(const PersonaProfile& p, const OrgStructure& org,
                                         const TableKnowledge& k, const PromptPack& prompts) {
  std::string fact_lines;
  for (const Fact& f : p.known_facts) {
    const ColumnSpec& col = k.columns.at(static_cast<std::size_t>(f.column_index));
    fact_lines += "#fact: " + std::to_string(f.column_index) + "|" + col.name + "|" +
                  dtype_to_string(col.dtype) + "|" + col.meaning + "|" +
                  render_examples(col.examples) + "\n";
  }
  std::string aware_lines;
  for (const auto& [peer, facts] : p.peer_awareness) {
    std::string idxs;
    for (const Fact& f : facts) {
      if (!idxs.empty()) idxs += ",";
      idxs += std::to_string(f.column_index);
    }
    aware_lines += "#aware: " + org.employee(peer).display_name + "|" + idxs + "\n";
  }
  std::string relation_lines;
  for (const std::string& rel : k.relations) {
    if (knows_relation(p, k, rel)) relation_lines += "#relation: " + rel + "\n";
  }
  std::string overview_line;
  if (knows_all_facts(p, k)) overview_line = "#overview: " + k.overview + "\n";

  return prompts.render("persona", {
                                       {"display_name", org.employee(p.employee_id).display_name},
                                       {"employee_id", std::to_string(p.employee_id)},
                                       {"role_title", org.employee(p.employee_id).role_title},
                                       {"table_name", k.table_name},
                                       {"background", p.background_text},
                                       {"fact_lines", fact_lines},
                                       {"aware_lines", aware_lines},
                                       {"relation_lines", relation_lines},
                                       {"overview_line", overview_line},
                                   });
}

/// One question/answer exchange with a persona. `history` is the prior
/// conversation (alternating assistant = persona, user = agent).
inline std::string answer_query(const PersonaProfile& p, const OrgStructure& org,
                                const TableKnowledge& k, const PromptPack& prompts,
                                const std::string& question,
                                const std::vector<ChatMessage>& history, ChatBackend& backend) {
  std::vector<ChatMessage> messages;
  messages.push_back(system_msg(render_persona_prompt(p, org, k, prompts)));
  messages.insert(messages.end(), history.begin(), history.end());
  messages.push_back(user_msg(question));
  return backend.complete(messages);
}

// ---------------------------------------------------------------------------
// JSON persistence (personas.json).
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const PersonaProfile& p) {
  nlohmann::json known = nlohmann::json::array();
  for (const Fact& f : p.known_facts) known.push_back(f.column_index);
  nlohmann::json aware = nlohmann::json::array();
  for (const auto& [peer, facts] : p.peer_awareness) {
    nlohmann::json fs = nlohmann::json::array();
    for (const Fact& f : facts) fs.push_back(f.column_index);
    aware.push_back({{"peer", peer}, {"facts", std::move(fs)}});
  }
  j = nlohmann::json{{"employee_id", p.employee_id},
                     {"archetype", p.archetype},
                     {"background_text", p.background_text},
                     {"known_facts", std::move(known)},
                     {"peer_awareness", std::move(aware)}};
}

inline void from_json(const nlohmann::json& j, PersonaProfile& p) {
  p.employee_id = j.at("employee_id").get<int>();
  p.archetype = j.at("archetype").get<std::string>();
  p.background_text = j.at("background_text").get<std::string>();
  p.known_facts.clear();
  for (const auto& idx : j.at("known_facts")) p.known_facts.insert(Fact{idx.get<int>()});
  p.peer_awareness.clear();
  for (const auto& entry : j.at("peer_awareness")) {
    FactSet fs;
    for (const auto& idx : entry.at("facts")) fs.insert(Fact{idx.get<int>()});
    p.peer_awareness[entry.at("peer").get<int>()] = std::move(fs);
  }
}

inline void save_personas(const std::vector<PersonaProfile>& personas,
                          const std::filesystem::path& path) {
  write_file_atomic(path, nlohmann::json(personas).dump(2) + "\n");
}

inline std::vector<PersonaProfile> load_personas(const std::filesystem::path& path) {
  return nlohmann::json::parse(read_file(path)).get<std::vector<PersonaProfile>>();
}

}  // namespace tacitsim
