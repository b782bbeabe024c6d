#pragma once

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tacitsim/backend.hpp"
#include "tacitsim/prompts.hpp"
#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Ground-truth table knowledge: the complete description the simulation
// fragments across the organization and the agent later reconstructs.
// ---------------------------------------------------------------------------

enum class Dtype { kInteger, kFloat, kString, kBoolean, kDate, kCategorical };

inline const std::vector<std::pair<Dtype, std::string>>& dtype_names() {
  static const std::vector<std::pair<Dtype, std::string>> names = {
      {Dtype::kInteger, "integer"},
      {Dtype::kFloat, "float"},
      {Dtype::kString, "string"},
      {Dtype::kBoolean, "boolean"},
      {Dtype::kDate, "date"},
      {Dtype::kCategorical, "categorical"},
  };
  return names;
}

inline std::string dtype_to_string(Dtype d) {
  for (const auto& [k, v] : dtype_names()) {
    if (k == d) return v;
  }
  return "string";
}

inline std::optional<Dtype> dtype_from_string(const std::string& s) {
  const std::string key = to_lower(trim(s));
  for (const auto& [k, v] : dtype_names()) {
    if (v == key) return k;
  }
  return std::nullopt;
}

struct ColumnSpec {
  std::string name;                   // identifier-style, unique within a table
  Dtype dtype = Dtype::kString;
  std::string meaning;                // free text
  std::vector<std::string> examples;  // 1-5 literal values parsing as dtype

  bool operator==(const ColumnSpec&) const = default;
};

struct TableKnowledge {
  std::string subject;
  std::string table_name;
  std::string overview;
  std::vector<ColumnSpec> columns;
  std::vector<std::string> relations;

  bool operator==(const TableKnowledge&) const = default;
};

/// One unit of disseminated information: full understanding of one column.
struct Fact {
  int column_index = 0;

  bool operator==(const Fact&) const = default;
  bool operator<(const Fact& o) const { return column_index < o.column_index; }
};

/// The 18 industry sectors a table subject is drawn from.
inline const std::vector<std::string>& subject_catalog() {
  static const std::vector<std::string> subjects = {
      "aerospace", "agriculture", "automotive", "business",       "construction", "finances",
      "food service", "healthcare", "machinery",  "mining",         "oil",          "packaging",
      "energy",    "retail",      "sports",     "transportation", "tourism",      "tech",
  };
  return subjects;
}

inline bool is_known_subject(const std::string& subject) {
  const auto& cat = subject_catalog();
  return std::find(cat.begin(), cat.end(), subject) != cat.end();
}

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KnowledgeParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Validation.
// ---------------------------------------------------------------------------

inline bool example_parses_as(const std::string& value, Dtype dtype) {
  const std::string v = trim(value);
  if (v.empty()) return false;
  switch (dtype) {
    case Dtype::kInteger: {
      std::size_t i = (v[0] == '+' || v[0] == '-') ? 1 : 0;
      if (i >= v.size()) return false;
      for (; i < v.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(v[i]))) return false;
      }
      return true;
    }
    case Dtype::kFloat: {
      char* end = nullptr;
      std::strtod(v.c_str(), &end);
      return end && *end == '\0';
    }
    case Dtype::kBoolean: {
      const std::string b = to_lower(v);
      return b == "true" || b == "false";
    }
    case Dtype::kDate: {
      // ISO date YYYY-MM-DD.
      if (v.size() != 10 || v[4] != '-' || v[7] != '-') return false;
      for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(v[i]))) return false;
      }
      return true;
    }
    case Dtype::kString:
    case Dtype::kCategorical:
      return true;
  }
  return false;
}

inline bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  for (unsigned char c : s) {
    if (!std::isalnum(c) && c != '_') return false;
  }
  return true;
}

/// Schema validation shared by the generator parser and file loading.
inline void validate_knowledge(const TableKnowledge& k) {
  if (k.columns.empty()) throw KnowledgeParseError("table has no columns");
  if (k.table_name.empty()) throw KnowledgeParseError("table name empty");
  std::set<std::string> seen;
  for (const auto& col : k.columns) {
    if (!is_identifier(col.name)) {
      throw KnowledgeParseError("column name is not an identifier: '" + col.name + "'");
    }
    if (!seen.insert(col.name).second) {
      throw KnowledgeParseError("duplicate column name: " + col.name);
    }
    if (col.meaning.empty()) throw KnowledgeParseError("column meaning empty: " + col.name);
    if (col.examples.empty() || col.examples.size() > 5) {
      throw KnowledgeParseError("column must carry 1-5 examples: " + col.name);
    }
    for (const auto& ex : col.examples) {
      if (!example_parses_as(ex, col.dtype)) {
        throw KnowledgeParseError("example '" + ex + "' does not parse as " +
                                  dtype_to_string(col.dtype) + " in column " + col.name);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Fenced-block wire format emitted by the generation prompt:
//
//   ```table
//   TABLE: <name>
//   OVERVIEW: <one line>
//   COLUMNS:
//   name | dtype | meaning | ex1; ex2
//   RELATIONS:
//   - <statement>
//   ```
// ---------------------------------------------------------------------------

inline TableKnowledge parse_knowledge_block(const std::string& reply, const std::string& subject) {
  std::size_t fence = reply.find("```");
  if (fence == std::string::npos) throw KnowledgeParseError("no fenced block in reply");
  std::size_t body_begin = reply.find('\n', fence);
  if (body_begin == std::string::npos) throw KnowledgeParseError("fence never opens");
  std::size_t fence_end = reply.find("```", body_begin);
  if (fence_end == std::string::npos) throw KnowledgeParseError("fence never closes");

  TableKnowledge k;
  k.subject = subject;
  enum class Section { kPreamble, kColumns, kRelations } section = Section::kPreamble;
  for (const std::string& raw : split_lines(reply.substr(body_begin + 1, fence_end - body_begin - 1))) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (starts_with(line, "TABLE:")) {
      k.table_name = trim(line.substr(6));
    } else if (starts_with(line, "OVERVIEW:")) {
      k.overview = trim(line.substr(9));
    } else if (line == "COLUMNS:") {
      section = Section::kColumns;
    } else if (line == "RELATIONS:") {
      section = Section::kRelations;
    } else if (section == Section::kColumns) {
      std::vector<std::string> parts = split(line, '|');
      if (parts.size() != 4) {
        throw KnowledgeParseError("column line needs 4 '|' fields: " + line);
      }
      ColumnSpec col;
      col.name = trim(parts[0]);
      auto dtype = dtype_from_string(parts[1]);
      if (!dtype) throw KnowledgeParseError("unknown dtype in: " + line);
      col.dtype = *dtype;
      col.meaning = trim(parts[2]);
      for (const std::string& ex : split(parts[3], ';')) {
        if (!trim(ex).empty()) col.examples.push_back(trim(ex));
      }
      k.columns.push_back(std::move(col));
    } else if (section == Section::kRelations) {
      std::string stmt = line;
      if (starts_with(stmt, "- ")) stmt = trim(stmt.substr(2));
      if (!stmt.empty() && stmt != "(none)") k.relations.push_back(stmt);
    }
  }
  validate_knowledge(k);
  return k;
}

// ---------------------------------------------------------------------------
// Operations.
// ---------------------------------------------------------------------------

/// Asks the backend for a complete synthetic table description. Re-prompts on
/// malformed output up to the attempt budget, then gives up.
inline TableKnowledge generate_knowledge(const std::string& subject, int n_columns,
                                         ChatBackend& backend, const PromptPack& prompts,
                                         std::uint64_t rng_seed, int max_attempts = 3) {
  if (!is_known_subject(subject)) {
    throw GenerationError("subject not in catalog: " + subject);
  }
  if (n_columns < 1) throw GenerationError("n_columns must be >= 1");

  std::vector<ChatMessage> messages;
  messages.push_back(system_msg(prompts.render("knowledge", {
                                                   {"subject", subject},
                                                   {"n_columns", std::to_string(n_columns)},
                                                   {"seed", std::to_string(rng_seed)},
                                               })));
  messages.push_back(user_msg("Produce the table description now."));

  std::string parse_failure;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::string reply;
    try {
      reply = backend.complete(messages);
    } catch (const BackendError& e) {
      throw GenerationError(std::string("knowledge generation backend failure: ") + e.what());
    }
    try {
      TableKnowledge k = parse_knowledge_block(reply, subject);
      if (static_cast<int>(k.columns.size()) != n_columns) {
        throw KnowledgeParseError("expected " + std::to_string(n_columns) + " columns, got " +
                                  std::to_string(k.columns.size()));
      }
      return k;
    } catch (const KnowledgeParseError& e) {
      parse_failure = e.what();
      messages.push_back(assistant_msg(reply));
      messages.push_back(user_msg(
          std::string("That output could not be parsed (") + e.what() +
          "). Reply again with exactly one fenced block in the required format."));
    }
  }
  throw KnowledgeParseError("knowledge generation unparseable after " +
                            std::to_string(max_attempts) + " attempts: " + parse_failure);
}

/// One fact per column, in column order.
inline std::vector<Fact> facts_of(const TableKnowledge& k) {
  std::vector<Fact> out;
  out.reserve(k.columns.size());
  for (int i = 0; i < static_cast<int>(k.columns.size()); ++i) out.push_back(Fact{i});
  return out;
}

// ---------------------------------------------------------------------------
// Canonical text renderings used by personas, evaluation, and the critic
// context block.
// ---------------------------------------------------------------------------

inline std::string render_examples(const std::vector<std::string>& examples) {
  return join(examples, "; ");
}

/// The reference sentence for one column.
inline std::string render_column_sentence(const ColumnSpec& col) {
  std::string s = col.name + " (" + dtype_to_string(col.dtype) + "): " + col.meaning;
  if (!s.empty() && s.back() != '.') s += ".";
  if (!col.examples.empty()) s += " Examples: " + render_examples(col.examples) + ".";
  return s;
}

/// Full canonical rendering of a table description.
inline std::string render_knowledge(const TableKnowledge& k) {
  std::string out = "Table: " + k.table_name + "\n";
  out += "Overview: " + k.overview + "\n";
  out += "Columns:\n";
  for (const auto& col : k.columns) out += "- " + render_column_sentence(col) + "\n";
  out += "Relations:\n";
  if (k.relations.empty()) {
    out += "- (none)\n";
  } else {
    for (const auto& rel : k.relations) out += "- " + rel + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON persistence (knowledge.json).
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ColumnSpec& col) {
  j = nlohmann::json{{"name", col.name},
                     {"dtype", dtype_to_string(col.dtype)},
                     {"meaning", col.meaning},
                     {"examples", col.examples}};
}

inline void from_json(const nlohmann::json& j, ColumnSpec& col) {
  col.name = j.at("name").get<std::string>();
  auto dtype = dtype_from_string(j.at("dtype").get<std::string>());
  if (!dtype) throw KnowledgeParseError("unknown dtype: " + j.at("dtype").get<std::string>());
  col.dtype = *dtype;
  col.meaning = j.at("meaning").get<std::string>();
  col.examples = j.at("examples").get<std::vector<std::string>>();
}

inline void to_json(nlohmann::json& j, const TableKnowledge& k) {
  j = nlohmann::json{{"subject", k.subject},
                     {"table_name", k.table_name},
                     {"overview", k.overview},
                     {"columns", k.columns},
                     {"relations", k.relations}};
}

inline void from_json(const nlohmann::json& j, TableKnowledge& k) {
  k.subject = j.at("subject").get<std::string>();
  k.table_name = j.at("table_name").get<std::string>();
  k.overview = j.at("overview").get<std::string>();
  k.columns = j.at("columns").get<std::vector<ColumnSpec>>();
  k.relations = j.at("relations").get<std::vector<std::string>>();
}

inline void save_knowledge(const TableKnowledge& k, const std::filesystem::path& path) {
  write_file_atomic(path, nlohmann::json(k).dump(2) + "\n");
}

inline TableKnowledge load_knowledge(const std::filesystem::path& path) {
  TableKnowledge k = nlohmann::json::parse(read_file(path)).get<TableKnowledge>();
  validate_knowledge(k);
  return k;
}

}  // namespace tacitsim
