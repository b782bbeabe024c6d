#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tacitsim/knowledge.hpp"
#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// The agent's evolving table description ("draft") uses the same line grammar
// as the canonical rendering of TableKnowledge, but every piece of a column
// beyond its name is optional:
//
//   Table: orders
//   Overview: (unknown)
//   Columns:
//   - order_id (integer): Unique order key. Examples: 17; 204.
//   - ship_date
//   Relations:
//   - (none)
//
// "(unknown)" and "- (none)" are placeholders for absent overview/relations;
// parsing folds them back to empty.
// ---------------------------------------------------------------------------

struct DraftColumn {
  std::string name;
  std::optional<Dtype> dtype;
  std::string meaning;
  std::vector<std::string> examples;

  bool operator==(const DraftColumn&) const = default;
};

struct Draft {
  std::string table_name;
  std::string overview;
  std::vector<DraftColumn> columns;
  std::vector<std::string> relations;

  bool operator==(const Draft&) const = default;

  const DraftColumn* find_column(const std::string& name) const {
    const std::string needle = to_lower(trim(name));
    for (const auto& c : columns) {
      if (to_lower(c.name) == needle) return &c;
    }
    return nullptr;
  }

  DraftColumn* find_column(const std::string& name) {
    return const_cast<DraftColumn*>(static_cast<const Draft*>(this)->find_column(name));
  }
};

inline constexpr const char* kUnknownOverview = "(unknown)";
inline constexpr const char* kNoRelations = "(none)";

/// Parses one "- ..." bullet as a column. Grammar, all tail parts optional:
///   name [" (" dtype ")"] [": " meaning] [" Examples: " e1 "; " e2 "."]
inline DraftColumn parse_draft_column(const std::string& bullet) {
  DraftColumn col;
  std::string body = trim(bullet);
  if (starts_with(body, "- ")) body = trim(body.substr(2));

  std::string tail;
  if (auto ex = body.find("Examples:"); ex != std::string::npos) {
    tail = trim(body.substr(ex + 9));
    body = trim(body.substr(0, ex));
    for (auto& e : split(tail, ';')) {
      std::string item = trim(e);
      if (!item.empty() && item.back() == '.') item = trim(item.substr(0, item.size() - 1));
      if (!item.empty()) col.examples.push_back(item);
    }
  }

  std::string head = body;
  if (auto colon = body.find(':'); colon != std::string::npos) {
    head = trim(body.substr(0, colon));
    col.meaning = trim(body.substr(colon + 1));
    while (!col.meaning.empty() && col.meaning.back() == '.') {
      col.meaning = trim(col.meaning.substr(0, col.meaning.size() - 1));
    }
  }
  if (!head.empty() && head.back() == ')') {
    if (auto open = head.rfind(" ("); open != std::string::npos) {
      const std::string inner = to_lower(trim(head.substr(open + 2, head.size() - open - 3)));
      if (auto dt = dtype_from_string(inner)) {
        col.dtype = *dt;
        head = trim(head.substr(0, open));
      }
    }
  }
  col.name = head;
  return col;
}

inline std::string render_draft_column(const DraftColumn& col) {
  std::string s = col.name;
  if (col.dtype) s += " (" + dtype_to_string(*col.dtype) + ")";
  if (!col.meaning.empty()) {
    s += ": " + col.meaning;
    if (s.back() != '.') s += ".";
  }
  if (!col.examples.empty()) s += " Examples: " + render_examples(col.examples) + ".";
  return s;
}

/// Parses draft text. Unrecognized prose lines outside bullet sections are
/// ignored, which keeps the parser usable on live-model output.
inline Draft parse_draft(const std::string& text) {
  Draft d;
  enum class Section { kNone, kColumns, kRelations };
  Section section = Section::kNone;
  for (const std::string& raw : split_lines(text)) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::string lower = to_lower(line);
    if (starts_with(lower, "table:")) {
      d.table_name = trim(line.substr(6));
      section = Section::kNone;
    } else if (starts_with(lower, "overview:")) {
      std::string ov = trim(line.substr(9));
      if (to_lower(ov) != kUnknownOverview) d.overview = ov;
      section = Section::kNone;
    } else if (lower == "columns:") {
      section = Section::kColumns;
    } else if (lower == "relations:") {
      section = Section::kRelations;
    } else if (starts_with(line, "- ") || line == "-") {
      if (section == Section::kColumns) {
        DraftColumn col = parse_draft_column(line);
        if (!col.name.empty()) d.columns.push_back(std::move(col));
      } else if (section == Section::kRelations) {
        std::string rel = trim(line.substr(1));
        if (!rel.empty() && to_lower(rel) != kNoRelations) d.relations.push_back(rel);
      }
    }
  }
  return d;
}

/// Canonical rendering; a draft holding the complete table renders to exactly
/// the same text as render_knowledge on the source table.
inline std::string render_draft(const Draft& d) {
  std::string out = "Table: " + d.table_name + "\n";
  out += "Overview: " + (d.overview.empty() ? std::string(kUnknownOverview) : d.overview) + "\n";
  out += "Columns:\n";
  for (const auto& col : d.columns) out += "- " + render_draft_column(col) + "\n";
  out += "Relations:\n";
  if (d.relations.empty()) {
    out += std::string("- ") + kNoRelations + "\n";
  } else {
    for (const auto& rel : d.relations) out += "- " + rel + "\n";
  }
  return out;
}

/// The agent's starting point: table name and bare column names only.
inline Draft draft_skeleton(const TableKnowledge& k) {
  Draft d;
  d.table_name = k.table_name;
  for (const auto& col : k.columns) d.columns.push_back(DraftColumn{col.name, {}, "", {}});
  return d;
}

/// A fully populated draft, used for references and fixtures.
inline Draft draft_from_knowledge(const TableKnowledge& k) {
  Draft d;
  d.table_name = k.table_name;
  d.overview = k.overview;
  for (const auto& col : k.columns) {
    d.columns.push_back(DraftColumn{col.name, col.dtype, col.meaning, col.examples});
  }
  d.relations = k.relations;
  return d;
}

/// True when the column carries both a dtype and a non-empty meaning.
inline bool column_core_complete(const DraftColumn& col) {
  return col.dtype.has_value() && !trim(col.meaning).empty();
}

}  // namespace tacitsim
