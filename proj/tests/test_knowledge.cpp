#include <gtest/gtest.h>

#include <filesystem>

#include "tacitsim/knowledge.hpp"
#include "tacitsim/prompts.hpp"
#include "tacitsim/scripted.hpp"

using namespace tacitsim;

namespace {

TableKnowledge small_table() {
  TableKnowledge k;
  k.subject = "retail";
  k.table_name = "orders";
  k.overview = "Tracks customer orders placed in the online store.";
  k.columns = {
      {"order_id", Dtype::kString, "Unique identifier of the order", {"ord_1", "ord_2"}},
      {"total", Dtype::kFloat, "Order total in euros", {"12.5", "99.99"}},
      {"created", Dtype::kDate, "Day the order was placed", {"2023-01-05"}},
  };
  k.relations = {"When total rises, created clusters near month end."};
  return k;
}

PromptPack prompts() { return PromptPack::load(default_prompt_dir()); }

}  // namespace

TEST(Dtype, RoundTripNames) {
  for (const auto& [d, name] : dtype_names()) {
    const auto parsed = dtype_from_string(name);
    ASSERT_TRUE(parsed.has_value()) << name;
    EXPECT_EQ(*parsed, d);
    EXPECT_EQ(dtype_to_string(d), name);
  }
  EXPECT_FALSE(dtype_from_string("varchar").has_value());
  EXPECT_EQ(dtype_from_string(" Integer "), Dtype::kInteger);
}

TEST(Examples, ParseByDtype) {
  EXPECT_TRUE(example_parses_as("-42", Dtype::kInteger));
  EXPECT_FALSE(example_parses_as("4.2", Dtype::kInteger));
  EXPECT_TRUE(example_parses_as("4.2", Dtype::kFloat));
  EXPECT_FALSE(example_parses_as("4.2x", Dtype::kFloat));
  EXPECT_TRUE(example_parses_as("True", Dtype::kBoolean));
  EXPECT_FALSE(example_parses_as("yes", Dtype::kBoolean));
  EXPECT_TRUE(example_parses_as("2023-11-01", Dtype::kDate));
  EXPECT_FALSE(example_parses_as("2023/11/01", Dtype::kDate));
  EXPECT_FALSE(example_parses_as("2023-1-01", Dtype::kDate));
  EXPECT_TRUE(example_parses_as("anything", Dtype::kString));
}

TEST(Validation, CatchesSchemaViolations) {
  auto k = small_table();
  EXPECT_NO_THROW(validate_knowledge(k));

  auto bad = k;
  bad.columns[1].name = "order id";  // space
  EXPECT_THROW(validate_knowledge(bad), KnowledgeParseError);

  bad = k;
  bad.columns[1].name = "order_id";  // duplicate
  EXPECT_THROW(validate_knowledge(bad), KnowledgeParseError);

  bad = k;
  bad.columns[0].examples = {"ok", "2", "3", "4", "5", "6"};  // too many
  EXPECT_THROW(validate_knowledge(bad), KnowledgeParseError);

  bad = k;
  bad.columns[1].examples = {"not_a_float"};
  EXPECT_THROW(validate_knowledge(bad), KnowledgeParseError);

  bad = k;
  bad.columns.clear();
  EXPECT_THROW(validate_knowledge(bad), KnowledgeParseError);
}

TEST(Parse, FencedBlockHappyPath) {
  const std::string reply =
      "Here is the table.\n```table\n"
      "TABLE: shipments\n"
      "OVERVIEW: Daily shipment movements.\n"
      "COLUMNS:\n"
      "shipment_id | string | Unique shipment code | s_100; s_101\n"
      "weight_kg | float | Gross weight | 12.5; 7\n"
      "RELATIONS:\n"
      "- Heavier shipments move slower.\n"
      "```\nAnything after is ignored.";
  const TableKnowledge k = parse_knowledge_block(reply, "transportation");
  EXPECT_EQ(k.subject, "transportation");
  EXPECT_EQ(k.table_name, "shipments");
  ASSERT_EQ(k.columns.size(), 2u);
  EXPECT_EQ(k.columns[1].dtype, Dtype::kFloat);
  ASSERT_EQ(k.relations.size(), 1u);
  EXPECT_EQ(k.relations[0], "Heavier shipments move slower.");
}

TEST(Parse, RejectsMalformedBlocks) {
  EXPECT_THROW(parse_knowledge_block("no fence at all", "retail"), KnowledgeParseError);
  EXPECT_THROW(parse_knowledge_block("```table\nTABLE: t\n", "retail"), KnowledgeParseError);
  const std::string missing_field =
      "```table\nTABLE: t\nOVERVIEW: o\nCOLUMNS:\na | integer | meaning\n```";
  EXPECT_THROW(parse_knowledge_block(missing_field, "retail"), KnowledgeParseError);
}

TEST(Render, KnowledgeLayout) {
  const auto k = small_table();
  const std::string text = render_knowledge(k);
  EXPECT_NE(text.find("Table: orders\n"), std::string::npos);
  EXPECT_NE(text.find("Overview: Tracks customer orders"), std::string::npos);
  EXPECT_NE(text.find("- order_id (string): Unique identifier of the order. "
                      "Examples: ord_1; ord_2."),
            std::string::npos);
  EXPECT_NE(text.find("Relations:\n- When total rises"), std::string::npos);
  // column sentence is the bullet body
  EXPECT_EQ(render_column_sentence(k.columns[2]),
            "created (date): Day the order was placed. Examples: 2023-01-05.");
}

TEST(Facts, OnePerColumnInOrder) {
  const auto facts = facts_of(small_table());
  ASSERT_EQ(facts.size(), 3u);
  EXPECT_EQ(facts[0].column_index, 0);
  EXPECT_EQ(facts[2].column_index, 2);
}

TEST(Json, RoundTrip) {
  namespace fs = std::filesystem;
  const auto k = small_table();
  const fs::path p = fs::temp_directory_path() / "tacitsim_knowledge_test.json";
  save_knowledge(k, p);
  EXPECT_EQ(load_knowledge(p), k);
  fs::remove(p);
}

TEST(Generation, ScriptedBackendProducesValidTables) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kScripted;
  auto backend = make_backend(cfg);
  const auto pack = prompts();

  const TableKnowledge k = generate_knowledge("mining", 5, *backend, pack, 11);
  EXPECT_EQ(k.subject, "mining");
  EXPECT_EQ(k.columns.size(), 5u);
  EXPECT_NO_THROW(validate_knowledge(k));
  EXPECT_FALSE(k.relations.empty());
  EXPECT_FALSE(k.overview.empty());

  // deterministic in the seed, varies across seeds
  const TableKnowledge again = generate_knowledge("mining", 5, *backend, pack, 11);
  EXPECT_EQ(again, k);
  const TableKnowledge other = generate_knowledge("mining", 5, *backend, pack, 12);
  EXPECT_NE(other, k);

  // column-count contract holds for the larger setting too
  EXPECT_EQ(generate_knowledge("tech", 20, *backend, pack, 3).columns.size(), 20u);
}

TEST(Generation, RejectsUnknownSubject) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kScripted;
  auto backend = make_backend(cfg);
  const auto pack = prompts();
  EXPECT_THROW(generate_knowledge("astrology", 5, *backend, pack, 1), GenerationError);
}
