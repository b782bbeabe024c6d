#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "tacitsim/prompts.hpp"

using namespace tacitsim;
namespace fs = std::filesystem;

TEST(PromptPack, LoadsEveryRequiredTemplate) {
  const PromptPack pack = PromptPack::load(default_prompt_dir());
  ASSERT_EQ(PromptPack::required_templates().size(), 10u);
  for (const std::string& name : PromptPack::required_templates()) {
    EXPECT_FALSE(pack.raw(name).empty()) << name;
  }
}

TEST(PromptPack, EveryTemplateRoutesToAScriptedRule) {
  const PromptPack pack = PromptPack::load(default_prompt_dir());
  const std::set<std::string> known_roles = {"generator", "persona", "critic", "judge", "agent"};
  for (const std::string& name : PromptPack::required_templates()) {
    const std::string& raw = pack.raw(name);
    const auto pos = raw.find("#role: ");
    ASSERT_NE(pos, std::string::npos) << name << " carries no #role header";
    const auto eol = raw.find('\n', pos);
    const std::string role = raw.substr(pos + 7, eol - pos - 7);
    EXPECT_TRUE(known_roles.count(role)) << name << " routes to unknown role " << role;
  }
}

TEST(PromptPack, RenderSubstitutesAllPlaceholders) {
  const PromptPack pack = PromptPack::load(default_prompt_dir());
  const std::string rendered = pack.render(
      "knowledge", {{"subject", "retail"}, {"n_columns", "5"}, {"seed", "17"}});
  EXPECT_NE(rendered.find("#subject: retail"), std::string::npos);
  EXPECT_NE(rendered.find("#n_columns: 5"), std::string::npos);
  EXPECT_NE(rendered.find("#seed: 17"), std::string::npos);
  EXPECT_EQ(rendered.find("{{"), std::string::npos) << "unfilled placeholder left behind";
}

TEST(PromptPack, RepeatedPlaceholdersAllGetReplaced) {
  const PromptPack pack = PromptPack::load(default_prompt_dir());
  // greeting mentions {{table_name}} twice (header and body)
  const std::string rendered =
      pack.render("greeting", {{"employee_name", "Ann"}, {"table_name", "orders"}});
  EXPECT_EQ(rendered.find("{{"), std::string::npos);
  std::size_t count = 0;
  for (std::size_t pos = rendered.find("orders"); pos != std::string::npos;
       pos = rendered.find("orders", pos + 1)) {
    ++count;
  }
  EXPECT_GE(count, 2u);
}

TEST(PromptPack, UnknownTemplateThrows) {
  const PromptPack pack = PromptPack::load(default_prompt_dir());
  EXPECT_THROW(pack.render("nonexistent", {}), std::runtime_error);
  EXPECT_THROW(pack.raw("nonexistent"), std::runtime_error);
}

TEST(PromptPack, MissingTemplateFileFailsTheWholeLoad) {
  const fs::path dir = fs::temp_directory_path() / "tacitsim_prompts_missing";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const std::string& name : PromptPack::required_templates()) {
    if (name == "merge") continue;
    fs::copy_file(default_prompt_dir() / (name + ".tmpl"), dir / (name + ".tmpl"));
  }
  try {
    PromptPack::load(dir);
    FAIL() << "load succeeded without merge.tmpl";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("merge"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(PromptPack, EnvironmentVariableOverridesTheDefaultDirectory) {
  const fs::path dir = fs::temp_directory_path() / "tacitsim_prompts_env";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const std::string& name : PromptPack::required_templates()) {
    fs::copy_file(default_prompt_dir() / (name + ".tmpl"), dir / (name + ".tmpl"));
  }
  ASSERT_EQ(setenv("TACITSIM_PROMPTS", dir.c_str(), 1), 0);
  EXPECT_EQ(default_prompt_dir(), dir);
  EXPECT_EQ(load_default_prompts().dir(), dir);
  unsetenv("TACITSIM_PROMPTS");
  fs::remove_all(dir);
}

TEST(CriticTemplates, CarryTheScoringRubric) {
  // The critic rubric is the contract that makes self-critic scores
  // comparable between scripted and live runs; key tier lines must survive
  // any template editing.
  const PromptPack pack = PromptPack::load(default_prompt_dir());
  for (const std::string name : {"critic", "critic_context"}) {
    const std::string& raw = pack.raw(name);
    EXPECT_NE(raw.find("Score: Rate the quality of the description from 0 to 10"),
              std::string::npos)
        << name;
    EXPECT_NE(raw.find("To reach a score of 5, we should know mostly everything about all "
                       "columns."),
              std::string::npos)
        << name;
    EXPECT_NE(raw.find("If we also know some example values, then we can reach even a 6 or a 7."),
              std::string::npos)
        << name;
    EXPECT_NE(raw.find("To reach a score of 8, we should also have tacit knowledge."),
              std::string::npos)
        << name;
    EXPECT_NE(raw.find("Be critical and do not be lenient."), std::string::npos) << name;
    EXPECT_NE(raw.find("--- BEGIN DESCRIPTION ---"), std::string::npos) << name;
  }
  EXPECT_NE(pack.raw("critic_context").find("--- BEGIN REFERENCE ---"), std::string::npos);
  EXPECT_EQ(pack.raw("critic").find("--- BEGIN REFERENCE ---"), std::string::npos);
}

TEST(JudgeTemplates, StateDefinitionAndScale) {
  const PromptPack pack = PromptPack::load(default_prompt_dir());
  EXPECT_NE(pack.raw("geval_coherence").find("#definition: coherence"), std::string::npos);
  EXPECT_NE(pack.raw("geval_faithfulness").find("#definition: faithfulness"), std::string::npos);
  for (const std::string name : {"geval_coherence", "geval_faithfulness"}) {
    EXPECT_NE(pack.raw(name).find("Rating: <integer 1-5>"), std::string::npos) << name;
    EXPECT_NE(pack.raw(name).find("--- BEGIN CANDIDATE ---"), std::string::npos) << name;
  }
}
