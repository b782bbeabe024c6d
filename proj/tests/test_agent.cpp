// Conversation-policy tests: visit order, greeting, referral priority, the
// merge/critique loop, forced switches, stack refills, failure handling and
// determinism. Everything runs against the deterministic scripted backend,
// with personas hand-built so each scenario controls who knows what.

#include <gtest/gtest.h>

#include <deque>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "tacitsim/agent.hpp"
#include "tacitsim/dissemination.hpp"
#include "tacitsim/draft.hpp"
#include "tacitsim/knowledge.hpp"
#include "tacitsim/orggen.hpp"
#include "tacitsim/personas.hpp"
#include "tacitsim/prompts.hpp"
#include "tacitsim/scripted.hpp"

using namespace tacitsim;

namespace {

PromptPack prompts() { return PromptPack::load(default_prompt_dir()); }

TableKnowledge table(int n_columns, std::uint64_t seed = 40) {
  ScriptedBackend backend;
  return generate_knowledge("tech", n_columns, backend, prompts(), seed);
}

/// Personas whose knowledge is dictated per employee id; no peer awareness.
std::vector<PersonaProfile> personas_with(
    const OrgStructure& org, const std::function<FactSet(EmployeeId)>& facts_of_id) {
  std::vector<PersonaProfile> out(static_cast<std::size_t>(org.size()));
  for (EmployeeId id = 0; id < org.size(); ++id) {
    PersonaProfile& p = out[static_cast<std::size_t>(id)];
    p.employee_id = id;
    p.archetype = "helpful";
    p.background_text = org.employee(id).display_name + " helps out.";
    p.known_facts = facts_of_id(id);
  }
  return out;
}

FactSet all_facts(const TableKnowledge& k) {
  FactSet s;
  for (int i = 0; i < static_cast<int>(k.columns.size()); ++i) s.insert(Fact{i});
  return s;
}

/// Forwards to the scripted rules while tallying calls per #task / #role.
class RecordingBackend : public ChatBackend {
 public:
  std::string complete(const std::vector<ChatMessage>& messages) override {
    const std::string role = prompt_header(messages.front().content, "role");
    const std::string task = prompt_header(messages.front().content, "task");
    calls.push_back(task.empty() ? role : task);
    return inner_.complete(messages);
  }

  int count(const std::string& tag) const {
    int n = 0;
    for (const auto& c : calls) n += (c == tag) ? 1 : 0;
    return n;
  }

  std::vector<std::string> calls;

 private:
  ScriptedBackend inner_;
};

/// Throws for the first `failures` calls, then behaves like the scripted one.
class FlakyBackend : public ChatBackend {
 public:
  explicit FlakyBackend(int failures) : remaining_(failures) {}

  std::string complete(const std::vector<ChatMessage>& messages) override {
    if (remaining_ > 0) {
      --remaining_;
      throw TransportError("synthetic transport failure", 1);
    }
    return inner_.complete(messages);
  }

 private:
  int remaining_;
  ScriptedBackend inner_;
};

class ThrowingBackend : public ChatBackend {
 public:
  std::string complete(const std::vector<ChatMessage>&) override {
    throw TransportError("always down", 1);
  }
};

/// Replays fixed replies; used for the critic parsing tests.
class FakeBackend : public ChatBackend {
 public:
  explicit FakeBackend(std::deque<std::string> replies) : replies_(std::move(replies)) {}

  std::string complete(const std::vector<ChatMessage>& messages) override {
    seen.push_back(messages);
    if (replies_.empty()) throw BackendError("fake backend ran out of replies");
    std::string reply = replies_.front();
    replies_.pop_front();
    return reply;
  }

  std::vector<std::vector<ChatMessage>> seen;

 private:
  std::deque<std::string> replies_;
};

}  // namespace

TEST(InitAgent, VisitsDeepestLevelsFirst) {
  const OrgStructure org = build_org(OrgParams{20, 2, 0.0, 7});
  const TableKnowledge k = table(5);
  AgentConfig config;
  const AgentState state = init_agent(org, k, config);

  ASSERT_EQ(static_cast<int>(state.init_order.size()), org.size());
  std::set<EmployeeId> unique(state.init_order.begin(), state.init_order.end());
  EXPECT_EQ(static_cast<int>(unique.size()), org.size());
  for (std::size_t i = 1; i < state.init_order.size(); ++i) {
    EXPECT_GE(org.employee(state.init_order[i - 1]).level,
              org.employee(state.init_order[i]).level)
        << "visit order must walk levels deepest-first";
  }
  EXPECT_EQ(org.employee(state.init_order.front()).level, org.max_level());
  EXPECT_EQ(state.init_order.back(), 0);  // the root comes last

  // the stack pops in init order
  ASSERT_FALSE(state.stack.empty());
  EXPECT_EQ(state.stack.back(), state.init_order.front());
  EXPECT_EQ(state.draft, render_draft(draft_skeleton(k)));
  EXPECT_FALSE(state.terminated);
}

TEST(InitAgent, ShuffleIsSeededAndStable) {
  const OrgStructure org = build_org(OrgParams{20, 2, 0.0, 7});
  const TableKnowledge k = table(5);
  AgentConfig a;
  a.rng_seed = 1;
  AgentConfig b;
  b.rng_seed = 2;
  EXPECT_EQ(init_agent(org, k, a).init_order, init_agent(org, k, a).init_order);
  EXPECT_NE(init_agent(org, k, a).init_order, init_agent(org, k, b).init_order);
}

TEST(InitAgent, ValidatesInputs) {
  const OrgStructure org = build_org(OrgParams{4, 1, 0.0, 7});
  const TableKnowledge k = table(5);
  EXPECT_THROW(init_agent(OrgStructure{}, k, AgentConfig{}), std::invalid_argument);
  AgentConfig bad_eps;
  bad_eps.epsilon = 0.0;
  EXPECT_THROW(init_agent(org, k, bad_eps), std::invalid_argument);
  bad_eps.epsilon = 10.5;
  EXPECT_THROW(init_agent(org, k, bad_eps), std::invalid_argument);
  AgentConfig bad_turns;
  bad_turns.max_turns_per_employee = 0;
  EXPECT_THROW(init_agent(org, k, bad_turns), std::invalid_argument);
  AgentConfig edge;
  edge.epsilon = 10.0;  // inclusive upper bound
  EXPECT_NO_THROW(init_agent(org, k, edge));
}

TEST(Agent, ReconstructsEverythingFromOmniscientPersonas) {
  // 8 columns force two question rounds for the cores plus one for
  // overview/relations; the final draft must equal the ground truth rendering
  // byte for byte.
  const OrgStructure org = build_org(OrgParams{20, 2, 0.0, 7});
  const TableKnowledge k = table(8);
  const auto personas = personas_with(org, [&](EmployeeId) { return all_facts(k); });
  ScriptedBackend backend;
  AgentConfig config;

  const AgentRunResult result = run_agent(org, personas, k, config, prompts(), backend);
  ASSERT_FALSE(result.failed) << result.failure;
  EXPECT_TRUE(result.state.terminated);
  EXPECT_EQ(result.k_t, render_knowledge(k));
  EXPECT_EQ(result.state.path.size(), 1u);  // one employee sufficed
  EXPECT_EQ(result.state.interactions_used, 3);
  EXPECT_DOUBLE_EQ(result.state.score, 9.0);
  EXPECT_EQ(result.state.score_trace.size(), 3u);
}

TEST(Agent, GreetsEachEmployeeOnlyOnFirstContact) {
  // Nobody knows anything: every visit is one unproductive turn, the stack
  // refills once everyone has been contacted, and revisits skip the greeting.
  const OrgStructure org = build_org(OrgParams{4, 1, 0.0, 11});
  const TableKnowledge k = table(8);
  const auto personas = personas_with(org, [](EmployeeId) { return FactSet{}; });
  RecordingBackend backend;
  AgentConfig config;

  const AgentRunResult result = run_agent(org, personas, k, config, prompts(), backend);
  ASSERT_FALSE(result.failed);
  EXPECT_TRUE(result.state.terminated);
  EXPECT_LT(result.state.score, config.epsilon);
  EXPECT_EQ(result.state.interactions_used, 2 * org.size());  // spent the whole budget

  const auto& order = result.state.init_order;
  ASSERT_EQ(result.state.path.size(), 8u);
  for (std::size_t i = 0; i < result.state.path.size(); ++i) {
    EXPECT_EQ(result.state.path[i], order[i % order.size()]) << i;
  }
  EXPECT_EQ(backend.count("greet"), org.size());
  EXPECT_EQ(static_cast<int>(result.state.greeted.size()), org.size());
}

TEST(Agent, ReferralMovesTheNamedEmployeeToTheTop) {
  const OrgStructure org = build_org(OrgParams{5, 1, 0.0, 13});
  const TableKnowledge k = table(5);
  AgentConfig config;
  config.max_interactions = 2;

  // figure out who gets contacted first, then plant a referral pointing at
  // the employee scheduled last
  const AgentState initial = init_agent(org, k, config);
  const EmployeeId first = initial.init_order[0];
  const EmployeeId skipped = initial.init_order[1];
  const EmployeeId target = initial.init_order[3];

  auto personas = personas_with(org, [](EmployeeId) { return FactSet{}; });
  personas[static_cast<std::size_t>(first)].peer_awareness[skipped] = {Fact{0}};
  personas[static_cast<std::size_t>(first)].peer_awareness[target] = {Fact{0}, Fact{1}, Fact{2}};

  ScriptedBackend backend;
  const AgentRunResult result = run_agent(org, personas, k, config, prompts(), backend);
  ASSERT_FALSE(result.failed);
  ASSERT_EQ(result.state.path.size(), 2u);
  EXPECT_EQ(result.state.path[0], first);
  EXPECT_EQ(result.state.path[1], target) << "the referral target must jump the queue";
}

TEST(Agent, ForcedSwitchAtMaxTurnsAndRefillInInitOrder) {
  // Two employees: the child holds all eight facts but max_turns_per_employee
  // caps the first visit at two turns, one short of finishing. The agent must
  // switch to the (clueless) root, then refill the stack and come back.
  const OrgStructure org = build_org(OrgParams{2, 1, 0.0, 3});
  const TableKnowledge k = table(8);
  auto personas = personas_with(org, [&](EmployeeId id) {
    return id == 1 ? all_facts(k) : FactSet{};
  });
  RecordingBackend backend;
  AgentConfig config;
  config.max_turns_per_employee = 2;

  const AgentRunResult result = run_agent(org, personas, k, config, prompts(), backend);
  ASSERT_FALSE(result.failed);
  EXPECT_TRUE(result.state.terminated);
  EXPECT_EQ(result.state.path, (std::vector<EmployeeId>{1, 0, 1}));
  EXPECT_EQ(result.k_t, render_knowledge(k));
  EXPECT_DOUBLE_EQ(result.state.score, 9.0);
  EXPECT_EQ(backend.count("greet"), 2);   // the second visit to 1 skips it
  EXPECT_EQ(backend.count("decide"), 2);  // forced switch and final step skip it
}

TEST(Agent, DraftCoverageAndScoreNeverShrink) {
  const OrgStructure org = build_org(OrgParams{6, 2, 0.0, 17});
  const TableKnowledge k = table(8);
  const std::vector<FactSet> assignment = {
      {Fact{0}, Fact{1}}, {Fact{2}, Fact{3}}, {Fact{4}, Fact{5}},
      {Fact{6}, Fact{7}}, {Fact{0}, Fact{4}}, {Fact{1}, Fact{5}},
  };
  const auto personas = personas_with(org, [&](EmployeeId id) {
    return assignment[static_cast<std::size_t>(id)];
  });
  ScriptedBackend backend;
  AgentConfig config;
  const PromptPack pack = prompts();

  AgentState state = init_agent(org, k, config);
  std::size_t last_complete = 0;
  double last_score = 0.0;
  int steps = 0;
  while (!state.terminated) {
    state = step_agent(state, org, personas, k, config, pack, backend);
    ++steps;
    ASSERT_LE(steps, 2 * org.size());

    const Draft d = parse_draft(state.draft);
    EXPECT_EQ(d.columns.size(), k.columns.size()) << "a merge dropped a column";
    std::size_t complete = 0;
    for (const auto& col : d.columns) complete += column_core_complete(col) ? 1 : 0;
    EXPECT_GE(complete, last_complete) << "core coverage shrank at step " << steps;
    EXPECT_GE(state.score, last_score) << "critic score dropped at step " << steps;
    last_complete = complete;
    last_score = state.score;
  }
  EXPECT_EQ(state.interactions_used, steps);
}

TEST(Agent, AbortsAfterThreeConsecutiveBackendFailures) {
  const OrgStructure org = build_org(OrgParams{4, 1, 0.0, 5});
  const TableKnowledge k = table(5);
  const auto personas = personas_with(org, [](EmployeeId) { return FactSet{}; });
  ThrowingBackend backend;

  const AgentRunResult result = run_agent(org, personas, k, AgentConfig{}, prompts(), backend);
  EXPECT_TRUE(result.failed);
  EXPECT_NE(result.failure.find("conversation error"), std::string::npos);
  // a failed step must not leak partial mutations: the draft is still the
  // skeleton and nobody was recorded as contacted
  EXPECT_EQ(result.k_t, render_draft(draft_skeleton(k)));
  EXPECT_TRUE(result.state.path.empty());
}

TEST(Agent, RecoversWhenFailuresAreNotConsecutive) {
  const OrgStructure org = build_org(OrgParams{2, 1, 0.0, 3});
  const TableKnowledge k = table(5);
  const auto personas = personas_with(org, [&](EmployeeId) { return all_facts(k); });
  FlakyBackend backend(2);  // two failed step attempts, then clean sailing

  const AgentRunResult result = run_agent(org, personas, k, AgentConfig{}, prompts(), backend);
  ASSERT_FALSE(result.failed) << result.failure;
  EXPECT_TRUE(result.state.terminated);
  EXPECT_EQ(result.k_t, render_knowledge(k));
}

TEST(Agent, FullyDeterministicForAFixedSeed) {
  const TableKnowledge k = table(5);
  const OrgStructure org = build_org(OrgParams{20, 2, 1.0, 21});
  SpreadParams sp;
  sp.alpha = 0.5;
  sp.decay = 0.8;
  sp.rng_seed = 22;
  const DisseminationResult spread = disseminate_from_patient_zero(org, k, 0, sp);
  const auto personas = build_personas(org, spread, 0.5, 23);
  AgentConfig config;
  config.rng_seed = 24;
  const PromptPack pack = prompts();

  ScriptedBackend b1, b2;
  const AgentRunResult r1 = run_agent(org, personas, k, config, pack, b1);
  const AgentRunResult r2 = run_agent(org, personas, k, config, pack, b2);
  EXPECT_EQ(r1.k_t, r2.k_t);
  EXPECT_EQ(r1.state.path, r2.state.path);
  EXPECT_EQ(r1.state.score_trace, r2.state.score_trace);
  EXPECT_EQ(r1.state.interactions_used, r2.state.interactions_used);
}

// ---------------------------------------------------------------------------
// run_critic parsing.
// ---------------------------------------------------------------------------

TEST(RunCritic, ParsesAWellFormedReview) {
  FakeBackend backend({"Score: 6\nReasoning: Solid but thin.\nSuggestions: Add examples."});
  const CriticReview review = run_critic("some draft", backend, prompts());
  EXPECT_DOUBLE_EQ(review.score, 6.0);
  EXPECT_EQ(review.reasoning, "Solid but thin.");
  EXPECT_EQ(review.suggestions, "Add examples.");
}

TEST(RunCritic, FoldsContinuationLinesAndAcceptsFractionalScores) {
  FakeBackend backend(
      {"Score: 7.5\nReasoning: First line\nsecond line\nSuggestions: Do more\nand more"});
  const CriticReview review = run_critic("draft", backend, prompts());
  EXPECT_DOUBLE_EQ(review.score, 7.5);
  EXPECT_EQ(review.reasoning, "First line second line");
  EXPECT_EQ(review.suggestions, "Do more and more");
}

TEST(RunCritic, RepromptsOnGarbageThenParses) {
  FakeBackend backend({"This draft is fine, I guess?", "Score: 4\nReasoning: ok\nSuggestions: x"});
  const CriticReview review = run_critic("draft", backend, prompts());
  EXPECT_DOUBLE_EQ(review.score, 4.0);
  ASSERT_EQ(backend.seen.size(), 2u);
  EXPECT_NE(backend.seen[1].back().content.find("Score: <integer 0-10>"), std::string::npos);
}

TEST(RunCritic, RejectsOutOfRangeScores) {
  FakeBackend backend({"Score: 11\nReasoning: too high", "Score: -2\nReasoning: too low"});
  EXPECT_THROW(run_critic("draft", backend, prompts()), CriticParseError);
}

TEST(RunCritic, ReferenceSelectsTheContextTemplate) {
  FakeBackend with_ref({"Score: 5\nReasoning: r\nSuggestions: s"});
  run_critic("draft text", with_ref, prompts(), std::string("reference text"));
  EXPECT_NE(with_ref.seen[0][0].content.find("--- BEGIN REFERENCE ---"), std::string::npos);
  EXPECT_NE(with_ref.seen[0][0].content.find("reference text"), std::string::npos);

  FakeBackend without_ref({"Score: 5\nReasoning: r\nSuggestions: s"});
  run_critic("draft text", without_ref, prompts());
  EXPECT_EQ(without_ref.seen[0][0].content.find("--- BEGIN REFERENCE ---"), std::string::npos);
}
