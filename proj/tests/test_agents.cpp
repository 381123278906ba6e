#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include <carerl/agents.hpp>

using namespace carerl;

namespace {

std::string fixture_text(const std::string& name) {
  const char* root = std::getenv("CARERL_ROOT");
  REQUIRE(root != nullptr);
  std::ifstream in(std::string(root) + "/fixtures/" + name);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

constexpr int iVa = 0, iPp = 1, iPo = 2, iSib = 3;
constexpr int aTalk = 0, aHeld = 1, aNone = 2, aSecl = 3, aSend = 4, aDistract = 5, aTerm = 6;

// single state, single action, always terminates with reward +1
Mdp one_shot_mdp() {
  Mdp mdp;
  mdp.set_row(iVa, aTalk, {0, 0, 0, 0, 1});
  mdp.initial = {1, 0, 0, 0};
  return mdp;
}

// deterministic transitions everywhere so temporal-difference targets settle
// exactly; every state can start an episode
Mdp deterministic_mdp() {
  Mdp mdp;
  mdp.set_row(iVa, aTalk, {0, 0, 0, 0, 1});
  mdp.set_row(iVa, aHeld, {0, 1, 0, 0, 0});
  mdp.set_row(iVa, aSecl, {0, 0, 0, 0, 1});
  mdp.set_row(iPp, aTalk, {0, 0, 0, 0, 1});
  mdp.set_row(iPp, aNone, {1, 0, 0, 0, 0});
  mdp.set_row(iPo, aDistract, {1, 0, 0, 0, 0});
  mdp.set_row(iPo, aSend, {0, 0, 0, 0, 1});
  mdp.set_row(iSib, aNone, {0, 0, 0, 1, 0});
  mdp.set_row(iSib, aTerm, {0, 0, 0, 0, 1});
  mdp.initial = {0.25, 0.25, 0.25, 0.25};
  return mdp;
}

}  // namespace

TEST_CASE("a single terminal step moves the estimate by alpha", "[agents]") {
  const Mdp mdp = one_shot_mdp();
  Hyperparams hp;
  hp.alpha = 0.2;
  hp.gamma = 0.2;
  hp.epsilon = 0.0;

  const auto ql = q_learning_train(mdp, hp, 1, 99);
  CHECK(ql.table.q[iVa][aTalk] == 0.2);
  CHECK(ql.report.episodes == 1);
  CHECK(ql.report.steps == 1);
  CHECK(ql.report.truncated_episodes == 0);

  const auto sa = sarsa_train(mdp, hp, 1, 99);
  CHECK(sa.table.q[iVa][aTalk] == 0.2);
  CHECK(sa.report.steps == 1);
}

TEST_CASE("repeated terminal updates follow the geometric ramp", "[agents]") {
  const Mdp mdp = one_shot_mdp();
  Hyperparams hp;
  hp.alpha = 0.1;
  hp.epsilon = 0.0;

  const int n = 50;
  const auto r = q_learning_train(mdp, hp, n, 7);
  const double expected = 1.0 - std::pow(0.9, n);
  CHECK_THAT(r.table.q[iVa][aTalk], Catch::Matchers::WithinAbs(expected, 1e-12));
}

TEST_CASE("both learners coincide when every step terminates", "[agents]") {
  // single-step episodes leave no room for the bootstrap to differ
  Mdp mdp;
  mdp.set_row(iVa, aTalk, {0, 0, 0, 0, 1});
  mdp.set_row(iVa, aSecl, {0, 0, 0, 0, 1});
  mdp.set_row(iPp, aHeld, {0, 0, 0, 0, 1});
  mdp.initial = {0.6, 0.4, 0, 0};

  Hyperparams hp;
  hp.alpha = 0.3;
  hp.epsilon = 0.25;
  const auto ql = q_learning_train(mdp, hp, 500, 31);
  const auto sa = sarsa_train(mdp, hp, 500, 31);
  CHECK(ql.table.q == sa.table.q);
  CHECK(ql.report.steps == sa.report.steps);
}

TEST_CASE("zero exploration never leaves the greedy arm", "[agents]") {
  Mdp mdp;
  mdp.set_row(iVa, aTalk, {0, 0, 0, 0, 1});   // +1
  mdp.set_row(iVa, aSecl, {0, 0, 0, 0, 1});   // -1
  mdp.initial = {1, 0, 0, 0};
  Hyperparams hp;
  hp.epsilon = 0.0;

  const auto r = q_learning_train(mdp, hp, 200, 5);
  CHECK(r.table.q[iVa][aTalk] > 0.9);
  // ties break to the first action, which then stays strictly better
  CHECK(r.table.q[iVa][aSecl] == 0.0);
}

TEST_CASE("exploration draws uniformly over the available actions", "[agents]") {
  QTable table;
  table.defined[iVa][aTalk] = true;
  table.defined[iVa][aSecl] = true;
  table.q[iVa][aTalk] = 1.0;  // greedy arm

  Rng rng(13);
  const int n = 40000;
  int talk_full_explore = 0;
  for (int i = 0; i < n; ++i)
    if (epsilon_greedy(table, iVa, 1.0, rng) == aTalk) ++talk_full_explore;
  CHECK_THAT(talk_full_explore / double(n), Catch::Matchers::WithinAbs(0.5, 0.01));

  int talk_half = 0;
  for (int i = 0; i < n; ++i)
    if (epsilon_greedy(table, iVa, 0.5, rng) == aTalk) ++talk_half;
  // exploit half of the time plus half of the exploration mass
  CHECK_THAT(talk_half / double(n), Catch::Matchers::WithinAbs(0.75, 0.01));

  for (int i = 0; i < 100; ++i) CHECK(epsilon_greedy(table, iVa, 0.0, rng) == aTalk);
}

TEST_CASE("all-zero tables break ties toward the first available action", "[agents]") {
  QTable table;
  table.defined[iVa][aHeld] = true;
  table.defined[iVa][aSecl] = true;
  CHECK(greedy_action(table, iVa) == aHeld);

  table.q[iVa][aSecl] = 0.001;
  CHECK(greedy_action(table, iVa) == aSecl);

  QTable empty;
  CHECK_THROWS_AS(greedy_action(empty, iVa), NoActions);
  Rng rng(1);
  CHECK_THROWS_AS(epsilon_greedy(empty, iVa, 1.0, rng), NoActions);
}

TEST_CASE("training is reproducible from the seed", "[agents]") {
  const auto mdp = deserialize_mdp(fixture_text("ground_truth_mdp.json"));
  const Hyperparams hp;

  const auto a = q_learning_train(mdp, hp, 2000, 42);
  const auto b = q_learning_train(mdp, hp, 2000, 42);
  CHECK(a.table.q == b.table.q);
  CHECK(a.report.steps == b.report.steps);

  const auto c = q_learning_train(mdp, hp, 2000, 43);
  CHECK(a.table.q != c.table.q);

  const auto s1 = sarsa_train(mdp, hp, 2000, 42);
  const auto s2 = sarsa_train(mdp, hp, 2000, 42);
  CHECK(s1.table.q == s2.table.q);
}

TEST_CASE("estimates stay inside the discounted reward bounds", "[agents]") {
  const auto mdp = deserialize_mdp(fixture_text("ground_truth_mdp.json"));
  Hyperparams hp;
  hp.alpha = 0.3;
  hp.epsilon = 0.3;
  hp.gamma = 0.2;

  // rewards span [-6, 1], so values live in [-6/(1-g), 1/(1-g)]
  const double lo = -6.0 / 0.8, hi = 1.0 / 0.8;
  for (const auto& r : {q_learning_train(mdp, hp, 5000, 3), sarsa_train(mdp, hp, 5000, 3)}) {
    for (int s = 0; s < kNumAggressions; ++s) {
      for (int a = 0; a < kNumActions; ++a) {
        if (!r.table.defined[s][a]) continue;
        CHECK(r.table.q[s][a] >= lo);
        CHECK(r.table.q[s][a] <= hi);
      }
    }
  }
}

TEST_CASE("without discounting only immediate rewards are learned", "[agents]") {
  // next-state rewards are flattened so every transition pays the action cost
  Mdp mdp;
  mdp.set_row(iVa, aSend, {0.5, 0.5, 0, 0, 0});
  mdp.set_row(iPp, aTalk, {0, 0, 0, 0, 1});
  mdp.initial = {1, 0, 0, 0};
  mdp.rewards.state_reward = {-2, -2, -2, -2, -2};

  Hyperparams hp;
  hp.alpha = 0.1;
  hp.gamma = 0.0;
  hp.epsilon = 0.0;
  const auto r = q_learning_train(mdp, hp, 4000, 17);
  // send pays -1 - 2 regardless of where it lands, talk pays 0 - 2
  CHECK_THAT(r.table.q[iVa][aSend], Catch::Matchers::WithinAbs(-3.0, 1e-9));
  CHECK_THAT(r.table.q[iPp][aTalk], Catch::Matchers::WithinAbs(-2.0, 1e-9));
}

TEST_CASE("off-policy learning finds the plan, on-policy values the behavior", "[agents]") {
  // two-step chain: first pick the room action, then the closing action
  Mdp mdp;
  mdp.set_row(iVa, aTalk, {0, 1, 0, 0, 0});  // reward -4
  mdp.set_row(iVa, aSecl, {0, 1, 0, 0, 0});  // reward -6
  mdp.set_row(iPp, aTalk, {0, 0, 0, 0, 1});  // reward +1
  mdp.set_row(iPp, aHeld, {0, 0, 0, 0, 1});  // reward -1
  mdp.initial = {1, 0, 0, 0};

  Hyperparams hp;
  hp.alpha = 0.02;
  hp.gamma = 1.0;
  hp.epsilon = 1.0;  // fully random behavior
  const std::uint64_t n = 6000;

  const auto ql = q_learning_train(mdp, hp, n, 11);
  // bootstrap via the maximum: -4 + max(1, -1)
  CHECK_THAT(ql.table.q[iVa][aTalk], Catch::Matchers::WithinAbs(-3.0, 0.35));
  CHECK_THAT(ql.table.q[iVa][aSecl], Catch::Matchers::WithinAbs(-5.0, 0.35));

  const auto sa = sarsa_train(mdp, hp, n, 11);
  // bootstrap via the uniform behavior: -4 + (1 - 1)/2
  CHECK_THAT(sa.table.q[iVa][aTalk], Catch::Matchers::WithinAbs(-4.0, 0.35));
  CHECK_THAT(sa.table.q[iVa][aSecl], Catch::Matchers::WithinAbs(-6.0, 0.35));

  // terminal estimates agree for both learners
  for (const auto& r : {ql, sa}) {
    CHECK_THAT(r.table.q[iPp][aTalk], Catch::Matchers::WithinAbs(1.0, 1e-6));
    CHECK_THAT(r.table.q[iPp][aHeld], Catch::Matchers::WithinAbs(-1.0, 1e-6));
  }
}

TEST_CASE("non-terminating episodes are cut off without a closing bonus", "[agents]") {
  Mdp mdp;
  mdp.set_row(iVa, aSecl, {1, 0, 0, 0, 0});  // loops forever at -2 per step
  mdp.initial = {1, 0, 0, 0};
  Hyperparams hp;
  hp.alpha = 0.1;
  hp.gamma = 0.2;
  hp.epsilon = 0.0;

  const auto r = q_learning_train(mdp, hp, 10, 23, 50);
  CHECK(r.report.truncated_episodes == 10);
  CHECK(r.report.steps == 500);
  // fixed point of q = -2 + 0.2 q; a terminal bonus would drag it upward
  CHECK_THAT(r.table.q[iVa][aSecl], Catch::Matchers::WithinAbs(-2.5, 1e-9));

  const auto s = sarsa_train(mdp, hp, 10, 23, 50);
  CHECK(s.report.truncated_episodes == 10);
  CHECK_THAT(s.table.q[iVa][aSecl], Catch::Matchers::WithinAbs(-2.5, 1e-9));
}

TEST_CASE("both learners recover the planning solution", "[agents]") {
  const Mdp mdp = deterministic_mdp();
  Hyperparams hp;
  hp.alpha = 0.2;
  hp.gamma = 0.2;
  hp.epsilon = 0.1;

  const auto oracle = value_iteration(mdp, hp.gamma, 1e-12);
  const auto ql = q_learning_train(mdp, hp, 20000, 1);
  const auto sa = sarsa_train(mdp, hp, 20000, 2);

  for (int s = 0; s < kNumAggressions; ++s) {
    CHECK(greedy_action(ql.table, s) == oracle.policy[s]);
    CHECK(greedy_action(sa.table, s) == oracle.policy[s]);
  }
  // deterministic transitions let the off-policy values settle on the plan
  for (int s = 0; s < kNumAggressions; ++s)
    for (int a = 0; a < kNumActions; ++a)
      if (ql.table.defined[s][a])
        CHECK_THAT(ql.table.q[s][a], Catch::Matchers::WithinAbs(oracle.q[s][a], 0.02));
}

TEST_CASE("greedy policies act on learned values and fail on unseen states", "[agents]") {
  QTable table;
  table.defined[iVa][aTalk] = true;
  table.defined[iVa][aSecl] = true;
  table.q[iVa][aSecl] = 0.5;

  const auto p = Policy::greedy("learned", table);
  const Mdp mdp = one_shot_mdp();
  Rng rng(1);
  CHECK(p.decide(mdp, iVa, rng) == aSecl);
  try {
    p.decide(mdp, iSib, rng);
    FAIL("expected an unreachable-action error");
  } catch (const UnreachableAction& e) {
    CHECK(std::string(e.what()) ==
          "policy \"learned\" has no action for state sib");
  }
}

TEST_CASE("the random baseline draws uniformly from the model's actions", "[agents]") {
  Mdp mdp;
  mdp.set_row(iVa, aTalk, {0, 0, 0, 0, 1});
  mdp.set_row(iVa, aNone, {0, 0, 0, 0, 1});
  mdp.set_row(iVa, aSend, {0, 0, 0, 0, 1});
  mdp.initial = {1, 0, 0, 0};

  const auto p = Policy::random();
  CHECK(p.name == "random");
  Rng rng(3);
  std::array<int, kNumActions> hits{};
  const int n = 90000;
  for (int i = 0; i < n; ++i) hits[p.decide(mdp, iVa, rng)]++;
  CHECK(hits[aHeld] == 0);
  for (int a : {aTalk, aNone, aSend})
    CHECK_THAT(hits[a] / double(n), Catch::Matchers::WithinAbs(1.0 / 3, 0.01));

  Mdp empty;
  CHECK_THROWS_AS(p.decide(empty, iVa, rng), NoActions);
}

TEST_CASE("the historical baseline repeats each state's dominant measure", "[agents]") {
  const char* root = std::getenv("CARERL_ROOT");
  REQUIRE(root != nullptr);
  std::ifstream in(std::string(root) + "/fixtures/sample_log.csv");
  auto parsed = parse_log(in);
  const auto episodes = run_preprocess(parsed.log).episodes;

  const auto p = most_frequent_policy(episodes);
  CHECK(p.name == "most-frequent");
  CHECK(p.fixed[iVa] == aTalk);      // talk 4 beats seclusion 1 and none 1
  CHECK(p.fixed[iPp] == aTalk);      // 1-1 tie with held breaks canonically
  CHECK(p.fixed[iPo] == aDistract);
  CHECK(p.fixed[iSib] == -1);        // sib never appears in the kept corpus

  CHECK_THROWS_AS(most_frequent_policy({}), EmptyCorpus);

  Episode unresolved;
  unresolved.client_id = "c";
  EnrichedIncident step;
  step.state = StateLabel::Va;
  step.next_state = StateLabel::Tau;
  unresolved.steps.push_back(step);
  CHECK_THROWS_AS(most_frequent_policy({unresolved}), std::invalid_argument);
}

TEST_CASE("value tables round-trip through their file format", "[agents]") {
  const auto mdp = deserialize_mdp(fixture_text("ground_truth_mdp.json"));
  const auto trained = q_learning_train(mdp, {}, 500, 77);

  const auto back = deserialize_qtable(serialize_qtable(trained.table));
  CHECK(back.defined == trained.table.defined);
  for (int s = 0; s < kNumAggressions; ++s)
    for (int a = 0; a < kNumActions; ++a)
      if (trained.table.defined[s][a]) CHECK(back.q[s][a] == trained.table.q[s][a]);

  CHECK_THROWS_AS(deserialize_qtable("{\"format\": \"other\"}"), SchemaError);
  CHECK_THROWS_AS(deserialize_qtable("{\"format\": \"carerl-qtable-v1\", \"q\": {\"Tau\": {}}}"),
                  SchemaError);
  CHECK_THROWS_AS(
      deserialize_qtable(
          "{\"format\": \"carerl-qtable-v1\", \"q\": {\"va\": {\"preventive measures started\": 1.0}}}"),
      SchemaError);
}
