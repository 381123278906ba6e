#include <catch2/catch_amalgamated.hpp>

#include <carerl/tune.hpp>

using namespace carerl;

namespace {

constexpr int iVa = 0, iPp = 1, iPo = 2, iSib = 3;
constexpr int aHeld = 1, aNone = 2, aDistract = 5;

// two routes out of va whose ranking flips with the discount factor:
// the expensive direct route (held, -6 then +1) beats the cheap-looking
// two-hop route (distract, -2 then -5 then +1) only when gamma > 3 - sqrt(5)
Mdp crossover_mdp() {
  Mdp mdp;
  mdp.set_row(iVa, aHeld, {0, 1, 0, 0, 0});
  mdp.set_row(iVa, aDistract, {0, 0, 1, 0, 0});
  mdp.set_row(iPp, aNone, {0, 0, 0, 0, 1});
  mdp.set_row(iPo, aHeld, {0, 0, 0, 1, 0});
  mdp.set_row(iSib, aNone, {0, 0, 0, 0, 1});
  mdp.initial = {1, 0, 0, 0};
  return mdp;
}

}  // namespace

TEST_CASE("algorithm names parse and print", "[tune]") {
  CHECK(to_string(Algo::QLearning) == "q-learning");
  CHECK(to_string(Algo::Sarsa) == "sarsa");
  CHECK(parse_algo("q-learning") == Algo::QLearning);
  CHECK(parse_algo("qlearning") == Algo::QLearning);
  CHECK(parse_algo("  Q ") == Algo::QLearning);
  CHECK(parse_algo("SARSA") == Algo::Sarsa);
  CHECK_FALSE(parse_algo("dyna").has_value());
}

TEST_CASE("the dispatcher runs the named learner", "[tune]") {
  Mdp mdp;
  mdp.set_row(iVa, aNone, {0.3, 0, 0, 0, 0.7});
  mdp.set_row(iVa, aHeld, {0, 0, 0, 0, 1});
  mdp.initial = {1, 0, 0, 0};
  const Hyperparams hp;

  const auto via_dispatch = train(mdp, Algo::QLearning, hp, 300, 9);
  const auto direct = q_learning_train(mdp, hp, 300, 9);
  CHECK(via_dispatch.table.q == direct.table.q);

  const auto sa_dispatch = train(mdp, Algo::Sarsa, hp, 300, 9);
  const auto sa_direct = sarsa_train(mdp, hp, 300, 9);
  CHECK(sa_dispatch.table.q == sa_direct.table.q);
}

TEST_CASE("indifferent models select the first grid point of every stage", "[tune]") {
  // one action per state: every configuration learns the same policy
  Mdp mdp;
  mdp.set_row(iVa, aNone, {0, 0, 0, 0, 1});
  mdp.initial = {1, 0, 0, 0};

  TuneConfig cfg;
  cfg.gamma_grid = {0.7, 0.3};
  cfg.epsilon_grid = {0.25, 0.45};
  cfg.alpha_grid = {0.15, 0.35};
  cfg.reps = 2;
  cfg.train_episodes = 50;
  cfg.eval_runs = 4;
  cfg.eval_episodes = 200;
  cfg.seed = 5;

  const auto r = grid_search(mdp, Algo::QLearning, cfg);
  CHECK(r.best.gamma == 0.7);
  CHECK(r.best.epsilon == 0.25);
  CHECK(r.best.alpha == 0.15);
  // the only episode is va then done, worth +1
  CHECK(r.best_score == 1.0);

  REQUIRE(r.trace.size() == 6);
  for (const auto& e : r.trace) CHECK(e.score == 1.0);
  CHECK(r.trace[0].stage == "gamma");
  CHECK(r.trace[1].stage == "gamma");
  CHECK(r.trace[2].stage == "epsilon");
  CHECK(r.trace[4].stage == "alpha");
}

TEST_CASE("the discount stage finds the far-sighted winner", "[tune]") {
  const Mdp mdp = crossover_mdp();

  TuneConfig cfg;
  cfg.gamma_grid = {0.2, 0.8};
  cfg.epsilon_grid = {0.1};
  cfg.alpha_grid = {0.1};
  cfg.reps = 2;
  cfg.train_episodes = 600;
  cfg.eval_runs = 4;
  cfg.eval_episodes = 300;
  cfg.seed = 12;

  const auto r = grid_search(mdp, Algo::QLearning, cfg);

  // short-sighted training prefers the two-hop route, worth -6 per episode;
  // far-sighted training takes the direct route, worth -5
  REQUIRE(r.trace.size() == 4);
  CHECK(r.trace[0].hp.gamma == 0.2);
  CHECK(r.trace[0].score == -6.0);
  CHECK(r.trace[1].hp.gamma == 0.8);
  CHECK(r.trace[1].score == -5.0);
  CHECK(r.best.gamma == 0.8);
  CHECK(r.best_score == -5.0);

  // untried stages sit at the baseline during the discount stage
  CHECK(r.trace[0].hp.epsilon == cfg.baseline.epsilon);
  CHECK(r.trace[0].hp.alpha == cfg.baseline.alpha);
  // later stages carry the discount winner forward
  CHECK(r.trace[2].stage == "epsilon");
  CHECK(r.trace[2].hp.gamma == 0.8);
  CHECK(r.trace[3].stage == "alpha");

  // the returned table plays the far-sighted action
  CHECK(greedy_action(r.best_table, iVa) == aHeld);
}

TEST_CASE("searches repeat identically from the same seed", "[tune]") {
  const Mdp mdp = crossover_mdp();
  TuneConfig cfg;
  cfg.gamma_grid = {0.2, 0.8};
  cfg.epsilon_grid = {0.1, 0.3};
  cfg.alpha_grid = {0.2};
  cfg.reps = 2;
  cfg.train_episodes = 200;
  cfg.eval_runs = 3;
  cfg.eval_episodes = 100;
  cfg.seed = 77;

  const auto a = grid_search(mdp, Algo::Sarsa, cfg);
  const auto b = grid_search(mdp, Algo::Sarsa, cfg);
  CHECK(a.best.gamma == b.best.gamma);
  CHECK(a.best.epsilon == b.best.epsilon);
  CHECK(a.best.alpha == b.best.alpha);
  CHECK(a.best_score == b.best_score);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].score == b.trace[i].score);
  CHECK(a.best_table.q == b.best_table.q);
}

TEST_CASE("invalid search configurations are rejected", "[tune]") {
  const Mdp mdp = crossover_mdp();
  TuneConfig cfg;
  cfg.gamma_grid = {};
  CHECK_THROWS_AS(grid_search(mdp, Algo::QLearning, cfg), std::invalid_argument);

  TuneConfig cfg2;
  cfg2.reps = 0;
  CHECK_THROWS_AS(grid_search(mdp, Algo::QLearning, cfg2), std::invalid_argument);
}

TEST_CASE("hyperparameter files round-trip", "[tune]") {
  Hyperparams hp;
  hp.alpha = 0.3;
  hp.gamma = 0.8;
  hp.epsilon = 0.2;
  const auto text = hyperparams_to_json(hp, Algo::Sarsa, -4.25).dump(2);

  const auto back = deserialize_hyperparams(text);
  CHECK(back.hp.alpha == 0.3);
  CHECK(back.hp.gamma == 0.8);
  CHECK(back.hp.epsilon == 0.2);
  CHECK(back.algo == Algo::Sarsa);
  CHECK(back.score == -4.25);

  CHECK_THROWS_AS(deserialize_hyperparams("{\"format\": \"x\"}"), SchemaError);
  CHECK_THROWS_AS(
      deserialize_hyperparams(
          "{\"format\": \"carerl-hyperparams-v1\", \"algorithm\": \"dyna\", \"alpha\": 0.1, "
          "\"gamma\": 0.1, \"epsilon\": 0.1}"),
      SchemaError);
  CHECK_THROWS_AS(
      deserialize_hyperparams(
          "{\"format\": \"carerl-hyperparams-v1\", \"algorithm\": \"sarsa\", \"gamma\": 0.1, "
          "\"epsilon\": 0.1}"),
      SchemaError);
}
