#pragma once

#include <string>
#include <vector>

#include "carerl/rollout.hpp"

namespace carerl {

enum class Algo { QLearning, Sarsa };

inline std::string_view to_string(Algo a) {
  return a == Algo::QLearning ? "q-learning" : "sarsa";
}

inline std::optional<Algo> parse_algo(std::string_view text) {
  const std::string t = lowercase(trim(text));
  if (t == "q-learning" || t == "qlearning" || t == "q") return Algo::QLearning;
  if (t == "sarsa") return Algo::Sarsa;
  return std::nullopt;
}

inline TrainResult train(const Mdp& mdp, Algo algo, const Hyperparams& hp,
                         std::uint64_t episodes, std::uint64_t seed,
                         std::uint64_t max_steps = 1000) {
  return algo == Algo::QLearning ? q_learning_train(mdp, hp, episodes, seed, max_steps)
                                 : sarsa_train(mdp, hp, episodes, seed, max_steps);
}

struct TuneConfig {
  std::vector<double> gamma_grid = {0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> epsilon_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> alpha_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  // values a parameter takes before its own stage has run
  Hyperparams baseline;
  std::uint64_t reps = 10;
  std::uint64_t train_episodes = 2000;
  std::uint64_t eval_runs = 100;
  std::uint64_t eval_episodes = 2000;
  std::uint64_t max_steps = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  bool greedy_eval = true;  // evaluate the learned policy without exploration
};

struct TuneEntry {
  std::string stage;
  Hyperparams hp;
  double score = 0;
};

struct TuneResult {
  Hyperparams best;
  double best_score = 0;
  std::vector<TuneEntry> trace;
  // the highest-scoring repetition of the winning configuration
  QTable best_table;
};

namespace detail {

struct CandidateOutcome {
  double score = 0;
  double best_rep_score = 0;
  QTable best_rep_table;
};

// Seeds depend on (stage, rep) only, never on the candidate, so identical
// configurations score identically and grid order decides ties.
inline CandidateOutcome evaluate_candidate(const Mdp& mdp, Algo algo, const Hyperparams& hp,
                                           const TuneConfig& cfg, std::uint64_t stage) {
  CandidateOutcome out;
  double sum = 0;
  for (std::uint64_t rep = 0; rep < cfg.reps; ++rep) {
    const auto trained = train(mdp, algo, hp, cfg.train_episodes,
                               derive_seed(cfg.seed, {stage, rep, 0}), cfg.max_steps);
    const Policy policy =
        cfg.greedy_eval ? Policy::greedy(std::string(to_string(algo)), trained.table)
                        : Policy::exploring(std::string(to_string(algo)), trained.table,
                                            hp.epsilon);
    RolloutConfig rc;
    rc.n_runs = cfg.eval_runs;
    rc.episodes_per_run = cfg.eval_episodes;
    rc.seed = derive_seed(cfg.seed, {stage, rep, 1});
    rc.max_steps = cfg.max_steps;
    rc.threads = cfg.threads;
    const double score = average_reward(rollout(mdp, policy, rc));
    sum += score;
    if (rep == 0 || score > out.best_rep_score) {
      out.best_rep_score = score;
      out.best_rep_table = trained.table;
    }
  }
  out.score = sum / static_cast<double>(cfg.reps);
  return out;
}

}  // namespace detail

// One parameter at a time, in the order gamma, epsilon, alpha. Later stages
// reuse the winners of earlier ones; parameters not yet tuned sit at the
// baseline. A candidate replaces the stage leader only when strictly better,
// so the earliest grid point wins ties.
inline TuneResult grid_search(const Mdp& mdp, Algo algo, const TuneConfig& cfg) {
  if (cfg.gamma_grid.empty() || cfg.epsilon_grid.empty() || cfg.alpha_grid.empty())
    throw std::invalid_argument("grid_search: empty grid");
  if (cfg.reps == 0) throw std::invalid_argument("grid_search: reps must be positive");

  TuneResult result;
  Hyperparams hp = cfg.baseline;

  const struct Stage {
    const char* name;
    const std::vector<double>* grid;
    double Hyperparams::* field;
  } stages[] = {
      {"gamma", &cfg.gamma_grid, &Hyperparams::gamma},
      {"epsilon", &cfg.epsilon_grid, &Hyperparams::epsilon},
      {"alpha", &cfg.alpha_grid, &Hyperparams::alpha},
  };

  for (std::uint64_t si = 0; si < 3; ++si) {
    const Stage& stage = stages[si];
    double best_value = (*stage.grid)[0];
    detail::CandidateOutcome best_outcome;
    bool first = true;
    for (const double value : *stage.grid) {
      Hyperparams candidate = hp;
      candidate.*stage.field = value;
      const auto outcome = detail::evaluate_candidate(mdp, algo, candidate, cfg, si);
      result.trace.push_back({stage.name, candidate, outcome.score});
      if (first || outcome.score > best_outcome.score) {
        best_value = value;
        best_outcome = outcome;
        first = false;
      }
    }
    hp.*stage.field = best_value;
    result.best_score = best_outcome.score;
    result.best_table = best_outcome.best_rep_table;
  }
  result.best = hp;
  return result;
}

// ---------------------------------------------------------------------------
// Hyperparameter file format.

inline nlohmann::ordered_json hyperparams_to_json(const Hyperparams& hp, Algo algo,
                                                  double score) {
  nlohmann::ordered_json j;
  j["format"] = "carerl-hyperparams-v1";
  j["algorithm"] = std::string(to_string(algo));
  j["alpha"] = hp.alpha;
  j["gamma"] = hp.gamma;
  j["epsilon"] = hp.epsilon;
  j["score"] = score;
  return j;
}

struct HyperparamsFile {
  Hyperparams hp;
  Algo algo = Algo::QLearning;
  double score = 0;
};

inline HyperparamsFile deserialize_hyperparams(const std::string& text) {
  HyperparamsFile out;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "carerl-hyperparams-v1")
      throw SchemaError("/format: expected carerl-hyperparams-v1");
    const auto algo = parse_algo(j.at("algorithm").get<std::string>());
    if (!algo) throw SchemaError("/algorithm: unknown algorithm");
    out.algo = *algo;
    out.hp.alpha = j.at("alpha").get<double>();
    out.hp.gamma = j.at("gamma").get<double>();
    out.hp.epsilon = j.at("epsilon").get<double>();
    if (j.contains("score")) out.score = j.at("score").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("hyperparams document: ") + e.what());
  }
  return out;
}

}  // namespace carerl
