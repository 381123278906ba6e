#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "carerl/mdp.hpp"

namespace carerl {

struct Hyperparams {
  double alpha = 0.1;
  double gamma = 0.2;
  double epsilon = 0.1;
};

// Action values for the (state, action) pairs the model declares available.
// Entries start at zero; undefined pairs are never read or written.
struct QTable {
  std::array<std::array<double, kNumActions>, kNumAggressions> q{};
  std::array<std::array<bool, kNumActions>, kNumAggressions> defined{};

  static QTable zeros(const Mdp& mdp) {
    QTable t;
    t.defined = mdp.available;
    return t;
  }
};

// First maximum in canonical action order; NoActions when the state has none.
inline int greedy_action(const QTable& table, int state) {
  int best = -1;
  double best_q = 0;
  for (int a = 0; a < kNumActions; ++a) {
    if (!table.defined[state][a]) continue;
    if (best < 0 || table.q[state][a] > best_q) {
      best = a;
      best_q = table.q[state][a];
    }
  }
  if (best < 0)
    throw NoActions("no action available in state " + std::string(kStateNames[state]));
  return best;
}

// One uniform draw decides explore vs exploit; exploration picks uniformly
// among the available actions (the greedy one included).
inline int epsilon_greedy(const QTable& table, int state, double epsilon, Rng& rng) {
  if (rng.uniform01() < epsilon) {
    std::array<int, kNumActions> avail{};
    int n = 0;
    for (int a = 0; a < kNumActions; ++a)
      if (table.defined[state][a]) avail[n++] = a;
    if (n == 0)
      throw NoActions("no action available in state " + std::string(kStateNames[state]));
    return avail[rng.below(static_cast<std::uint64_t>(n))];
  }
  return greedy_action(table, state);
}

struct TrainReport {
  std::uint64_t episodes = 0;
  std::uint64_t steps = 0;
  std::uint64_t truncated_episodes = 0;
};

struct TrainResult {
  QTable table;
  TrainReport report;
};

namespace detail {

inline double max_defined_q(const QTable& table, int state) {
  double best = 0;
  bool has = false;
  for (int a = 0; a < kNumActions; ++a) {
    if (!table.defined[state][a]) continue;
    if (!has || table.q[state][a] > best) {
      best = table.q[state][a];
      has = true;
    }
  }
  if (!has)
    throw NoActions("no action available in state " + std::string(kStateNames[state]));
  return best;
}

}  // namespace detail

// Off-policy temporal-difference control. Episodes run until the terminal
// state or max_steps; a truncated episode gets no terminal bonus.
inline TrainResult q_learning_train(const Mdp& mdp, const Hyperparams& hp,
                                    std::uint64_t episodes, std::uint64_t seed,
                                    std::uint64_t max_steps = 1000) {
  const TransitionSampler sampler(mdp);
  TrainResult r;
  r.table = QTable::zeros(mdp);
  Rng rng(seed);
  for (std::uint64_t ep = 0; ep < episodes; ++ep) {
    int s = sampler.sample_initial(rng);
    std::uint64_t steps = 0;
    while (true) {
      const int a = epsilon_greedy(r.table, s, hp.epsilon, rng);
      const int ns = sampler.sample_next(s, a, rng);
      const double rew =
          reward(mdp.rewards, static_cast<Measure>(a), static_cast<StateLabel>(ns));
      double target = rew;
      if (ns != kTauIndex) target += hp.gamma * detail::max_defined_q(r.table, ns);
      r.table.q[s][a] += hp.alpha * (target - r.table.q[s][a]);
      ++steps;
      if (ns == kTauIndex) break;
      if (steps >= max_steps) {
        ++r.report.truncated_episodes;
        break;
      }
      s = ns;
    }
    ++r.report.episodes;
    r.report.steps += steps;
  }
  return r;
}

// On-policy variant: the action actually taken next provides the bootstrap.
inline TrainResult sarsa_train(const Mdp& mdp, const Hyperparams& hp, std::uint64_t episodes,
                               std::uint64_t seed, std::uint64_t max_steps = 1000) {
  const TransitionSampler sampler(mdp);
  TrainResult r;
  r.table = QTable::zeros(mdp);
  Rng rng(seed);
  for (std::uint64_t ep = 0; ep < episodes; ++ep) {
    int s = sampler.sample_initial(rng);
    int a = epsilon_greedy(r.table, s, hp.epsilon, rng);
    std::uint64_t steps = 0;
    while (true) {
      const int ns = sampler.sample_next(s, a, rng);
      const double rew =
          reward(mdp.rewards, static_cast<Measure>(a), static_cast<StateLabel>(ns));
      ++steps;
      if (ns == kTauIndex) {
        r.table.q[s][a] += hp.alpha * (rew - r.table.q[s][a]);
        break;
      }
      const int na = epsilon_greedy(r.table, ns, hp.epsilon, rng);
      r.table.q[s][a] += hp.alpha * (rew + hp.gamma * r.table.q[ns][na] - r.table.q[s][a]);
      if (steps >= max_steps) {
        ++r.report.truncated_episodes;
        break;
      }
      s = ns;
      a = na;
    }
    ++r.report.episodes;
    r.report.steps += steps;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Policies used when simulating a model.

struct Policy {
  enum class Kind { Fixed, Random, EpsilonGreedy };

  std::string name;
  Kind kind = Kind::Fixed;
  std::array<int, kNumAggressions> fixed = {-1, -1, -1, -1};
  QTable table;       // EpsilonGreedy only
  double epsilon = 0; // EpsilonGreedy only

  static Policy greedy(std::string name, const QTable& table) {
    Policy p;
    p.name = std::move(name);
    for (int s = 0; s < kNumAggressions; ++s) {
      bool has = false;
      for (int a = 0; a < kNumActions; ++a)
        if (table.defined[s][a]) has = true;
      if (has) p.fixed[s] = greedy_action(table, s);
    }
    return p;
  }

  static Policy fixed_actions(std::string name, std::array<int, kNumAggressions> actions) {
    Policy p;
    p.name = std::move(name);
    p.fixed = actions;
    return p;
  }

  static Policy random() {
    Policy p;
    p.name = "random";
    p.kind = Kind::Random;
    return p;
  }

  static Policy exploring(std::string name, const QTable& table, double epsilon) {
    Policy p;
    p.name = std::move(name);
    p.kind = Kind::EpsilonGreedy;
    p.table = table;
    p.epsilon = epsilon;
    return p;
  }

  int decide(const Mdp& mdp, int state, Rng& rng) const {
    switch (kind) {
      case Kind::Fixed: {
        const int a = fixed[state];
        if (a < 0)
          throw UnreachableAction("policy \"" + name + "\" has no action for state " +
                                  std::string(kStateNames[state]));
        return a;
      }
      case Kind::Random: {
        std::array<int, kNumActions> avail{};
        int n = 0;
        for (int a = 0; a < kNumActions; ++a)
          if (mdp.available[state][a]) avail[n++] = a;
        if (n == 0)
          throw NoActions("no action available in state " + std::string(kStateNames[state]));
        return avail[rng.below(static_cast<std::uint64_t>(n))];
      }
      case Kind::EpsilonGreedy:
        return epsilon_greedy(table, state, epsilon, rng);
    }
    throw std::logic_error("unreachable");
  }
};

// Baseline that always repeats the historically dominant action per state.
// Counts come from the final (resolved) corpus; ties break canonically.
inline Policy most_frequent_policy(const std::vector<Episode>& episodes) {
  if (episodes.empty()) throw EmptyCorpus("most_frequent_policy: no episodes");
  std::array<std::array<std::uint64_t, kNumActions>, kNumAggressions> counts{};
  for (const auto& ep : episodes) {
    for (const auto& s : ep.steps) {
      if (!s.action)
        throw std::invalid_argument("most_frequent_policy: incident measures not resolved");
      counts[static_cast<int>(s.state)][static_cast<int>(*s.action)]++;
    }
  }
  Policy p;
  p.name = "most-frequent";
  for (int s = 0; s < kNumAggressions; ++s) {
    std::uint64_t best = 0;
    for (int a = 0; a < kNumActions; ++a) {
      if (counts[s][a] > best) {
        best = counts[s][a];
        p.fixed[s] = a;
      }
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Q-table file format.

inline nlohmann::ordered_json qtable_to_json(const QTable& table) {
  nlohmann::ordered_json j;
  j["format"] = "carerl-qtable-v1";
  nlohmann::ordered_json q(nlohmann::json::value_t::object);
  for (int s = 0; s < kNumAggressions; ++s) {
    nlohmann::ordered_json row(nlohmann::json::value_t::object);
    for (int a = 0; a < kNumActions; ++a)
      if (table.defined[s][a]) row[std::string(kMeasureNames[a])] = table.q[s][a];
    if (!row.empty()) q[std::string(kStateNames[s])] = std::move(row);
  }
  j["q"] = std::move(q);
  return j;
}

inline std::string serialize_qtable(const QTable& table) {
  return qtable_to_json(table).dump(2) + "\n";
}

inline QTable deserialize_qtable(const std::string& text) {
  QTable table;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    if (j.at("format") != "carerl-qtable-v1")
      throw SchemaError("/format: expected carerl-qtable-v1");
    for (const auto& [sname, row] : j.at("q").items()) {
      const auto state = parse_state(sname);
      if (!state || *state == StateLabel::Tau)
        throw SchemaError("/q/" + sname + ": not a non-terminal state");
      for (const auto& [aname, v] : row.items()) {
        const auto action = parse_measure(aname);
        if (!action || static_cast<int>(*action) >= kNumActions)
          throw SchemaError("/q/" + sname + "/" + aname + ": not an action");
        table.q[static_cast<int>(*state)][static_cast<int>(*action)] = v.get<double>();
        table.defined[static_cast<int>(*state)][static_cast<int>(*action)] = true;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("qtable document: ") + e.what());
  }
  return table;
}

}  // namespace carerl
