#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "carerl/preprocess.hpp"
#include "carerl/rng.hpp"

namespace carerl {

// Transition reward = action penalty + next-state penalty/bonus. Values are
// the severity table used throughout; both maps are plain data so fixtures
// can override them.
struct RewardTable {
  // indexed by StateLabel: va, pp, po, sib, Tau
  std::array<int, kNumStates> state_reward = {0, -4, -1, -3, 1};
  // indexed by Measure (first 7): talk, held, none, seclusion, send,
  // distract, terminate
  std::array<int, kNumActions> action_reward = {0, -2, 0, -2, -1, -1, -1};
};

inline int reward(const RewardTable& table, Measure action, StateLabel next_state) {
  return table.action_reward[static_cast<int>(action)] +
         table.state_reward[static_cast<int>(next_state)];
}

struct TransitionCounts {
  // [state][action][next_state]
  std::array<std::array<std::array<std::uint64_t, kNumStates>, kNumActions>, kNumAggressions>
      count{};

  std::uint64_t chosen(int s, int a) const {
    std::uint64_t n = 0;
    for (int ns = 0; ns < kNumStates; ++ns) n += count[s][a][ns];
    return n;
  }
};

// One increment per enriched incident; nothing else contributes.
// Pre: measures resolved and episodes complete.
inline TransitionCounts count_transitions(const std::vector<Episode>& episodes) {
  TransitionCounts counts;
  for (const auto& ep : episodes) {
    for (const auto& s : ep.steps) {
      if (!s.action)
        throw std::invalid_argument("count_transitions: incident measures not resolved");
      if (!s.next_state)
        throw std::invalid_argument("count_transitions: incomplete episode in corpus");
      counts.count[static_cast<int>(s.state)][static_cast<int>(*s.action)]
                  [static_cast<int>(*s.next_state)]++;
    }
  }
  return counts;
}

struct Mdp {
  // probability rows exist only for observed/declared (state, action) pairs
  std::array<std::array<bool, kNumActions>, kNumAggressions> available{};
  std::array<std::array<std::array<double, kNumStates>, kNumActions>, kNumAggressions> prob{};
  std::array<double, kNumAggressions> initial{};
  RewardTable rewards;

  std::vector<int> actions_of(int state) const {
    std::vector<int> out;
    for (int a = 0; a < kNumActions; ++a)
      if (available[state][a]) out.push_back(a);
    return out;
  }

  bool any_actions(int state) const {
    for (int a = 0; a < kNumActions; ++a)
      if (available[state][a]) return true;
    return false;
  }

  void set_row(int state, int action, std::array<double, kNumStates> p) {
    available[state][action] = true;
    prob[state][action] = p;
  }
};

// Maximum-likelihood rows: count / chosen. Unobserved pairs stay unavailable;
// the initial distribution is the empirical distribution of first states.
inline Mdp estimate_mdp(const TransitionCounts& counts, const std::vector<Episode>& episodes,
                        const RewardTable& rewards = {}) {
  if (episodes.empty()) throw EmptyCorpus("estimate_mdp: no episodes");
  Mdp mdp;
  mdp.rewards = rewards;
  for (int s = 0; s < kNumAggressions; ++s) {
    for (int a = 0; a < kNumActions; ++a) {
      const std::uint64_t chosen = counts.chosen(s, a);
      if (chosen == 0) continue;
      mdp.available[s][a] = true;
      for (int ns = 0; ns < kNumStates; ++ns)
        mdp.prob[s][a][ns] =
            static_cast<double>(counts.count[s][a][ns]) / static_cast<double>(chosen);
    }
  }
  for (const auto& ep : episodes) mdp.initial[static_cast<int>(ep.steps.front().state)] += 1.0;
  for (double& p : mdp.initial) p /= static_cast<double>(episodes.size());
  return mdp;
}

// Cumulative-probability view used by every simulation loop.
struct TransitionSampler {
  std::array<std::array<std::array<double, kNumStates>, kNumActions>, kNumAggressions> cum{};
  std::array<double, kNumAggressions> initial_cum{};

  explicit TransitionSampler(const Mdp& mdp) {
    for (int s = 0; s < kNumAggressions; ++s) {
      for (int a = 0; a < kNumActions; ++a) {
        double acc = 0;
        for (int ns = 0; ns < kNumStates; ++ns) {
          acc += mdp.prob[s][a][ns];
          cum[s][a][ns] = acc;
        }
        cum[s][a][kNumStates - 1] = 1.0;  // guard against rounding in the tail
      }
    }
    double acc = 0;
    for (int s = 0; s < kNumAggressions; ++s) {
      acc += mdp.initial[s];
      initial_cum[s] = acc;
    }
    initial_cum[kNumAggressions - 1] = 1.0;
  }

  int sample_initial(Rng& rng) const {
    const double u = rng.uniform01();
    for (int s = 0; s + 1 < kNumAggressions; ++s)
      if (u < initial_cum[s]) return s;
    return kNumAggressions - 1;
  }

  int sample_next(int state, int action, Rng& rng) const {
    const double u = rng.uniform01();
    const auto& row = cum[state][action];
    for (int ns = 0; ns + 1 < kNumStates; ++ns)
      if (u < row[ns]) return ns;
    return kNumStates - 1;
  }
};

// ---------------------------------------------------------------------------
// Value iteration: the exact dynamic-programming solution, used as an oracle
// for the learned agents.

struct ValueIterationResult {
  std::array<std::array<double, kNumActions>, kNumAggressions> q{};
  std::array<int, kNumAggressions> policy{};  // -1 where no action is available
  int iterations = 0;
  double residual = 0;
};

inline ValueIterationResult value_iteration(const Mdp& mdp, double gamma, double tol,
                                            int max_iterations = 1000000) {
  if (tol <= 0) throw std::invalid_argument("value_iteration: tol must be positive");
  ValueIterationResult r;
  r.policy.fill(-1);

  std::array<double, kNumStates> value{};  // value[Tau] stays 0
  for (int it = 1; it <= max_iterations; ++it) {
    double diff = 0;
    std::array<double, kNumStates> next_value{};
    for (int s = 0; s < kNumAggressions; ++s) {
      double best = 0;
      bool has = false;
      for (int a = 0; a < kNumActions; ++a) {
        if (!mdp.available[s][a]) continue;
        double q = 0;
        for (int ns = 0; ns < kNumStates; ++ns) {
          const double p = mdp.prob[s][a][ns];
          if (p == 0) continue;
          q += p * (reward(mdp.rewards, static_cast<Measure>(a), static_cast<StateLabel>(ns)) +
                    gamma * value[ns]);
        }
        diff = std::max(diff, std::abs(q - r.q[s][a]));
        r.q[s][a] = q;
        if (!has || q > best) {
          best = q;
          has = true;
        }
      }
      next_value[s] = has ? best : 0;
    }
    value[0] = next_value[0];
    value[1] = next_value[1];
    value[2] = next_value[2];
    value[3] = next_value[3];
    r.iterations = it;
    r.residual = diff;
    if (diff < tol) {
      for (int s = 0; s < kNumAggressions; ++s) {
        double best = 0;
        for (int a = 0; a < kNumActions; ++a) {
          if (!mdp.available[s][a]) continue;
          if (r.policy[s] < 0 || r.q[s][a] > best) {
            best = r.q[s][a];
            r.policy[s] = a;  // first maximum in canonical order wins
          }
        }
      }
      return r;
    }
  }
  throw NoConvergence("value_iteration: residual " + std::to_string(r.residual) +
                      " after " + std::to_string(max_iterations) + " iterations");
}

// ---------------------------------------------------------------------------
// File format. Probabilities are written with full round-trip precision; maps
// are keyed by the canonical state/action names.

inline nlohmann::ordered_json mdp_to_json(const Mdp& mdp) {
  nlohmann::ordered_json j;
  j["format"] = "carerl-mdp-v1";
  j["states"] = kStateNames;
  std::vector<std::string_view> actions(kMeasureNames.begin(), kMeasureNames.begin() + kNumActions);
  j["actions"] = actions;
  nlohmann::ordered_json trans(nlohmann::json::value_t::object);
  for (int s = 0; s < kNumAggressions; ++s) {
    nlohmann::ordered_json row(nlohmann::json::value_t::object);
    for (int a = 0; a < kNumActions; ++a) {
      if (!mdp.available[s][a]) continue;
      nlohmann::ordered_json dist(nlohmann::json::value_t::object);
      for (int ns = 0; ns < kNumStates; ++ns)
        if (mdp.prob[s][a][ns] != 0) dist[std::string(kStateNames[ns])] = mdp.prob[s][a][ns];
      row[std::string(kMeasureNames[a])] = std::move(dist);
    }
    if (!row.empty()) trans[std::string(kStateNames[s])] = std::move(row);
  }
  j["transitions"] = std::move(trans);
  nlohmann::ordered_json init(nlohmann::json::value_t::object);
  for (int s = 0; s < kNumAggressions; ++s)
    if (mdp.initial[s] != 0) init[std::string(kStateNames[s])] = mdp.initial[s];
  j["initial"] = std::move(init);
  nlohmann::ordered_json sr(nlohmann::json::value_t::object), ar(nlohmann::json::value_t::object);
  for (int s = 0; s < kNumStates; ++s)
    sr[std::string(kStateNames[s])] = mdp.rewards.state_reward[s];
  for (int a = 0; a < kNumActions; ++a)
    ar[std::string(kMeasureNames[a])] = mdp.rewards.action_reward[a];
  j["rewards"] = {{"state", std::move(sr)}, {"action", std::move(ar)}};
  return j;
}

inline std::string serialize_mdp(const Mdp& mdp) { return mdp_to_json(mdp).dump(2) + "\n"; }

inline Mdp mdp_from_json(const nlohmann::json& j) {
  constexpr double kSumTol = 1e-6;
  Mdp mdp;
  try {
    if (j.at("format") != "carerl-mdp-v1")
      throw SchemaError("/format: expected carerl-mdp-v1");
    for (const auto& [sname, row] : j.at("transitions").items()) {
      const auto state = parse_state(sname);
      if (!state || *state == StateLabel::Tau)
        throw SchemaError("/transitions/" + sname + ": not a non-terminal state");
      const int s = static_cast<int>(*state);
      for (const auto& [aname, dist] : row.items()) {
        const auto action = parse_measure(aname);
        if (!action || static_cast<int>(*action) >= kNumActions)
          throw SchemaError("/transitions/" + sname + "/" + aname + ": not an action");
        const int a = static_cast<int>(*action);
        double sum = 0;
        for (const auto& [nsname, p] : dist.items()) {
          const auto ns = parse_state(nsname);
          if (!ns)
            throw SchemaError("/transitions/" + sname + "/" + aname + "/" + nsname +
                              ": unknown state");
          const double pv = p.get<double>();
          if (pv < 0 || pv > 1)
            throw SchemaError("/transitions/" + sname + "/" + aname + "/" + nsname +
                              ": probability out of range");
          mdp.prob[s][a][static_cast<int>(*ns)] = pv;
          sum += pv;
        }
        if (std::abs(sum - 1.0) > kSumTol)
          throw SchemaError("/transitions/" + sname + "/" + aname + ": probabilities sum to " +
                            std::to_string(sum));
        mdp.available[s][a] = true;
      }
    }
    double isum = 0;
    for (const auto& [sname, p] : j.at("initial").items()) {
      const auto state = parse_state(sname);
      if (!state || *state == StateLabel::Tau)
        throw SchemaError("/initial/" + sname + ": not a non-terminal state");
      mdp.initial[static_cast<int>(*state)] = p.get<double>();
      isum += p.get<double>();
    }
    if (std::abs(isum - 1.0) > kSumTol)
      throw SchemaError("/initial: probabilities sum to " + std::to_string(isum));
    if (j.contains("rewards")) {
      for (const auto& [sname, v] : j.at("rewards").at("state").items()) {
        const auto state = parse_state(sname);
        if (!state) throw SchemaError("/rewards/state/" + sname + ": unknown state");
        mdp.rewards.state_reward[static_cast<int>(*state)] = v.get<int>();
      }
      for (const auto& [aname, v] : j.at("rewards").at("action").items()) {
        const auto action = parse_measure(aname);
        if (!action || static_cast<int>(*action) >= kNumActions)
          throw SchemaError("/rewards/action/" + aname + ": unknown action");
        mdp.rewards.action_reward[static_cast<int>(*action)] = v.get<int>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("mdp document: ") + e.what());
  }
  return mdp;
}

inline Mdp deserialize_mdp(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("mdp document: ") + e.what());
  }
  return mdp_from_json(j);
}

}  // namespace carerl
