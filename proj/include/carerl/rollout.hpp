#pragma once

#include <algorithm>
#include <cstdio>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "carerl/agents.hpp"

namespace carerl {

struct RolloutConfig {
  std::uint64_t n_runs = 10000;
  std::uint64_t episodes_per_run = 100;
  std::uint64_t seed = 0;
  std::uint64_t max_steps = 1000;
  int threads = 1;
  bool collect_variants = false;
  // record each episode's total instead of one mean per run
  bool per_episode_values = false;
};

// Sample of simulated performance. values holds one mean episode reward per
// run (or one total per episode when requested); variants counts distinct
// episode trajectories, each step packed into one byte.
struct RewardSample {
  std::string policy_name;
  std::uint64_t n_runs = 0;
  std::uint64_t episodes_per_run = 0;
  bool per_episode_values = false;
  std::vector<double> values;
  std::uint64_t truncated_episodes = 0;
  std::map<std::string, std::uint64_t> variants;
};

inline double average_reward(const RewardSample& sample) {
  if (sample.values.empty()) throw EmptySample("reward sample is empty");
  double sum = 0;
  for (double v : sample.values) sum += v;
  return sum / static_cast<double>(sample.values.size());
}

namespace detail {

inline char pack_step(int s, int a, int ns) {
  return static_cast<char>((s * kNumActions + a) * kNumStates + ns);
}

inline void unpack_step(char c, int& s, int& a, int& ns) {
  const int v = static_cast<unsigned char>(c);
  ns = v % kNumStates;
  a = (v / kNumStates) % kNumActions;
  s = v / (kNumStates * kNumActions);
}

}  // namespace detail

// Runs are independent random streams derived from the root seed, so results
// do not depend on how runs are distributed over threads.
inline RewardSample rollout(const Mdp& mdp, const Policy& policy, const RolloutConfig& cfg) {
  const TransitionSampler sampler(mdp);

  // fast path for fixed policies: per-state cumulative row and reward row
  std::array<const double*, kNumAggressions> fixed_cum{};
  std::array<std::array<double, kNumStates>, kNumAggressions> fixed_rew{};
  if (policy.kind == Policy::Kind::Fixed) {
    for (int s = 0; s < kNumAggressions; ++s) {
      const int a = policy.fixed[s];
      if (a < 0) continue;  // diagnosed only if the state is actually reached
      fixed_cum[s] = sampler.cum[s][a].data();
      for (int ns = 0; ns < kNumStates; ++ns)
        fixed_rew[s][ns] =
            reward(mdp.rewards, static_cast<Measure>(a), static_cast<StateLabel>(ns));
    }
  }

  RewardSample sample;
  sample.policy_name = policy.name;
  sample.n_runs = cfg.n_runs;
  sample.episodes_per_run = cfg.episodes_per_run;
  sample.per_episode_values = cfg.per_episode_values;
  sample.values.assign(cfg.per_episode_values ? cfg.n_runs * cfg.episodes_per_run : cfg.n_runs,
                       0.0);

  std::mutex merge_mutex;
  std::exception_ptr first_error;

  auto worker = [&](std::uint64_t run_begin, std::uint64_t run_end) {
    std::map<std::string, std::uint64_t> local_variants;
    std::uint64_t local_truncated = 0;
    std::string path;
    try {
      for (std::uint64_t run = run_begin; run < run_end; ++run) {
        Rng rng(derive_seed(cfg.seed, {run}));
        double run_total = 0;
        for (std::uint64_t ep = 0; ep < cfg.episodes_per_run; ++ep) {
          double ep_total = 0;
          if (cfg.collect_variants) path.clear();
          int s = sampler.sample_initial(rng);
          std::uint64_t steps = 0;
          while (true) {
            int ns;
            if (policy.kind == Policy::Kind::Fixed) {
              const double* crow = fixed_cum[s];
              if (!crow)
                throw UnreachableAction("policy \"" + policy.name +
                                        "\" has no action for state " +
                                        std::string(kStateNames[s]));
              const double u = rng.uniform01();
              ns = 0;
              while (ns + 1 < kNumStates && u >= crow[ns]) ++ns;
              ep_total += fixed_rew[s][ns];
              if (cfg.collect_variants)
                path.push_back(detail::pack_step(s, policy.fixed[s], ns));
            } else {
              const int a = policy.decide(mdp, s, rng);
              ns = sampler.sample_next(s, a, rng);
              ep_total += reward(mdp.rewards, static_cast<Measure>(a),
                                 static_cast<StateLabel>(ns));
              if (cfg.collect_variants) path.push_back(detail::pack_step(s, a, ns));
            }
            ++steps;
            if (ns == kTauIndex) break;
            if (steps >= cfg.max_steps) {
              ++local_truncated;
              break;
            }
            s = ns;
          }
          run_total += ep_total;
          if (cfg.per_episode_values)
            sample.values[run * cfg.episodes_per_run + ep] = ep_total;
          if (cfg.collect_variants) ++local_variants[path];
        }
        if (!cfg.per_episode_values)
          sample.values[run] = run_total / static_cast<double>(cfg.episodes_per_run);
      }
    } catch (...) {
      std::lock_guard lock(merge_mutex);
      if (!first_error) first_error = std::current_exception();
      return;
    }
    std::lock_guard lock(merge_mutex);
    sample.truncated_episodes += local_truncated;
    for (const auto& [k, n] : local_variants) sample.variants[k] += n;
  };

  const int threads = std::max(1, cfg.threads);
  if (threads == 1 || cfg.n_runs < 2) {
    worker(0, cfg.n_runs);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (cfg.n_runs + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::uint64_t lo = std::min(cfg.n_runs, chunk * static_cast<std::uint64_t>(t));
      const std::uint64_t hi = std::min(cfg.n_runs, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return sample;
}

struct VariantCount {
  std::string path;
  std::uint64_t count = 0;
};

// Most common trajectories first; equal counts order by the trajectory
// encoding, which follows canonical state/action order.
inline std::vector<VariantCount> top_variants(const RewardSample& sample, std::size_t k) {
  std::vector<VariantCount> out;
  out.reserve(sample.variants.size());
  for (const auto& [path, count] : sample.variants) out.push_back({path, count});
  std::sort(out.begin(), out.end(), [](const VariantCount& a, const VariantCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.path < b.path;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

// "(pp, Talk with client, pp)(pp, Talk with client, Tau)"
inline std::string render_variant(const std::string& path) {
  std::string out;
  for (char c : path) {
    int s, a, ns;
    detail::unpack_step(c, s, a, ns);
    out += "(";
    out += kStateNames[s];
    out += ", ";
    out += kMeasureDisplayNames[a];
    out += ", ";
    out += kStateNames[ns];
    out += ")";
  }
  return out;
}

// Machine-readable form: fields joined by '>', steps by '|'.
inline std::string variant_key(const std::string& path) {
  std::string out;
  for (char c : path) {
    int s, a, ns;
    detail::unpack_step(c, s, a, ns);
    if (!out.empty()) out += "|";
    out += kStateNames[s];
    out += ">";
    out += kMeasureNames[a];
    out += ">";
    out += kStateNames[ns];
  }
  return out;
}

inline std::string parse_variant_key(const std::string& text) {
  std::string path;
  for (const auto& step : detail::split(text, '|')) {
    const auto fields = detail::split(step, '>');
    if (fields.size() != 3) throw SchemaError("variant step \"" + step + "\": expected 3 fields");
    const auto s = parse_state(fields[0]);
    const auto a = parse_measure(fields[1]);
    const auto ns = parse_state(fields[2]);
    if (!s || *s == StateLabel::Tau || !a || static_cast<int>(*a) >= kNumActions || !ns)
      throw SchemaError("variant step \"" + step + "\": unknown state or action");
    path.push_back(
        detail::pack_step(static_cast<int>(*s), static_cast<int>(*a), static_cast<int>(*ns)));
  }
  return path;
}

// ---------------------------------------------------------------------------
// Delimited files. Numbers use round-trip precision so a written sample reads
// back bit-identically.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_samples_csv(std::ostream& os, const RewardSample& sample) {
  os << "# policy: " << sample.policy_name << "\n";
  os << "# runs: " << sample.n_runs << "\n";
  os << "# episodes_per_run: " << sample.episodes_per_run << "\n";
  os << "# statistic: " << (sample.per_episode_values ? "episode_total" : "run_mean") << "\n";
  os << "# truncated_episodes: " << sample.truncated_episodes << "\n";
  os << "index,value\n";
  for (std::size_t i = 0; i < sample.values.size(); ++i)
    os << i << "," << detail::format_double(sample.values[i]) << "\n";
}

inline RewardSample read_samples_csv(std::istream& is) {
  RewardSample sample;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string key{trim(line.substr(1, colon - 1))};
      const std::string val{trim(line.substr(colon + 1))};
      if (key == "policy") sample.policy_name = val;
      else if (key == "runs") sample.n_runs = std::stoull(val);
      else if (key == "episodes_per_run") sample.episodes_per_run = std::stoull(val);
      else if (key == "statistic") sample.per_episode_values = (val == "episode_total");
      else if (key == "truncated_episodes") sample.truncated_episodes = std::stoull(val);
      continue;
    }
    if (!header_seen) {
      if (line != "index,value")
        throw SchemaError("samples line " + std::to_string(lineno) +
                          ": expected header index,value");
      header_seen = true;
      continue;
    }
    const auto fields = detail::split(line, ',');
    if (fields.size() != 2)
      throw SchemaError("samples line " + std::to_string(lineno) + ": expected 2 fields");
    try {
      sample.values.push_back(std::stod(fields[1]));
    } catch (const std::exception&) {
      throw SchemaError("samples line " + std::to_string(lineno) + ": bad value");
    }
  }
  return sample;
}

inline void write_variants_csv(std::ostream& os, const RewardSample& sample) {
  os << "# policy: " << sample.policy_name << "\n";
  os << "count,path\n";
  for (const auto& v : top_variants(sample, sample.variants.size()))
    os << v.count << "," << variant_key(v.path) << "\n";
}

inline std::vector<VariantCount> read_variants_csv(std::istream& is) {
  std::vector<VariantCount> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "count,path")
        throw SchemaError("variants line " + std::to_string(lineno) +
                          ": expected header count,path");
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw SchemaError("variants line " + std::to_string(lineno) + ": expected 2 fields");
    VariantCount v;
    try {
      v.count = std::stoull(line.substr(0, comma));
    } catch (const std::exception&) {
      throw SchemaError("variants line " + std::to_string(lineno) + ": bad count");
    }
    v.path = parse_variant_key(line.substr(comma + 1));
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace carerl
