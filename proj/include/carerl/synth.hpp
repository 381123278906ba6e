#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "carerl/event_log.hpp"
#include "carerl/mdp.hpp"

namespace carerl {

// Synthetic corpora: episodes simulated from a known model and written in the
// raw log schema, so every preprocessing stage has an exact expected outcome.

struct GeneratorConfig {
  std::uint64_t n_clients = 50;
  std::uint64_t min_episodes = 1;   // per client
  std::uint64_t max_episodes = 5;
  int min_within_gap = 0;           // days between incidents of one episode
  int max_within_gap = 9;
  int min_between_gap = 10;         // days between episodes of one client
  int max_between_gap = 60;
  double missing_rate = 0;          // incident loses its measures
  double preventive_rate = 0;       // incident records only a preventive start
  double multi_rate = 0;            // incident gains 1..2 decoy measures
  // relative weight of each action when the simulated staff pick one
  std::array<double, kNumActions> behavior_weights = {6.0, 0.5, 4.0, 0.5, 1.0, 1.5, 1.0};
  int involved_max = 4;
  std::uint64_t max_steps = 1000;
  std::uint64_t seed = 0;
  Date start_date{2015, 1, 1};
};

// Exact per-stage expectations for the generated log. Counts describe what a
// correct pipeline reconstructs; actions in retained_counts are the true ones
// the generator drew, so they match estimation only when multi_rate is zero.
struct EpisodeTruth {
  std::string client;
  std::uint32_t length = 0;
  bool complete = false;        // followed by a between-episode gap
  bool has_missing = false;     // some incident lost its measures
  bool has_preventive = false;  // some incident shows the preventive marker
};

struct GroundTruth {
  std::uint64_t clients = 0;
  std::uint64_t episodes = 0;
  std::uint64_t incidents = 0;
  std::uint64_t incomplete_episodes = 0;
  std::uint64_t missing_episodes = 0;
  std::uint64_t preventive_episodes = 0;
  std::uint64_t retained_episodes = 0;
  std::uint64_t retained_incidents = 0;
  TransitionCounts retained_counts;
  std::array<std::uint64_t, kNumAggressions> retained_initial{};
  Mdp true_mdp;                        // the probabilities behind the corpus
  std::vector<EpisodeTruth> episode_detail;  // emission order
};

struct SynthResult {
  EventLog log;
  GroundTruth truth;
};

namespace detail {

inline void validate(const GeneratorConfig& cfg) {
  if (cfg.n_clients == 0) throw std::invalid_argument("generator: n_clients must be positive");
  if (cfg.min_episodes == 0 || cfg.min_episodes > cfg.max_episodes)
    throw std::invalid_argument("generator: bad episode range");
  if (cfg.min_within_gap < 0 || cfg.min_within_gap > cfg.max_within_gap)
    throw std::invalid_argument("generator: bad within-episode gap range");
  if (cfg.min_between_gap <= cfg.max_within_gap || cfg.min_between_gap > cfg.max_between_gap)
    throw std::invalid_argument("generator: between-episode gaps must exceed within-episode gaps");
  for (double r : {cfg.missing_rate, cfg.preventive_rate, cfg.multi_rate})
    if (r < 0 || r > 1) throw std::invalid_argument("generator: rates must lie in [0, 1]");
  if (cfg.involved_max < 1) throw std::invalid_argument("generator: involved_max must be >= 1");
  if (!cfg.start_date.ok()) throw std::invalid_argument("generator: bad start date");
}

}  // namespace detail

inline SynthResult generate_log(const Mdp& true_mdp, const GeneratorConfig& cfg) {
  detail::validate(cfg);
  const TransitionSampler sampler(true_mdp);

  // behavior distribution per state, restricted to available actions
  std::array<std::vector<std::pair<double, int>>, kNumAggressions> behavior;
  for (int s = 0; s < kNumAggressions; ++s) {
    double total = 0;
    for (int a = 0; a < kNumActions; ++a) {
      if (!true_mdp.available[s][a]) continue;
      total += cfg.behavior_weights[a];
      behavior[s].push_back({total, a});
    }
    if (!behavior[s].empty() && total <= 0)
      throw std::invalid_argument("generator: zero behavior weight for state " +
                                  std::string(kStateNames[s]));
  }
  auto pick_action = [&](int s, Rng& rng) {
    const auto& dist = behavior[s];
    if (dist.empty())
      throw NoActions("generator: model has no action in state " +
                      std::string(kStateNames[s]));
    const double u = rng.uniform01() * dist.back().first;
    for (const auto& [cum, a] : dist)
      if (u < cum) return a;
    return dist.back().second;
  };

  int width = 1;
  for (std::uint64_t n = cfg.n_clients; n >= 10; n /= 10) ++width;

  SynthResult out;
  out.log.source = "synthetic";
  out.truth.clients = cfg.n_clients;
  out.truth.true_mdp = true_mdp;

  for (std::uint64_t c = 0; c < cfg.n_clients; ++c) {
    Rng rng(derive_seed(cfg.seed, {c}));
    char buf[32];
    std::snprintf(buf, sizeof buf, "c%0*llu", width,
                  static_cast<unsigned long long>(c + 1));
    const std::string client = buf;
    const std::uint64_t n_eps =
        static_cast<std::uint64_t>(rng.range(static_cast<long>(cfg.min_episodes),
                                             static_cast<long>(cfg.max_episodes)));
    Date date = cfg.start_date.plus_days(rng.range(0, 180));

    for (std::uint64_t e = 0; e < n_eps; ++e) {
      const bool last_episode = (e + 1 == n_eps);
      bool has_missing = false, has_preventive = false;
      // (state, true action, state the next emitted incident will show, or Tau)
      std::vector<std::array<int, 3>> steps;

      int s = sampler.sample_initial(rng);
      std::uint64_t n_steps = 0;
      while (true) {
        const int a = pick_action(s, rng);
        const int ns = sampler.sample_next(s, a, rng);

        Incident inc;
        inc.client_id = client;
        inc.date = date;
        inc.aggression = static_cast<Aggression>(s);
        inc.involved = std::to_string(rng.range(1, cfg.involved_max));
        inc.measures = {static_cast<Measure>(a)};
        if (rng.uniform01() < cfg.missing_rate) {
          inc.measures.clear();
          has_missing = true;
        } else if (rng.uniform01() < cfg.preventive_rate) {
          inc.measures = {Measure::PreventiveMeasures};
          has_preventive = true;
        } else if (rng.uniform01() < cfg.multi_rate) {
          const int extra = 1 + static_cast<int>(rng.below(2));
          for (int d = 0; d < extra; ++d) {
            const auto decoy = static_cast<Measure>(rng.below(kNumActions));
            if (std::find(inc.measures.begin(), inc.measures.end(), decoy) !=
                inc.measures.end())
              continue;
            inc.measures.push_back(decoy);
          }
        }
        out.log.incidents.push_back(std::move(inc));
        steps.push_back({s, a, ns});
        ++n_steps;
        if (ns == kTauIndex || n_steps >= cfg.max_steps) break;
        date = date.plus_days(rng.range(cfg.min_within_gap, cfg.max_within_gap));
        s = ns;
      }
      // if the cap cut the walk short, the following gap still reads as an
      // episode end, so the visible final transition goes to Tau
      steps.back()[2] = kTauIndex;

      ++out.truth.episodes;
      out.truth.incidents += steps.size();
      out.truth.episode_detail.push_back({client, static_cast<std::uint32_t>(steps.size()),
                                          !last_episode, has_missing, has_preventive});
      if (last_episode) {
        ++out.truth.incomplete_episodes;  // nothing follows: end of data
      } else if (has_missing) {
        ++out.truth.missing_episodes;
      } else if (has_preventive) {
        ++out.truth.preventive_episodes;
      } else {
        ++out.truth.retained_episodes;
        out.truth.retained_incidents += steps.size();
        out.truth.retained_initial[steps.front()[0]]++;
        for (const auto& st : steps)
          out.truth.retained_counts.count[st[0]][st[1]][st[2]]++;
      }
      date = date.plus_days(rng.range(cfg.min_between_gap, cfg.max_between_gap));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random fully-specified models for stress tests. A floor on the terminal
// probability keeps simulated episodes short.

struct RandomMdpConfig {
  std::uint64_t seed = 0;
  int min_actions = 2;
  int max_actions = kNumActions;
  double min_tau = 0.25;
  double max_tau = 0.6;
};

inline Mdp random_mdp(const RandomMdpConfig& cfg) {
  if (cfg.min_actions < 1 || cfg.min_actions > cfg.max_actions ||
      cfg.max_actions > kNumActions)
    throw std::invalid_argument("random_mdp: bad action count range");
  if (cfg.min_tau < 0 || cfg.min_tau > cfg.max_tau || cfg.max_tau >= 1)
    throw std::invalid_argument("random_mdp: bad terminal probability range");
  Rng rng(cfg.seed);
  Mdp mdp;
  for (int s = 0; s < kNumAggressions; ++s) {
    std::array<int, kNumActions> order = {0, 1, 2, 3, 4, 5, 6};
    for (int i = kNumActions - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i + 1))]);
    const int n = static_cast<int>(rng.range(cfg.min_actions, cfg.max_actions));
    for (int i = 0; i < n; ++i) {
      const int a = order[i];
      const double tau = cfg.min_tau + rng.uniform01() * (cfg.max_tau - cfg.min_tau);
      std::array<double, kNumStates> p{};
      double total = 0;
      for (int ns = 0; ns < kNumAggressions; ++ns) {
        p[ns] = 0.05 + rng.uniform01();
        total += p[ns];
      }
      for (int ns = 0; ns < kNumAggressions; ++ns) p[ns] *= (1.0 - tau) / total;
      p[kTauIndex] = tau;
      mdp.set_row(s, a, p);
    }
  }
  double total = 0;
  for (int s = 0; s < kNumAggressions; ++s) {
    mdp.initial[s] = 0.05 + rng.uniform01();
    total += mdp.initial[s];
  }
  for (int s = 0; s < kNumAggressions; ++s) mdp.initial[s] /= total;
  return mdp;
}

// ---------------------------------------------------------------------------
// Text-level perturbations of a serialized log. Both keep the original data
// rows intact, so a lenient parse recovers exactly the clean corpus.

namespace detail {

inline std::vector<std::string> data_lines(const std::string& text, std::string& header) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    if (first) {
      header = std::move(line);
      first = false;
    } else if (!line.empty()) {
      lines.push_back(std::move(line));
    }
    pos = nl + 1;
  }
  return lines;
}

inline std::string join_lines(const std::string& header, const std::vector<std::string>& lines) {
  std::string out = header + "\n";
  for (const auto& l : lines) {
    out += l;
    out += "\n";
  }
  return out;
}

}  // namespace detail

// Permutes the data rows (the header stays first).
inline std::string shuffle_rows(const std::string& text, std::uint64_t seed) {
  std::string header;
  auto lines = detail::data_lines(text, header);
  Rng rng(seed);
  for (std::size_t i = lines.size(); i > 1; --i)
    std::swap(lines[i - 1], lines[rng.below(i)]);
  return detail::join_lines(header, lines);
}

// Inserts n malformed rows at random positions, cycling through the defect
// kinds; each row triggers exactly one parser diagnostic and is dropped.
inline std::string inject_bad_rows(const std::string& text, std::size_t n, std::uint64_t seed) {
  static const std::array<std::string, 4> kBadRows = {
      "xdirt,2015-06-01,va",                      // too few fields
      "xdirt,2015-13-40,va,1,seclusion",          // impossible date
      "xdirt,2015-06-01,zz,1,seclusion",          // unknown aggression type
      "xdirt,2015-06-01,va,1,flurble",            // unknown measure
  };
  std::string header;
  auto lines = detail::data_lines(text, header);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pos = rng.below(lines.size() + 1);
    lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(pos), kBadRows[i % kBadRows.size()]);
  }
  return detail::join_lines(header, lines);
}

// ---------------------------------------------------------------------------
// Ground-truth file format.

inline nlohmann::ordered_json ground_truth_to_json(const GroundTruth& t) {
  nlohmann::ordered_json j;
  j["format"] = "carerl-groundtruth-v1";
  j["clients"] = t.clients;
  j["episodes"] = t.episodes;
  j["incidents"] = t.incidents;
  j["incomplete_episodes"] = t.incomplete_episodes;
  j["missing_episodes"] = t.missing_episodes;
  j["preventive_episodes"] = t.preventive_episodes;
  j["retained_episodes"] = t.retained_episodes;
  j["retained_incidents"] = t.retained_incidents;
  nlohmann::ordered_json counts(nlohmann::json::value_t::object);
  for (int s = 0; s < kNumAggressions; ++s) {
    nlohmann::ordered_json row(nlohmann::json::value_t::object);
    for (int a = 0; a < kNumActions; ++a) {
      nlohmann::ordered_json dist(nlohmann::json::value_t::object);
      for (int ns = 0; ns < kNumStates; ++ns)
        if (t.retained_counts.count[s][a][ns] != 0)
          dist[std::string(kStateNames[ns])] = t.retained_counts.count[s][a][ns];
      if (!dist.empty()) row[std::string(kMeasureNames[a])] = std::move(dist);
    }
    if (!row.empty()) counts[std::string(kStateNames[s])] = std::move(row);
  }
  j["retained_counts"] = std::move(counts);
  nlohmann::ordered_json init(nlohmann::json::value_t::object);
  for (int s = 0; s < kNumAggressions; ++s)
    if (t.retained_initial[s] != 0)
      init[std::string(kStateNames[s])] = t.retained_initial[s];
  j["retained_initial"] = std::move(init);
  j["true_mdp"] = mdp_to_json(t.true_mdp);
  nlohmann::ordered_json detail(nlohmann::json::value_t::array);
  for (const auto& ep : t.episode_detail) {
    nlohmann::ordered_json e;
    e["client"] = ep.client;
    e["length"] = ep.length;
    e["complete"] = ep.complete;
    e["missing"] = ep.has_missing;
    e["preventive"] = ep.has_preventive;
    detail.push_back(std::move(e));
  }
  j["episodes_detail"] = std::move(detail);
  return j;
}

inline std::string serialize_ground_truth(const GroundTruth& t) {
  return ground_truth_to_json(t).dump(2) + "\n";
}

inline GroundTruth deserialize_ground_truth(const std::string& text) {
  GroundTruth t;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "carerl-groundtruth-v1")
      throw SchemaError("/format: expected carerl-groundtruth-v1");
    t.clients = j.at("clients").get<std::uint64_t>();
    t.episodes = j.at("episodes").get<std::uint64_t>();
    t.incidents = j.at("incidents").get<std::uint64_t>();
    t.incomplete_episodes = j.at("incomplete_episodes").get<std::uint64_t>();
    t.missing_episodes = j.at("missing_episodes").get<std::uint64_t>();
    t.preventive_episodes = j.at("preventive_episodes").get<std::uint64_t>();
    t.retained_episodes = j.at("retained_episodes").get<std::uint64_t>();
    t.retained_incidents = j.at("retained_incidents").get<std::uint64_t>();
    for (const auto& [sname, row] : j.at("retained_counts").items()) {
      const auto s = parse_state(sname);
      if (!s || *s == StateLabel::Tau)
        throw SchemaError("/retained_counts/" + sname + ": not a non-terminal state");
      for (const auto& [aname, dist] : row.items()) {
        const auto a = parse_measure(aname);
        if (!a || static_cast<int>(*a) >= kNumActions)
          throw SchemaError("/retained_counts/" + sname + "/" + aname + ": not an action");
        for (const auto& [nsname, v] : dist.items()) {
          const auto ns = parse_state(nsname);
          if (!ns)
            throw SchemaError("/retained_counts/" + sname + "/" + aname + "/" + nsname +
                              ": unknown state");
          t.retained_counts.count[static_cast<int>(*s)][static_cast<int>(*a)]
                                 [static_cast<int>(*ns)] = v.get<std::uint64_t>();
        }
      }
    }
    for (const auto& [sname, v] : j.at("retained_initial").items()) {
      const auto s = parse_state(sname);
      if (!s || *s == StateLabel::Tau)
        throw SchemaError("/retained_initial/" + sname + ": not a non-terminal state");
      t.retained_initial[static_cast<int>(*s)] = v.get<std::uint64_t>();
    }
    if (j.contains("true_mdp")) t.true_mdp = mdp_from_json(j.at("true_mdp"));
    if (j.contains("episodes_detail")) {
      for (const auto& e : j.at("episodes_detail")) {
        EpisodeTruth ep;
        ep.client = e.at("client").get<std::string>();
        ep.length = e.at("length").get<std::uint32_t>();
        ep.complete = e.at("complete").get<bool>();
        ep.has_missing = e.at("missing").get<bool>();
        ep.has_preventive = e.at("preventive").get<bool>();
        t.episode_detail.push_back(std::move(ep));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("ground truth document: ") + e.what());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Generator configuration file: the knobs above plus the true model, either
// inline ("mdp") or drawn from a seed ("random_mdp").

struct GeneratorSpec {
  GeneratorConfig config;
  Mdp mdp;
};

inline GeneratorSpec deserialize_generator_spec(const std::string& text) {
  GeneratorSpec spec;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "carerl-generator-v1")
      throw SchemaError("/format: expected carerl-generator-v1");
    GeneratorConfig& c = spec.config;
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("clients")) c.n_clients = j.at("clients").get<std::uint64_t>();
    auto range_of = [&](const char* key, auto& lo, auto& hi) {
      if (!j.contains(key)) return;
      const auto& r = j.at(key);
      if (!r.is_array() || r.size() != 2)
        throw SchemaError(std::string("/") + key + ": expected [lo, hi]");
      lo = r[0].get<std::remove_reference_t<decltype(lo)>>();
      hi = r[1].get<std::remove_reference_t<decltype(hi)>>();
    };
    range_of("episodes", c.min_episodes, c.max_episodes);
    range_of("within_gap", c.min_within_gap, c.max_within_gap);
    range_of("between_gap", c.min_between_gap, c.max_between_gap);
    if (j.contains("missing_rate")) c.missing_rate = j.at("missing_rate").get<double>();
    if (j.contains("preventive_rate"))
      c.preventive_rate = j.at("preventive_rate").get<double>();
    if (j.contains("multi_rate")) c.multi_rate = j.at("multi_rate").get<double>();
    if (j.contains("involved_max")) c.involved_max = j.at("involved_max").get<int>();
    if (j.contains("start_date")) {
      const auto d = parse_date(j.at("start_date").get<std::string>());
      if (!d) throw SchemaError("/start_date: bad date");
      c.start_date = *d;
    }
    if (j.contains("behavior_weights")) {
      for (const auto& [aname, w] : j.at("behavior_weights").items()) {
        const auto a = parse_measure(aname);
        if (!a || static_cast<int>(*a) >= kNumActions)
          throw SchemaError("/behavior_weights/" + aname + ": not an action");
        spec.config.behavior_weights[static_cast<int>(*a)] = w.get<double>();
      }
    }
    const bool has_mdp = j.contains("mdp"), has_random = j.contains("random_mdp");
    if (has_mdp == has_random)
      throw SchemaError("config needs exactly one of \"mdp\" and \"random_mdp\"");
    if (has_mdp) {
      spec.mdp = mdp_from_json(j.at("mdp"));
    } else {
      const auto& r = j.at("random_mdp");
      RandomMdpConfig rc;
      if (r.contains("seed")) rc.seed = r.at("seed").get<std::uint64_t>();
      if (r.contains("min_actions")) rc.min_actions = r.at("min_actions").get<int>();
      if (r.contains("max_actions")) rc.max_actions = r.at("max_actions").get<int>();
      if (r.contains("min_tau")) rc.min_tau = r.at("min_tau").get<double>();
      if (r.contains("max_tau")) rc.max_tau = r.at("max_tau").get<double>();
      spec.mdp = random_mdp(rc);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("generator config: ") + e.what());
  }
  return spec;
}

}  // namespace carerl
