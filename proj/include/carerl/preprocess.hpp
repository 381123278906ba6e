#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "carerl/event_log.hpp"

namespace carerl {

// An incident enriched with the aggression type that followed it. next_state
// is Tau when the following incident is more than gap_days away (episode
// boundary) and empty when the client has no later incident at all, which
// marks the episode incomplete. client id and episode id live on Episode.
struct EnrichedIncident {
  Date date;
  StateLabel state = StateLabel::Va;          // never Tau
  std::vector<Measure> measures;              // as reported, pre-resolution
  std::optional<Measure> action;              // set by resolve_measures
  std::optional<StateLabel> next_state;
};

struct Episode {
  std::uint32_t id = 0;
  std::string client_id;
  std::vector<EnrichedIncident> steps;

  bool complete() const {
    return !steps.empty() && steps.back().next_state == StateLabel::Tau;
  }
  std::size_t length() const { return steps.size(); }
};

struct SegmentationConfig {
  int gap_days = 9;           // inclusive boundary: gap <= gap_days stays
  int min_episode_length = 1; // applied at the end of the pipeline
};

enum class ResolveMode { CorpusGlobal, PerState };

// Per-client segmentation. Incidents are stable-sorted by date so rows
// sharing a date keep their file order; clients are processed in lexicographic
// id order, which makes episode ids independent of row order in the file.
inline std::vector<Episode> enrich_and_segment(const EventLog& log,
                                               const SegmentationConfig& cfg = {}) {
  std::map<std::string, std::vector<const Incident*>> by_client;
  for (const auto& inc : log.incidents) by_client[inc.client_id].push_back(&inc);

  std::vector<Episode> episodes;
  std::uint32_t next_id = 1;
  for (auto& [client, rows] : by_client) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Incident* a, const Incident* b) { return a->date < b->date; });

    Episode cur;
    cur.id = next_id;
    cur.client_id = client;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EnrichedIncident step;
      step.date = rows[i]->date;
      step.state = to_state(rows[i]->aggression);
      step.measures = rows[i]->measures;
      const bool last = (i + 1 == rows.size());
      if (last) {
        step.next_state = std::nullopt;  // end of data, episode incomplete
        cur.steps.push_back(std::move(step));
      } else {
        const long gap = days_between(rows[i]->date, rows[i + 1]->date);
        if (gap <= cfg.gap_days) {
          step.next_state = to_state(rows[i + 1]->aggression);
          cur.steps.push_back(std::move(step));
        } else {
          step.next_state = StateLabel::Tau;
          cur.steps.push_back(std::move(step));
          episodes.push_back(std::move(cur));
          cur = Episode{};
          cur.id = ++next_id;
          cur.client_id = client;
        }
      }
    }
    if (!cur.steps.empty()) episodes.push_back(std::move(cur));
    ++next_id;
  }
  return episodes;
}

struct FilterOutcome {
  std::vector<Episode> kept;
  std::size_t dropped = 0;
};

namespace detail {
template <typename Pred>
FilterOutcome keep_if(std::vector<Episode> episodes, Pred keep) {
  FilterOutcome out;
  out.kept.reserve(episodes.size());
  for (auto& ep : episodes) {
    if (keep(ep))
      out.kept.push_back(std::move(ep));
    else
      ++out.dropped;
  }
  return out;
}

inline bool mentions_preventive(const Episode& ep) {
  for (const auto& s : ep.steps) {
    if (s.action == Measure::PreventiveMeasures) return true;
    for (Measure m : s.measures)
      if (m == Measure::PreventiveMeasures) return true;
  }
  return false;
}
}  // namespace detail

inline FilterOutcome filter_incomplete(std::vector<Episode> episodes) {
  return detail::keep_if(std::move(episodes), [](const Episode& ep) { return ep.complete(); });
}

// Episode-level removal: one unreported measures cell poisons the whole
// episode.
inline FilterOutcome filter_missing_measures(std::vector<Episode> episodes) {
  return detail::keep_if(std::move(episodes), [](const Episode& ep) {
    return std::none_of(ep.steps.begin(), ep.steps.end(),
                        [](const EnrichedIncident& s) { return s.measures.empty(); });
  });
}

inline FilterOutcome filter_preventive(std::vector<Episode> episodes) {
  return detail::keep_if(std::move(episodes),
                         [](const Episode& ep) { return !detail::mentions_preventive(ep); });
}

inline FilterOutcome filter_min_length(std::vector<Episode> episodes, std::size_t k) {
  return detail::keep_if(std::move(episodes),
                         [k](const Episode& ep) { return ep.length() >= k; });
}

using MeasureFrequencies = std::array<std::size_t, kNumMeasures>;
using StateMeasureFrequencies = std::array<std::array<std::size_t, kNumMeasures>, kNumAggressions>;

// Every occurrence in every incident's measure list counts once.
inline MeasureFrequencies count_measure_frequencies(const std::vector<Episode>& episodes) {
  MeasureFrequencies f{};
  for (const auto& ep : episodes)
    for (const auto& s : ep.steps)
      for (Measure m : s.measures) f[static_cast<int>(m)]++;
  return f;
}

inline StateMeasureFrequencies count_state_measure_frequencies(
    const std::vector<Episode>& episodes) {
  StateMeasureFrequencies f{};
  for (const auto& ep : episodes)
    for (const auto& s : ep.steps)
      for (Measure m : s.measures) f[static_cast<int>(s.state)][static_cast<int>(m)]++;
  return f;
}

namespace detail {
inline Measure pick_most_frequent(const std::vector<Measure>& listed,
                                  const std::size_t* freq_by_measure) {
  Measure best = listed.front();
  std::size_t best_n = freq_by_measure[static_cast<int>(best)];
  for (Measure m : listed) {
    const std::size_t n = freq_by_measure[static_cast<int>(m)];
    // strict > keeps the earliest canonical measure on ties because `listed`
    // is scanned against the canonical comparison below
    if (n > best_n || (n == best_n && static_cast<int>(m) < static_cast<int>(best))) {
      best = m;
      best_n = n;
    }
  }
  return best;
}
}  // namespace detail

// Collapses each incident's measure list to the single most frequent measure.
// Pre: every incident lists at least one measure (missing-measures filter ran).
inline std::vector<Episode> resolve_measures(std::vector<Episode> episodes,
                                             const MeasureFrequencies& corpus_frequencies) {
  for (auto& ep : episodes)
    for (auto& s : ep.steps)
      if (!s.measures.empty())
        s.action = detail::pick_most_frequent(s.measures, corpus_frequencies.data());
  return episodes;
}

inline std::vector<Episode> resolve_measures_per_state(
    std::vector<Episode> episodes, const StateMeasureFrequencies& frequencies) {
  for (auto& ep : episodes)
    for (auto& s : ep.steps)
      if (!s.measures.empty())
        s.action = detail::pick_most_frequent(
            s.measures, frequencies[static_cast<int>(s.state)].data());
  return episodes;
}

// Stage-by-stage accounting, reported with every run so corpus reductions can
// be sanity-checked against expectations.
struct PreprocessSummary {
  std::size_t raw_incidents = 0;
  std::size_t segmented_episodes = 0;
  std::size_t incomplete_dropped = 0;
  std::size_t after_incomplete_episodes = 0;
  std::size_t after_incomplete_incidents = 0;
  std::size_t missing_dropped = 0;
  std::size_t after_missing_episodes = 0;
  std::size_t after_missing_incidents = 0;
  std::size_t preventive_dropped = 0;
  std::size_t after_preventive_episodes = 0;
  std::size_t after_preventive_incidents = 0;
  std::size_t short_dropped = 0;
  std::size_t final_episodes = 0;
  std::size_t final_incidents = 0;

  std::string render() const {
    std::ostringstream os;
    os << "raw incidents:                " << raw_incidents << '\n'
       << "segmented episodes:           " << segmented_episodes << '\n'
       << "dropped incomplete:           " << incomplete_dropped << "  -> " << after_incomplete_episodes
       << " episodes / " << after_incomplete_incidents << " incidents\n"
       << "dropped missing measures:     " << missing_dropped << "  -> " << after_missing_episodes
       << " episodes / " << after_missing_incidents << " incidents\n"
       << "dropped preventive measures:  " << preventive_dropped << "  -> " << after_preventive_episodes
       << " episodes / " << after_preventive_incidents << " incidents\n"
       << "dropped shorter than minimum: " << short_dropped << "  -> " << final_episodes
       << " episodes / " << final_incidents << " incidents\n";
    return os.str();
  }
};

struct PreprocessOutput {
  std::vector<Episode> episodes;
  PreprocessSummary summary;
};

inline std::size_t count_incidents(const std::vector<Episode>& eps) {
  std::size_t n = 0;
  for (const auto& ep : eps) n += ep.length();
  return n;
}

// Full pipeline: segment -> drop incomplete -> drop missing-measures ->
// (corpus frequencies here) -> drop preventive -> resolve multi-measure
// incidents -> minimum-length cut.
inline PreprocessOutput run_preprocess(const EventLog& log, const SegmentationConfig& cfg = {},
                                       ResolveMode mode = ResolveMode::CorpusGlobal) {
  PreprocessOutput out;
  out.summary.raw_incidents = log.incidents.size();

  auto episodes = enrich_and_segment(log, cfg);
  out.summary.segmented_episodes = episodes.size();

  auto complete = filter_incomplete(std::move(episodes));
  out.summary.incomplete_dropped = complete.dropped;
  out.summary.after_incomplete_episodes = complete.kept.size();
  out.summary.after_incomplete_incidents = count_incidents(complete.kept);

  auto with_measures = filter_missing_measures(std::move(complete.kept));
  out.summary.missing_dropped = with_measures.dropped;
  out.summary.after_missing_episodes = with_measures.kept.size();
  out.summary.after_missing_incidents = count_incidents(with_measures.kept);

  const auto corpus_freq = count_measure_frequencies(with_measures.kept);
  const auto state_freq = count_state_measure_frequencies(with_measures.kept);

  auto cleaned = filter_preventive(std::move(with_measures.kept));
  out.summary.preventive_dropped = cleaned.dropped;
  out.summary.after_preventive_episodes = cleaned.kept.size();
  out.summary.after_preventive_incidents = count_incidents(cleaned.kept);

  auto resolved = mode == ResolveMode::CorpusGlobal
                      ? resolve_measures(std::move(cleaned.kept), corpus_freq)
                      : resolve_measures_per_state(std::move(cleaned.kept), state_freq);

  auto sized = filter_min_length(std::move(resolved),
                                 static_cast<std::size_t>(cfg.min_episode_length));
  out.summary.short_dropped = sized.dropped;
  out.summary.final_episodes = sized.kept.size();
  out.summary.final_incidents = count_incidents(sized.kept);
  out.episodes = std::move(sized.kept);
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessed-episode file: one row per incident with the enriched columns.

inline void write_episodes(const std::vector<Episode>& episodes, std::ostream& out,
                           char delimiter = ',') {
  const char d = delimiter;
  out << "client_id" << d << "aggression_type" << d << "measure" << d << "next_aggression_type"
      << d << "episode_id\n";
  for (const auto& ep : episodes) {
    for (const auto& s : ep.steps) {
      out << ep.client_id << d << to_string(s.state) << d
          << (s.action ? to_string(*s.action) : "") << d
          << (s.next_state ? to_string(*s.next_state) : "") << d << ep.id << '\n';
    }
  }
}

inline std::vector<Episode> read_episodes(std::istream& in, char delimiter = ',') {
  std::vector<Episode> episodes;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      saw_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    const auto cells = detail::split(line, delimiter);
    if (cells.size() != 5)
      throw SchemaError("episodes line " + std::to_string(lineno) + ": expected 5 columns");
    const auto state = parse_state(cells[1]);
    const auto action = parse_measure(cells[2]);
    const auto next = parse_state(cells[3]);
    if (!state || *state == StateLabel::Tau)
      throw SchemaError("episodes line " + std::to_string(lineno) + ": bad state");
    if (!action)
      throw SchemaError("episodes line " + std::to_string(lineno) + ": bad measure");
    if (!next) throw SchemaError("episodes line " + std::to_string(lineno) + ": bad next state");
    std::uint32_t id = 0;
    try {
      id = static_cast<std::uint32_t>(std::stoul(std::string(trim(cells[4]))));
    } catch (const std::exception&) {
      throw SchemaError("episodes line " + std::to_string(lineno) + ": bad episode id");
    }

    if (episodes.empty() || episodes.back().id != id) {
      Episode ep;
      ep.id = id;
      ep.client_id = std::string(trim(cells[0]));
      episodes.push_back(std::move(ep));
    }
    EnrichedIncident step;
    step.state = *state;
    step.action = *action;
    step.measures = {*action};
    step.next_state = *next;
    episodes.back().steps.push_back(std::move(step));
  }
  for (const auto& ep : episodes)
    for (std::size_t i = 0; i + 1 < ep.steps.size(); ++i)
      if (ep.steps[i].next_state != std::optional<StateLabel>(ep.steps[i + 1].state))
        throw SchemaError("episode " + std::to_string(ep.id) + ": broken state chain");
  return episodes;
}

}  // namespace carerl
