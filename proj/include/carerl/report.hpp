#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "carerl/rollout.hpp"
#include "carerl/stats.hpp"
#include "carerl/tune.hpp"

namespace carerl {

// ---------------------------------------------------------------------------
// Small file helpers shared by the command-line tool and the tests.

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x00000100000001b3ull;
  }
  return h;
}

inline std::string digest_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Plain-text tables with padded columns.

class TextTable {
 public:
  explicit TextTable(std::vector<std::string> headers) : headers_(std::move(headers)) {}

  void add_row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

  std::string render() const {
    std::vector<std::size_t> width(headers_.size());
    for (std::size_t c = 0; c < headers_.size(); ++c) width[c] = headers_[c].size();
    for (const auto& row : rows_)
      for (std::size_t c = 0; c < row.size() && c < width.size(); ++c)
        width[c] = std::max(width[c], row[c].size());
    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
      for (std::size_t c = 0; c < width.size(); ++c) {
        const std::string& cell = c < row.size() ? row[c] : std::string();
        out += cell;
        if (c + 1 < width.size()) out.append(width[c] - cell.size() + 2, ' ');
      }
      out += "\n";
    };
    emit(headers_);
    std::vector<std::string> rule;
    for (std::size_t c = 0; c < width.size(); ++c) rule.push_back(std::string(width[c], '-'));
    emit(rule);
    for (const auto& row : rows_) emit(row);
    return out;
  }

 private:
  std::vector<std::string> headers_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Report sections.

inline std::string render_policy_table(const std::vector<RewardSample>& samples) {
  TextTable t({"policy", "mean episode reward", "runs", "episodes per run"});
  for (const auto& s : samples)
    t.add_row({s.policy_name, format_fixed(average_reward(s), 3), std::to_string(s.n_runs),
               std::to_string(s.episodes_per_run)});
  return t.render();
}

inline std::string render_tune_trace(const TuneResult& r, Algo algo) {
  std::string out = "hyperparameter search (" + std::string(to_string(algo)) + ")\n\n";
  TextTable t({"stage", "alpha", "gamma", "epsilon", "mean reward"});
  for (const auto& e : r.trace)
    t.add_row({e.stage, format_fixed(e.hp.alpha, 1), format_fixed(e.hp.gamma, 1),
               format_fixed(e.hp.epsilon, 1), format_fixed(e.score, 4)});
  out += t.render();
  out += "\nselected: alpha=" + format_fixed(r.best.alpha, 1) +
         " gamma=" + format_fixed(r.best.gamma, 1) +
         " epsilon=" + format_fixed(r.best.epsilon, 1) +
         " (mean reward " + format_fixed(r.best_score, 4) + ")\n";
  return out;
}

inline std::string render_anova(const AnovaResult& a) {
  std::string out = "one-way ANOVA\n";
  out += "  F(" + std::to_string(a.df_between) + ", " + std::to_string(a.df_within) +
         ") = " + format_fixed(a.f, 4) + ", p = " + format_fixed(a.p, 4) + "\n";
  out += "  between: SS = " + format_fixed(a.ss_between, 4) + ", within: SS = " +
         format_fixed(a.ss_within, 4) + "\n";
  return out;
}

inline std::string render_tukey(const TukeyResult& r, const std::vector<std::string>& names) {
  std::string out =
      "Tukey HSD, family-wise adjusted (alpha = " + format_fixed(r.alpha, 2) + ")\n\n";
  TextTable t({"group A", "group B", "mean diff", "q", "p-adj", "reject"});
  for (const auto& c : r.pairs)
    t.add_row({names.at(c.i), names.at(c.j), format_fixed(c.diff, 4), format_fixed(c.q, 4),
               format_fixed(c.p_adj, 4), c.reject ? "yes" : "no"});
  out += t.render();
  return out;
}

inline std::string render_variants_table(const RewardSample& sample, std::size_t k) {
  std::uint64_t total = 0;
  for (const auto& [path, n] : sample.variants) total += n;
  TextTable t({"rank", "count", "share", "trajectory"});
  std::size_t rank = 1;
  for (const auto& v : top_variants(sample, k)) {
    const double share = total ? 100.0 * static_cast<double>(v.count) /
                                     static_cast<double>(total)
                               : 0.0;
    t.add_row({std::to_string(rank++), std::to_string(v.count),
               format_fixed(share, 2) + "%", render_variant(v.path)});
  }
  return t.render();
}

inline std::string render_preprocess_summary(const PreprocessSummary& s) { return s.render(); }

// ---------------------------------------------------------------------------
// Run manifests record what a command read, wrote, and was asked to do. The
// timestamps make them the one output that varies between identical runs, so
// byte-level comparisons skip manifest files.

struct RunManifest {
  std::string command;
  std::string started;  // capture with iso_utc_now() when the command begins
  std::optional<std::uint64_t> seed;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;
};

inline std::string iso_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "carerl-manifest-v1";
  j["version"] = std::string(kVersion);
  j["command"] = m.command;
  if (m.seed)
    j["seed"] = *m.seed;
  else
    j["seed"] = nullptr;
  j["started"] = m.started.empty() ? iso_utc_now() : m.started;
  j["finished"] = iso_utc_now();
  j["parameters"] = m.parameters;
  nlohmann::ordered_json in(nlohmann::json::value_t::object),
      out(nlohmann::json::value_t::object);
  for (const auto& [path, digest] : m.inputs) in[path] = digest;
  for (const auto& [path, digest] : m.outputs) out[path] = digest;
  j["inputs"] = std::move(in);
  j["outputs"] = std::move(out);
  return j;
}

inline std::string serialize_manifest(const RunManifest& m) {
  return manifest_to_json(m).dump(2) + "\n";
}

}  // namespace carerl
