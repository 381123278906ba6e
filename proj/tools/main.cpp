// Command-line front end: each subcommand wires the library stages together
// and drops a manifest next to whatever it writes.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <carerl/carerl.hpp>

namespace {

using namespace carerl;

int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n ? static_cast<int>(n) : 1;
}

// Tracks inputs and outputs of one run so the manifest can be assembled at
// the end. Digests cover the exact bytes read or written.
struct ArtifactSink {
  RunManifest manifest;

  explicit ArtifactSink(std::string command) {
    manifest.command = std::move(command);
    manifest.started = iso_utc_now();
  }

  void param(const std::string& key, nlohmann::ordered_json value) {
    manifest.parameters[key] = std::move(value);
  }

  std::string read_input(const std::string& path) {
    std::string bytes = read_text_file(path);
    manifest.inputs.emplace_back(path, digest_hex(fnv1a64(bytes)));
    return bytes;
  }

  void write_output(const std::string& path, const std::string& bytes) {
    write_text_file(path, bytes);
    manifest.outputs.emplace_back(path, digest_hex(fnv1a64(bytes)));
  }

  void finish(const std::string& manifest_path) {
    write_text_file(manifest_path, serialize_manifest(manifest));
  }
};

EventLog parse_or_fail(const std::string& path, const std::string& bytes,
                       const LogFormatConfig& fmt, bool lenient) {
  std::istringstream in(bytes);
  auto parsed = parse_log(in, fmt, path);
  for (const auto& d : parsed.diagnostics) std::cerr << d.render() << '\n';
  if (!lenient && parsed.error_count() > 0)
    throw SchemaError(path + ": " + std::to_string(parsed.error_count()) +
                      " malformed rows (pass --lenient to skip them)");
  return std::move(parsed.log);
}

DateFormat parse_date_format(const std::string& name) {
  if (name == "auto") return DateFormat::Auto;
  if (name == "iso") return DateFormat::Iso8601;
  return DateFormat::DayMonthYear;
}

ResolveMode parse_resolve_mode(const std::string& name) {
  return name == "per-state" ? ResolveMode::PerState : ResolveMode::CorpusGlobal;
}

std::string render_transition_audit(const TransitionCounts& counts, const Mdp& mdp) {
  TextTable t({"state", "action", "next", "count", "probability"});
  for (int s = 0; s < kNumAggressions; ++s) {
    for (int a = 0; a < kNumActions; ++a) {
      if (!mdp.available[s][a]) continue;
      for (int ns = 0; ns < kNumStates; ++ns) {
        if (counts.count[s][a][ns] == 0) continue;
        t.add_row({std::string(kStateNames[s]),
                   std::string(kMeasureNames[a]),
                   std::string(kStateNames[ns]),
                   std::to_string(counts.count[s][a][ns]),
                   format_fixed(mdp.prob[s][a][ns], 4)});
      }
    }
  }
  return t.render();
}

std::string serialize_episodes(const std::vector<Episode>& episodes) {
  std::ostringstream os;
  write_episodes(episodes, os);
  return os.str();
}

std::string serialize_samples(const RewardSample& sample) {
  std::ostringstream os;
  write_samples_csv(os, sample);
  return os.str();
}

std::string serialize_variants(const RewardSample& sample) {
  std::ostringstream os;
  write_variants_csv(os, sample);
  return os.str();
}

std::vector<Episode> load_episodes(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_episodes(in);
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessArgs {
  std::string input, output, summary_path;
  int gap_days = 9;
  int min_length = 1;
  std::string resolve = "corpus";
  std::string date_format = "auto";
  bool lenient = false;
};

void cmd_preprocess(const PreprocessArgs& a) {
  ArtifactSink sink("preprocess");
  sink.param("input", a.input);
  sink.param("output", a.output);
  sink.param("gap-days", a.gap_days);
  sink.param("min-length", a.min_length);
  sink.param("resolve", a.resolve);
  sink.param("date-format", a.date_format);
  sink.param("lenient", a.lenient);
  if (!a.summary_path.empty()) sink.param("summary", a.summary_path);

  LogFormatConfig fmt;
  fmt.date_format = parse_date_format(a.date_format);
  const auto log = parse_or_fail(a.input, sink.read_input(a.input), fmt, a.lenient);

  SegmentationConfig cfg;
  cfg.gap_days = a.gap_days;
  cfg.min_episode_length = a.min_length;
  auto result = run_preprocess(log, cfg, parse_resolve_mode(a.resolve));

  sink.write_output(a.output, serialize_episodes(result.episodes));
  const std::string summary = result.summary.render();
  if (!a.summary_path.empty()) sink.write_output(a.summary_path, summary);
  std::cout << summary;
  sink.finish(a.output + ".manifest.json");
}

// ---------------------------------------------------------------------------
// build-mdp

struct BuildMdpArgs {
  std::string episodes, output, audit_path;
};

void cmd_build_mdp(const BuildMdpArgs& a) {
  ArtifactSink sink("build-mdp");
  sink.param("episodes", a.episodes);
  sink.param("output", a.output);
  if (!a.audit_path.empty()) sink.param("audit", a.audit_path);

  const auto episodes = load_episodes(sink.read_input(a.episodes));
  const auto counts = count_transitions(episodes);
  const auto mdp = estimate_mdp(counts, episodes);

  sink.write_output(a.output, serialize_mdp(mdp));
  const std::string audit = render_transition_audit(counts, mdp);
  if (!a.audit_path.empty()) sink.write_output(a.audit_path, audit);
  std::cout << audit;
  sink.finish(a.output + ".manifest.json");
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string mdp, algo, output;
  Hyperparams hp;
  std::uint64_t episodes = 2000;
  std::uint64_t seed = 0;
  std::uint64_t max_steps = 1000;
};

void cmd_train(const TrainArgs& a) {
  ArtifactSink sink("train");
  sink.param("mdp", a.mdp);
  sink.param("algo", a.algo);
  sink.param("alpha", a.hp.alpha);
  sink.param("gamma", a.hp.gamma);
  sink.param("epsilon", a.hp.epsilon);
  sink.param("episodes", a.episodes);
  sink.param("seed", a.seed);
  sink.param("max-steps", a.max_steps);
  sink.param("output", a.output);
  sink.manifest.seed = a.seed;

  const auto mdp = deserialize_mdp(sink.read_input(a.mdp));
  const Algo algo = *parse_algo(a.algo);
  const auto result = train(mdp, algo, a.hp, a.episodes, a.seed, a.max_steps);

  sink.write_output(a.output, serialize_qtable(result.table));
  std::cout << to_string(algo) << ": " << result.report.episodes << " episodes, "
            << result.report.steps << " steps, " << result.report.truncated_episodes
            << " truncated\n";
  sink.finish(a.output + ".manifest.json");
}

// ---------------------------------------------------------------------------
// tune

struct TuneArgs {
  std::string mdp, algo, output, trace_path, qtable_path;
  std::vector<double> gamma_grid, epsilon_grid, alpha_grid;
  std::uint64_t reps = 10;
  std::uint64_t train_episodes = 2000;
  std::uint64_t eval_runs = 100;
  std::uint64_t eval_episodes = 2000;
  std::uint64_t max_steps = 1000;
  std::uint64_t seed = 0;
  int threads = default_threads();
  bool exploring_eval = false;
};

void cmd_tune(const TuneArgs& a) {
  ArtifactSink sink("tune");
  sink.param("mdp", a.mdp);
  sink.param("algo", a.algo);
  sink.param("reps", a.reps);
  sink.param("train-episodes", a.train_episodes);
  sink.param("eval-runs", a.eval_runs);
  sink.param("eval-episodes", a.eval_episodes);
  sink.param("max-steps", a.max_steps);
  sink.param("seed", a.seed);
  sink.param("threads", a.threads);
  sink.param("exploring-eval", a.exploring_eval);
  sink.param("output", a.output);
  sink.manifest.seed = a.seed;

  const auto mdp = deserialize_mdp(sink.read_input(a.mdp));
  const Algo algo = *parse_algo(a.algo);

  TuneConfig cfg;
  if (!a.gamma_grid.empty()) cfg.gamma_grid = a.gamma_grid;
  if (!a.epsilon_grid.empty()) cfg.epsilon_grid = a.epsilon_grid;
  if (!a.alpha_grid.empty()) cfg.alpha_grid = a.alpha_grid;
  sink.param("gamma-grid", cfg.gamma_grid);
  sink.param("epsilon-grid", cfg.epsilon_grid);
  sink.param("alpha-grid", cfg.alpha_grid);
  cfg.reps = a.reps;
  cfg.train_episodes = a.train_episodes;
  cfg.eval_runs = a.eval_runs;
  cfg.eval_episodes = a.eval_episodes;
  cfg.max_steps = a.max_steps;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.greedy_eval = !a.exploring_eval;

  const auto result = grid_search(mdp, algo, cfg);
  const std::string trace = render_tune_trace(result, algo);

  sink.write_output(a.output, hyperparams_to_json(result.best, algo, result.best_score).dump(2) + "\n");
  if (!a.trace_path.empty()) sink.write_output(a.trace_path, trace);
  if (!a.qtable_path.empty()) sink.write_output(a.qtable_path, serialize_qtable(result.best_table));
  std::cout << trace;
  sink.finish(a.output + ".manifest.json");
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string mdp, policy, qtable, episodes_path, name, out_prefix;
  std::uint64_t runs = 10000;
  std::uint64_t episodes_per_run = 100;
  std::uint64_t seed = 0;
  std::uint64_t max_steps = 1000;
  std::uint64_t top_k = 10;
  double epsilon = 0;
  int threads = default_threads();
  bool per_episode = false;
};

Policy make_policy(const EvaluateArgs& a, const Mdp& mdp, ArtifactSink& sink) {
  (void)mdp;
  if (a.policy == "random") return Policy::random();
  if (a.policy == "frequent") {
    if (a.episodes_path.empty())
      throw SchemaError("--policy frequent needs --episodes <preprocessed file>");
    return most_frequent_policy(load_episodes(sink.read_input(a.episodes_path)));
  }
  if (a.qtable.empty()) throw SchemaError("--policy qtable needs --qtable <file>");
  const auto table = deserialize_qtable(sink.read_input(a.qtable));
  const std::string name = a.name.empty() ? "qtable" : a.name;
  if (a.epsilon > 0) return Policy::exploring(name, table, a.epsilon);
  return Policy::greedy(name, table);
}

void cmd_evaluate(const EvaluateArgs& a) {
  ArtifactSink sink("evaluate");
  sink.param("mdp", a.mdp);
  sink.param("policy", a.policy);
  if (!a.qtable.empty()) sink.param("qtable", a.qtable);
  if (!a.episodes_path.empty()) sink.param("episodes", a.episodes_path);
  sink.param("runs", a.runs);
  sink.param("episodes-per-run", a.episodes_per_run);
  sink.param("seed", a.seed);
  sink.param("max-steps", a.max_steps);
  sink.param("top-k", a.top_k);
  sink.param("epsilon", a.epsilon);
  sink.param("threads", a.threads);
  sink.param("per-episode", a.per_episode);
  if (!a.name.empty()) sink.param("name", a.name);
  if (!a.out_prefix.empty()) sink.param("out-prefix", a.out_prefix);
  sink.manifest.seed = a.seed;

  const auto mdp = deserialize_mdp(sink.read_input(a.mdp));
  Policy policy = make_policy(a, mdp, sink);
  if (!a.name.empty()) policy.name = a.name;

  RolloutConfig cfg;
  cfg.n_runs = a.runs;
  cfg.episodes_per_run = a.episodes_per_run;
  cfg.seed = a.seed;
  cfg.max_steps = a.max_steps;
  cfg.threads = a.threads;
  cfg.collect_variants = true;
  cfg.per_episode_values = a.per_episode;
  const auto sample = rollout(mdp, policy, cfg);

  std::string report = render_policy_table({sample});
  report += "\nmost frequent episode variants: " + sample.policy_name + "\n\n";
  report += render_variants_table(sample, a.top_k);

  std::cout << report;
  if (!a.out_prefix.empty()) {
    sink.write_output(a.out_prefix + ".samples.csv", serialize_samples(sample));
    sink.write_output(a.out_prefix + ".variants.csv", serialize_variants(sample));
    sink.write_output(a.out_prefix + ".report.txt", report);
    sink.finish(a.out_prefix + ".manifest.json");
  }
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
  std::vector<std::string> samples;
  std::string output;
  double alpha = 0.05;
};

std::string render_comparison(const std::vector<RewardSample>& samples, double alpha) {
  std::vector<std::vector<double>> groups;
  std::vector<std::string> names;
  for (const auto& s : samples) {
    groups.push_back(s.values);
    names.push_back(s.policy_name);
  }
  std::string out = render_policy_table(samples);
  out += "\n" + render_anova(one_way_anova(groups));
  out += "\n" + render_tukey(tukey_hsd(groups, alpha), names);
  return out;
}

void cmd_compare(const CompareArgs& a) {
  ArtifactSink sink("compare");
  sink.param("samples", a.samples);
  sink.param("alpha", a.alpha);
  if (!a.output.empty()) sink.param("output", a.output);

  std::vector<RewardSample> samples;
  for (const auto& path : a.samples) {
    std::istringstream in(sink.read_input(path));
    samples.push_back(read_samples_csv(in));
  }

  const std::string text = render_comparison(samples, a.alpha);
  std::cout << text;
  if (!a.output.empty()) {
    sink.write_output(a.output, text);
    sink.finish(a.output + ".manifest.json");
  }
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> samples;
  std::vector<std::string> variants;
  std::string output;
  std::uint64_t top_k = 10;
  double alpha = 0.05;
};

void cmd_report(const ReportArgs& a) {
  ArtifactSink sink("report");
  sink.param("samples", a.samples);
  sink.param("variants", a.variants);
  sink.param("top-k", a.top_k);
  sink.param("alpha", a.alpha);
  if (!a.output.empty()) sink.param("output", a.output);

  if (!a.variants.empty() && a.variants.size() != a.samples.size())
    throw SchemaError("--variants needs one file per --samples file, in the same order");

  std::vector<RewardSample> samples;
  for (const auto& path : a.samples) {
    std::istringstream in(sink.read_input(path));
    samples.push_back(read_samples_csv(in));
  }

  std::string text = "policy performance\n\n" + render_policy_table(samples);
  if (samples.size() >= 2) {
    std::vector<std::vector<double>> groups;
    std::vector<std::string> names;
    for (const auto& s : samples) {
      groups.push_back(s.values);
      names.push_back(s.policy_name);
    }
    text += "\n" + render_anova(one_way_anova(groups));
    text += "\n" + render_tukey(tukey_hsd(groups, a.alpha), names);
  }
  for (std::size_t i = 0; i < a.variants.size(); ++i) {
    std::istringstream in(sink.read_input(a.variants[i]));
    RewardSample shim;
    shim.policy_name = samples[i].policy_name;
    for (const auto& v : read_variants_csv(in)) shim.variants[v.path] = v.count;
    text += "\nmost frequent episode variants: " + shim.policy_name + "\n\n";
    text += render_variants_table(shim, a.top_k);
  }

  std::cout << text;
  if (!a.output.empty()) {
    sink.write_output(a.output, text);
    sink.finish(a.output + ".manifest.json");
  }
}

// ---------------------------------------------------------------------------
// synth-gen

struct SynthArgs {
  std::string config, out, truth, mdp_out;
  std::uint64_t inject_bad = 0;
  bool shuffle = false;
};

void cmd_synth_gen(const SynthArgs& a) {
  ArtifactSink sink("synth-gen");
  sink.param("config", a.config);
  sink.param("out", a.out);
  sink.param("truth", a.truth);
  if (!a.mdp_out.empty()) sink.param("mdp-out", a.mdp_out);
  sink.param("shuffle", a.shuffle);
  sink.param("inject-bad", a.inject_bad);

  const auto spec = deserialize_generator_spec(sink.read_input(a.config));
  sink.manifest.seed = spec.config.seed;
  const auto result = generate_log(spec.mdp, spec.config);

  std::ostringstream os;
  serialize_log(result.log, os);
  std::string text = os.str();
  if (a.shuffle) text = shuffle_rows(text, derive_seed(spec.config.seed, {901}));
  if (a.inject_bad > 0)
    text = inject_bad_rows(text, a.inject_bad, derive_seed(spec.config.seed, {902}));

  sink.write_output(a.out, text);
  sink.write_output(a.truth, serialize_ground_truth(result.truth));
  if (!a.mdp_out.empty()) sink.write_output(a.mdp_out, serialize_mdp(spec.mdp));
  std::cout << "generated " << result.truth.incidents << " incidents over "
            << result.truth.clients << " clients (" << result.truth.episodes << " episodes)\n";
  sink.finish(a.out + ".manifest.json");
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineArgs {
  std::string log, outdir = "pipeline-out";
  std::string resolve = "corpus";
  std::string date_format = "auto";
  int gap_days = 9;
  std::uint64_t seed = 0;
  std::uint64_t reps = 10;
  std::uint64_t train_episodes = 2000;
  std::uint64_t eval_runs = 100;
  std::uint64_t eval_episodes = 2000;
  std::uint64_t runs = 10000;
  std::uint64_t episodes_per_run = 100;
  std::uint64_t max_steps = 1000;
  std::uint64_t top_k = 10;
  double alpha = 0.05;
  int threads = default_threads();
  bool lenient = false;
};

// One corpus (full or length-filtered) through estimate, tune, train and the
// four-policy evaluation. corpus_tag keeps the seed streams of the two
// corpora apart.
void run_corpus(const PipelineArgs& a, ArtifactSink& sink, const PreprocessOutput& pre,
                const std::string& dir, std::uint64_t corpus_tag) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto path = [&dir](const std::string& name) { return dir + "/" + name; };

  sink.write_output(path("episodes.csv"), serialize_episodes(pre.episodes));
  sink.write_output(path("summary.txt"), pre.summary.render());

  const auto counts = count_transitions(pre.episodes);
  const auto mdp = estimate_mdp(counts, pre.episodes);
  sink.write_output(path("mdp.json"), serialize_mdp(mdp));
  sink.write_output(path("audit.txt"), render_transition_audit(counts, mdp));

  std::string combined = "pipeline report\n===============\n\npreprocessing\n\n";
  combined += pre.summary.render();

  std::vector<Policy> policies = {Policy::random(), most_frequent_policy(pre.episodes)};
  for (const Algo algo : {Algo::QLearning, Algo::Sarsa}) {
    const auto tag = static_cast<std::uint64_t>(algo);
    TuneConfig cfg;
    cfg.reps = a.reps;
    cfg.train_episodes = a.train_episodes;
    cfg.eval_runs = a.eval_runs;
    cfg.eval_episodes = a.eval_episodes;
    cfg.max_steps = a.max_steps;
    cfg.seed = derive_seed(a.seed, {corpus_tag, 1, tag});
    cfg.threads = a.threads;
    const auto tuned = grid_search(mdp, algo, cfg);
    const std::string stem = std::string(to_string(algo));
    sink.write_output(path("tune-" + stem + ".json"),
                      hyperparams_to_json(tuned.best, algo, tuned.best_score).dump(2) + "\n");
    sink.write_output(path("tune-" + stem + ".txt"), render_tune_trace(tuned, algo));
    combined += "\n" + render_tune_trace(tuned, algo);

    const auto trained = train(mdp, algo, tuned.best, a.train_episodes,
                               derive_seed(a.seed, {corpus_tag, 2, tag}), a.max_steps);
    sink.write_output(path("qtable-" + stem + ".json"), serialize_qtable(trained.table));
    policies.push_back(Policy::greedy(stem, trained.table));
  }

  std::vector<RewardSample> samples;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    RolloutConfig cfg;
    cfg.n_runs = a.runs;
    cfg.episodes_per_run = a.episodes_per_run;
    cfg.seed = derive_seed(a.seed, {corpus_tag, 3, i});
    cfg.max_steps = a.max_steps;
    cfg.threads = a.threads;
    cfg.collect_variants = true;
    samples.push_back(rollout(mdp, policies[i], cfg));
    const std::string stem = policies[i].name;
    sink.write_output(path("samples-" + stem + ".csv"), serialize_samples(samples.back()));
    sink.write_output(path("variants-" + stem + ".csv"), serialize_variants(samples.back()));
  }

  combined += "\npolicy performance\n\n" + render_policy_table(samples);
  {
    std::vector<std::vector<double>> groups;
    std::vector<std::string> names;
    for (const auto& s : samples) {
      groups.push_back(s.values);
      names.push_back(s.policy_name);
    }
    combined += "\n" + render_anova(one_way_anova(groups));
    combined += "\n" + render_tukey(tukey_hsd(groups, a.alpha), names);
  }
  for (const auto& s : samples) {
    combined += "\nmost frequent episode variants: " + s.policy_name + "\n\n";
    combined += render_variants_table(s, a.top_k);
  }
  sink.write_output(path("report.txt"), combined);
}

void cmd_pipeline(const PipelineArgs& a) {
  ArtifactSink sink("pipeline");
  sink.param("log", a.log);
  sink.param("outdir", a.outdir);
  sink.param("resolve", a.resolve);
  sink.param("date-format", a.date_format);
  sink.param("gap-days", a.gap_days);
  sink.param("seed", a.seed);
  sink.param("reps", a.reps);
  sink.param("train-episodes", a.train_episodes);
  sink.param("eval-runs", a.eval_runs);
  sink.param("eval-episodes", a.eval_episodes);
  sink.param("runs", a.runs);
  sink.param("episodes-per-run", a.episodes_per_run);
  sink.param("max-steps", a.max_steps);
  sink.param("top-k", a.top_k);
  sink.param("alpha", a.alpha);
  sink.param("threads", a.threads);
  sink.param("lenient", a.lenient);
  sink.manifest.seed = a.seed;

  LogFormatConfig fmt;
  fmt.date_format = parse_date_format(a.date_format);
  const auto log = parse_or_fail(a.log, sink.read_input(a.log), fmt, a.lenient);

  std::filesystem::create_directories(a.outdir);
  const ResolveMode mode = parse_resolve_mode(a.resolve);

  SegmentationConfig full_cfg;
  full_cfg.gap_days = a.gap_days;
  run_corpus(a, sink, run_preprocess(log, full_cfg, mode), a.outdir + "/full", 0);

  SegmentationConfig subset_cfg;
  subset_cfg.gap_days = a.gap_days;
  subset_cfg.min_episode_length = 3;
  run_corpus(a, sink, run_preprocess(log, subset_cfg, mode), a.outdir + "/min3", 1);

  std::cout << "pipeline artifacts in " << a.outdir << "\n";
  sink.finish(a.outdir + "/manifest.json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aggression-incident decision pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(carerl::kVersion));
  app.failure_message(CLI::FailureMessage::help);

  PreprocessArgs pre;
  auto* sp = app.add_subcommand("preprocess",
                                "segment an incident log into episodes and clean it");
  sp->add_option("--input", pre.input, "raw incident log")->required();
  sp->add_option("--output", pre.output, "preprocessed episode file")->required();
  sp->add_option("--gap-days", pre.gap_days, "max days between incidents of one episode")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sp->add_option("--min-length", pre.min_length, "drop episodes shorter than this")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sp->add_option("--resolve", pre.resolve, "multi-measure resolution frequency table")
      ->check(CLI::IsMember({"corpus", "per-state"}))
      ->capture_default_str();
  sp->add_option("--date-format", pre.date_format, "date column format")
      ->check(CLI::IsMember({"auto", "iso", "dmy"}))
      ->capture_default_str();
  sp->add_option("--summary", pre.summary_path, "also write the drop-count summary here");
  sp->add_flag("--lenient", pre.lenient, "skip malformed rows instead of failing");
  sp->callback([&pre] { cmd_preprocess(pre); });

  BuildMdpArgs bm;
  auto* sb = app.add_subcommand("build-mdp", "estimate transition probabilities from episodes");
  sb->add_option("--episodes", bm.episodes, "preprocessed episode file")->required();
  sb->add_option("--output", bm.output, "model file to write")->required();
  sb->add_option("--audit", bm.audit_path, "also write the transition-count table here");
  sb->callback([&bm] { cmd_build_mdp(bm); });

  TrainArgs tr;
  auto* st = app.add_subcommand("train", "train an agent on an estimated model");
  st->add_option("--mdp", tr.mdp, "model file")->required();
  st->add_option("--algo", tr.algo, "learning algorithm")
      ->required()
      ->check(CLI::IsMember({"qlearning", "q-learning", "sarsa"}));
  st->add_option("--alpha", tr.hp.alpha, "learning rate")->capture_default_str();
  st->add_option("--gamma", tr.hp.gamma, "discount factor")->capture_default_str();
  st->add_option("--epsilon", tr.hp.epsilon, "exploration rate")->capture_default_str();
  st->add_option("--episodes", tr.episodes, "training episodes")->capture_default_str();
  st->add_option("--seed", tr.seed, "random seed")->capture_default_str();
  st->add_option("--max-steps", tr.max_steps, "per-episode step cap")->capture_default_str();
  st->add_option("--output", tr.output, "learned value table file")->required();
  st->callback([&tr] { cmd_train(tr); });

  TuneArgs tu;
  auto* su = app.add_subcommand("tune", "sequential grid search over gamma, epsilon, alpha");
  su->add_option("--mdp", tu.mdp, "model file")->required();
  su->add_option("--algo", tu.algo, "learning algorithm")
      ->required()
      ->check(CLI::IsMember({"qlearning", "q-learning", "sarsa"}));
  su->add_option("--gamma-grid", tu.gamma_grid, "discount candidates")->delimiter(',');
  su->add_option("--epsilon-grid", tu.epsilon_grid, "exploration candidates")->delimiter(',');
  su->add_option("--alpha-grid", tu.alpha_grid, "learning-rate candidates")->delimiter(',');
  su->add_option("--reps", tu.reps, "training repetitions per candidate")->capture_default_str();
  su->add_option("--train-episodes", tu.train_episodes, "episodes per repetition")
      ->capture_default_str();
  su->add_option("--eval-runs", tu.eval_runs, "evaluation runs per repetition")
      ->capture_default_str();
  su->add_option("--eval-episodes", tu.eval_episodes, "episodes per evaluation run")
      ->capture_default_str();
  su->add_option("--max-steps", tu.max_steps, "per-episode step cap")->capture_default_str();
  su->add_option("--seed", tu.seed, "random seed")->capture_default_str();
  su->add_option("--threads", tu.threads, "worker cap")
      ->envname("CARERL_THREADS")
      ->capture_default_str();
  su->add_flag("--exploring-eval", tu.exploring_eval,
               "evaluate candidates with their exploration rate instead of greedily");
  su->add_option("--output", tu.output, "chosen hyperparameters file")->required();
  su->add_option("--trace", tu.trace_path, "also write the search trace here");
  su->add_option("--qtable-out", tu.qtable_path,
                 "also write the best repetition's value table");
  su->callback([&tu] { cmd_tune(tu); });

  EvaluateArgs ev;
  auto* se = app.add_subcommand("evaluate", "simulate a policy on an estimated model");
  se->add_option("--mdp", ev.mdp, "model file")->required();
  se->add_option("--policy", ev.policy, "policy to run")
      ->required()
      ->check(CLI::IsMember({"random", "frequent", "qtable"}));
  se->add_option("--qtable", ev.qtable, "value table file, for --policy qtable");
  se->add_option("--episodes", ev.episodes_path,
                 "preprocessed episode file, for --policy frequent");
  se->add_option("--runs", ev.runs, "independent simulation runs")->capture_default_str();
  se->add_option("--episodes-per-run", ev.episodes_per_run, "episodes per run")
      ->capture_default_str();
  se->add_option("--seed", ev.seed, "random seed")->capture_default_str();
  se->add_option("--max-steps", ev.max_steps, "per-episode step cap")->capture_default_str();
  se->add_option("--top-k", ev.top_k, "variants to list")->capture_default_str();
  se->add_option("--epsilon", ev.epsilon, "evaluate with this exploration rate")
      ->capture_default_str();
  se->add_option("--threads", ev.threads, "worker cap")
      ->envname("CARERL_THREADS")
      ->capture_default_str();
  se->add_flag("--per-episode", ev.per_episode,
               "record one value per episode instead of per-run means");
  se->add_option("--name", ev.name, "policy label in outputs");
  se->add_option("--out-prefix", ev.out_prefix,
                 "write <prefix>.samples.csv, .variants.csv and .report.txt");
  se->callback([&ev] { cmd_evaluate(ev); });

  CompareArgs cp;
  auto* sc = app.add_subcommand("compare", "variance analysis across reward samples");
  sc->add_option("samples", cp.samples, "two or more sample files")
      ->required()
      ->expected(2, -1);
  sc->add_option("--alpha", cp.alpha, "family-wise significance level")->capture_default_str();
  sc->add_option("--output", cp.output, "write the comparison here as well");
  sc->callback([&cp] { cmd_compare(cp); });

  ReportArgs rp;
  auto* sr = app.add_subcommand("report", "combined text report from saved outputs");
  sr->add_option("--samples", rp.samples, "sample files")
      ->required()
      ->expected(1, -1);
  sr->add_option("--variants", rp.variants, "variant files, one per sample file")
      ->expected(1, -1);
  sr->add_option("--top-k", rp.top_k, "variants to list per policy")->capture_default_str();
  sr->add_option("--alpha", rp.alpha, "family-wise significance level")->capture_default_str();
  sr->add_option("--output", rp.output, "write the report here as well");
  sr->callback([&rp] { cmd_report(rp); });

  SynthArgs sy;
  auto* ss = app.add_subcommand("synth-gen", "generate a synthetic incident log");
  ss->add_option("--config", sy.config, "generator configuration")->required();
  ss->add_option("--out", sy.out, "log file to write")->required();
  ss->add_option("--truth", sy.truth, "ground-truth file to write")->required();
  ss->add_option("--mdp-out", sy.mdp_out, "also write the true model here");
  ss->add_flag("--shuffle", sy.shuffle, "shuffle data rows before writing");
  ss->add_option("--inject-bad", sy.inject_bad, "insert this many malformed rows")
      ->capture_default_str();
  ss->callback([&sy] { cmd_synth_gen(sy); });

  PipelineArgs pl;
  auto* sl = app.add_subcommand("pipeline", "full chain from raw log to comparison report");
  sl->add_option("--log", pl.log, "raw incident log")->required();
  sl->add_option("--outdir", pl.outdir, "artifact directory")->capture_default_str();
  sl->add_option("--resolve", pl.resolve, "multi-measure resolution frequency table")
      ->check(CLI::IsMember({"corpus", "per-state"}))
      ->capture_default_str();
  sl->add_option("--date-format", pl.date_format, "date column format")
      ->check(CLI::IsMember({"auto", "iso", "dmy"}))
      ->capture_default_str();
  sl->add_option("--gap-days", pl.gap_days, "max days between incidents of one episode")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sl->add_option("--seed", pl.seed, "random seed")->capture_default_str();
  sl->add_option("--reps", pl.reps, "tuning repetitions per candidate")->capture_default_str();
  sl->add_option("--train-episodes", pl.train_episodes, "training episodes")
      ->capture_default_str();
  sl->add_option("--eval-runs", pl.eval_runs, "tuning evaluation runs")->capture_default_str();
  sl->add_option("--eval-episodes", pl.eval_episodes, "episodes per tuning evaluation run")
      ->capture_default_str();
  sl->add_option("--runs", pl.runs, "final evaluation runs")->capture_default_str();
  sl->add_option("--episodes-per-run", pl.episodes_per_run, "episodes per final run")
      ->capture_default_str();
  sl->add_option("--max-steps", pl.max_steps, "per-episode step cap")->capture_default_str();
  sl->add_option("--top-k", pl.top_k, "variants to list per policy")->capture_default_str();
  sl->add_option("--alpha", pl.alpha, "family-wise significance level")->capture_default_str();
  sl->add_option("--threads", pl.threads, "worker cap")
      ->envname("CARERL_THREADS")
      ->capture_default_str();
  sl->add_flag("--lenient", pl.lenient, "skip malformed rows instead of failing");
  sl->callback([&pl] { cmd_pipeline(pl); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
