#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include "peeler/errors.hpp"
#include "peeler/eval.hpp"
#include "peeler/pipeline.hpp"
#include "peeler/synth.hpp"

namespace peeler {

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + path + "'");
}

Micros window_us(double ms) {
  if (!(ms > 0.0)) throw InvalidConfig("--window-ms must be positive");
  return static_cast<Micros>(ms * 1000.0);
}

RuleSet rules_from(const std::string& path) { return path.empty() ? default_rules() : load_rules_file(path); }

struct SynthArgs {
  std::string archetype;
  unsigned files = 20;
  std::uint64_t seed = 1;
  std::string out;
  std::string corpus;
  std::size_t count = 1;
  double duration_ms = 40'000;
  bool commands = false;
  double intensity = 1.0;
  unsigned processes = 0, depth = 0, threads = 0, leaves = 0, unique = 0;
  bool calibrate = false;
};

struct DetectArgs {
  std::string trace, rules, model, json;
  double window_ms = 5000;
  std::optional<double> threshold;
  bool quarantine = false;
  std::vector<std::string> disable;
  bool timed = false;
  double time_scale = 1.0;
};

struct TrainArgs {
  std::string corpus, out, rules;
  double fraction = 1.0;
  std::uint64_t seed = 42;
  double window_ms = 5000;
  double c = 10.0, gamma = 0.125, l2 = 1e-3, threshold = 0.5;
};

struct EvalArgs {
  std::string corpus, rules, model, summary, latency;
  std::size_t repeats = 20;
  std::uint64_t seed = 42;
  double window_ms = 5000;
  double fraction = 0.2;
  bool correlations = false;
};

struct BenchArgs {
  std::string trace, rules, model;
  double window_ms = 5000;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  if (a.calibrate) {
    const auto r = calibrate_noise({}, a.seed == 1 ? 42 : a.seed);
    out << "extra_writes=" << r.knobs.extra_writes << " extra_unloads=" << r.knobs.extra_unloads
        << " extra_loads=" << r.knobs.extra_loads << " extra_thread_ends=" << r.knobs.extra_thread_ends
        << " benign_rw_coupling=" << r.knobs.benign_rw_coupling << '\n';
    for (std::size_t k = 0; k < 4; ++k)
      out << to_string(static_cast<CorrelationPair>(k)) << " ransomware=" << r.ransomware[k] << '\n';
    out << "benign (File Read, File Write)=" << r.benign_read_write << '\n';
    return kExitOk;
  }

  SynthConfig cfg;
  if (!a.archetype.empty()) {
    const auto choice = parse_archetype(a.archetype);
    if (!choice) throw InvalidConfig("unknown archetype '" + a.archetype + "'");
    cfg.archetype = choice->archetype;
    cfg.pattern = choice->pattern;
  }
  cfg.n_files = a.files;
  cfg.seed = a.seed;
  cfg.duration = static_cast<Micros>(a.duration_ms * 1000.0);
  cfg.command_injection = a.commands;
  cfg.intensity = a.intensity;
  if (a.processes) {
    SpawnProfile p;
    p.n_processes = a.processes;
    p.depth = a.depth;
    p.n_threads = a.threads;
    if (a.leaves) p.n_leaves = a.leaves;
    if (a.unique) p.n_unique_images = a.unique;
    cfg.spawn_profile = p;
  }

  if (!a.corpus.empty()) {
    std::vector<CorpusEntry> spec =
        a.archetype.empty() ? default_corpus_spec() : std::vector<CorpusEntry>{{cfg, a.count}};
    const std::uint64_t master = a.archetype.empty() && a.seed == 1 ? 42 : a.seed;
    const auto rows = synth_corpus(spec, master, a.corpus);
    out << "wrote " << rows.size() << " traces to " << a.corpus << '\n';
    return kExitOk;
  }
  if (a.archetype.empty()) throw InvalidConfig("--archetype is required without --corpus");
  if (a.out.empty()) throw InvalidConfig("--out is required");
  const auto t = synth_trace(cfg);
  write_trace_file(a.out, t.manifest, t.events);
  out << "wrote " << t.events.size() << " events (" << t.manifest.family << ") to " << a.out << '\n';
  return kExitOk;
}

int run_detect(const DetectArgs& a, std::ostream& out) {
  EngineConfig cfg;
  cfg.window_len = window_us(a.window_ms);
  if (!a.rules.empty()) cfg.rules_path = a.rules;
  if (!a.model.empty()) cfg.model_path = a.model;
  cfg.threshold = a.threshold;
  cfg.quarantine = a.quarantine;
  for (const auto& d : a.disable) {
    if (d == "rules") cfg.enable_rules = false;
    else if (d == "fileio") cfg.enable_fileio = false;
    else if (d == "ml") cfg.enable_ml = false;
  }
  auto engine = Engine::from_config(cfg);
  const auto trace = read_trace_file(a.trace);
  ReplayOptions ro;
  if (a.timed) {
    ro.mode = ReplayMode::Timed;
    ro.time_scale = a.time_scale;
  }
  const auto report = run_trace(engine, trace, ro);
  out << format_report(report);
  if (!a.json.empty()) write_text(a.json, report_to_json(report));
  return kExitOk;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  const auto corpus = prepare_corpus(a.corpus, rules_from(a.rules), window_us(a.window_ms));
  TrainOptions opts;
  opts.svm.c = a.c;
  opts.svm.gamma = a.gamma;
  opts.mlr.l2 = a.l2;
  opts.threshold = a.threshold;
  const auto model = train_from_corpus(corpus, a.fraction, a.seed, opts);
  save_model_file(model, a.out);
  out << "trained on " << a.corpus << ": mlr " << (model.mlr.converged ? "converged" : "stopped") << " after "
      << model.mlr.iterations << " iterations, svm " << model.svm.core.n_support() << " support vectors\n"
      << "wrote " << a.out << '\n';
  return kExitOk;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  const auto corpus = prepare_corpus(a.corpus, rules_from(a.rules), window_us(a.window_ms));
  if (a.correlations) {
    std::vector<LabeledWindows> lw;
    for (const auto& t : corpus) lw.push_back({t.label, t.svm});
    out << format_correlation_report(correlation_report(lw));
    return kExitOk;
  }
  EvalOptions opts;
  opts.repeats = a.repeats;
  opts.seed = a.seed;
  opts.train_fraction = a.fraction;
  if (!a.model.empty()) opts.model = load_model_file(a.model);
  const auto s = evaluate(corpus, opts);
  out << format_summary(s);
  if (!a.summary.empty()) write_text(a.summary, summary_to_json(s));
  if (!a.latency.empty()) write_text(a.latency, latency_table(s));
  return kExitOk;
}

int run_bench(const BenchArgs& a, std::ostream& out) {
  const auto trace = read_trace_file(a.trace);
  std::optional<FusedClassifier> model;
  if (!a.model.empty()) model = load_model_file(a.model);
  out << format_bench(bench_trace(trace, rules_from(a.rules), model, window_us(a.window_ms)));
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming ransomware detection engine", "peeler"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic trace or corpus");
  synth->add_option("--archetype", sa.archetype,
                    "crypto:post-overwrite | crypto:pre-overwrite | crypto:file-to-file-delete | "
                    "crypto:file-to-file-rename-delete | locker | benign:crypto-like | benign:spawner | benign:desktop");
  synth->add_option("--files", sa.files, "Files encrypted (crypto) or archived (crypto-like)")->capture_default_str();
  synth->add_option("--seed", sa.seed, "Trace seed, or master seed with --corpus (default corpus: 42)")->capture_default_str();
  synth->add_option("--out", sa.out, "Output trace file");
  synth->add_option("--corpus", sa.corpus, "Write a corpus directory (default corpus unless --archetype is given)");
  synth->add_option("--count", sa.count, "Traces per archetype with --corpus")->capture_default_str();
  synth->add_option("--duration-ms", sa.duration_ms, "Trace length")->capture_default_str();
  synth->add_flag("--commands", sa.commands, "Inject attack command lines");
  synth->add_option("--intensity", sa.intensity, "Background event rate multiplier")->capture_default_str();
  synth->add_option("--processes", sa.processes, "Spawn profile: process count");
  synth->add_option("--depth", sa.depth, "Spawn profile: depth in edges below the root");
  synth->add_option("--threads", sa.threads, "Spawn profile: thread count");
  synth->add_option("--leaves", sa.leaves, "Spawn profile: leaf count");
  synth->add_option("--unique-images", sa.unique, "Spawn profile: distinct image names");
  synth->add_flag("--calibrate", sa.calibrate, "Re-run the noise calibration on the default corpus")->group("");

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Replay a trace through the detection engine");
  detect->add_option("--trace", da.trace, "Trace file")->required();
  detect->add_option("--rules", da.rules, "Rule file (bundled rules when omitted)");
  detect->add_option("--model", da.model, "Model file; the ML stage is off without one");
  detect->add_option("--window-ms", da.window_ms, "Window length")->capture_default_str();
  detect->add_option("--threshold", da.threshold, "Fusion threshold override");
  detect->add_flag("--quarantine", da.quarantine, "At most one alert per pid");
  detect->add_option("--disable", da.disable, "Turn off detectors")->check(CLI::IsMember({"rules", "fileio", "ml"}));
  detect->add_option("--json-report", da.json, "Write the report as JSON");
  detect->add_flag("--timed", da.timed, "Replay with the recorded inter-event gaps");
  detect->add_option("--time-scale", da.time_scale, "Gap multiplier for --timed")->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the fused classifier on a corpus");
  train->add_option("--corpus", ta.corpus, "Corpus directory")->required();
  train->add_option("--out", ta.out, "Model file to write")->required();
  train->add_option("--rules", ta.rules, "Rule file");
  train->add_option("--fraction,--train-frac", ta.fraction, "Share of each locker/benign family used (1 = all)")->capture_default_str();
  train->add_option("--seed", ta.seed, "Split seed")->capture_default_str();
  train->add_option("--window-ms", ta.window_ms, "Window length")->capture_default_str();
  train->add_option("--c", ta.c, "SVM box constraint")->capture_default_str();
  train->add_option("--gamma", ta.gamma, "RBF width")->capture_default_str();
  train->add_option("--l2", ta.l2, "MLR L2 penalty")->capture_default_str();
  train->add_option("--threshold", ta.threshold, "Fusion threshold")->capture_default_str();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Repeated train/test evaluation on a corpus");
  eval->add_option("--corpus", ea.corpus, "Corpus directory")->required();
  eval->add_option("--rules", ea.rules, "Rule file");
  eval->add_option("--model", ea.model, "Use this model instead of training per split");
  eval->add_option("--repeats", ea.repeats, "Number of splits")->capture_default_str();
  eval->add_option("--seed", ea.seed, "Master split seed")->capture_default_str();
  eval->add_option("--window-ms", ea.window_ms, "Window length")->capture_default_str();
  eval->add_option("--fraction,--train-frac", ea.fraction, "Training share of each locker/benign family")->capture_default_str();
  eval->add_option("--summary", ea.summary, "Write the summary as JSON");
  eval->add_option("--latency-table", ea.latency, "Write per-trace latencies");
  eval->add_flag("--correlations", ea.correlations, "Print the event-pair correlation table and exit");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Measure pipeline throughput on a trace");
  bench->add_option("--trace", ba.trace, "Trace file")->required();
  bench->add_option("--rules", ba.rules, "Rule file");
  bench->add_option("--model", ba.model, "Model file");
  bench->add_option("--window-ms", ba.window_ms, "Window length")->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return run_synth(sa, out);
    if (detect->parsed()) return run_detect(da, out);
    if (train->parsed()) return run_train(ta, out);
    if (eval->parsed()) return run_eval(ea, out);
    if (bench->parsed()) return run_bench(ba, out);
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace peeler
