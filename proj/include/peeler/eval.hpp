#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "peeler/command_detector.hpp"
#include "peeler/feature_extract.hpp"
#include "peeler/ml_models.hpp"
#include "peeler/trace_io.hpp"

namespace peeler {

/// Per-trace data that does not depend on the trained model: the first rule/pattern alert and the
/// per-window feature vectors.
struct PreparedTrace {
  std::string path;
  Label label = Label::Unknown;
  std::string family;
  std::optional<Micros> attack_onset;
  std::optional<Alert> first_static_alert;
  std::vector<MlrFeatures> mlr;
  std::vector<SvmFeatures> svm;
  std::vector<Micros> window_last_ts;  // timestamp of the last event per window (0 when empty)
  std::vector<Micros> window_end;
  std::vector<bool> window_empty;
};

PreparedTrace prepare_trace(const Trace& trace, const RuleSet& rules, Micros window_len, std::string path = {});

/// Loads and prepares every trace listed in the corpus index (parallel across traces).
std::vector<PreparedTrace> prepare_corpus(const std::string& dir, const RuleSet& rules, Micros window_len);

struct TraceOutcome {
  bool ransomware = false;
  std::optional<std::int64_t> latency;
  std::optional<DetectorKind> first_detector;
};

/// Outcome of the full engine (no quarantine) on a prepared trace.
TraceOutcome peeler_outcome(const PreparedTrace& t, const FusedClassifier& model);

using OutcomeFn = std::function<TraceOutcome(const PreparedTrace&, const FusedClassifier&)>;

struct EvalOptions {
  std::size_t repeats = 20;
  std::uint64_t seed = 42;
  double train_fraction = 0.2;
  TrainOptions train;
  /// Skip training and use this model for every repeat.
  std::optional<FusedClassifier> model;
};

struct EvalRow {
  std::size_t repeat = 0;
  std::string path;
  Label label = Label::Unknown;
  std::string family;
  bool predicted = false;
  std::optional<std::int64_t> latency;
  std::optional<DetectorKind> first_detector;
};

struct LatencyStats {
  std::size_t count = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  double max_ms = 0.0;
};

LatencyStats latency_stats(std::vector<double> latencies_ms);

struct EvalSummary {
  std::size_t repeats = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;  // summed over repeats
  double accuracy = 0.0, tpr = 0.0, fpr = 0.0, fnr = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  std::vector<EvalRow> rows;  // test-set traces, every repeat
  LatencyStats crypto_latency;
  LatencyStats locker_latency;
};

/// Trains on the screen-locker and benign traces: all of them when fraction >= 1, otherwise the
/// stratified per-family selection drawn with `seed`.
FusedClassifier train_from_corpus(const std::vector<PreparedTrace>& corpus, double fraction, std::uint64_t seed,
                                  const TrainOptions& opts = {});

/// Fills the rates from the confusion counts.
void compute_rates(EvalSummary& s);

/// Repeats a stratified split: `train_fraction` of each screen-locker and benign family trains the
/// fused classifier, everything else (all crypto traces included) is tested. Rates come from the
/// confusion counts pooled over repeats. Throws CorpusError when a label class is missing.
EvalSummary evaluate(const std::vector<PreparedTrace>& corpus, const EvalOptions& opts,
                     const OutcomeFn& outcome = peeler_outcome);

std::string summary_to_json(const EvalSummary& s);
/// `repeat|path|label|family|detected|detector|latency_ms`
std::string latency_table(const EvalSummary& s);
std::string format_summary(const EvalSummary& s);

}  // namespace peeler
