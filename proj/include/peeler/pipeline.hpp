#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "peeler/command_detector.hpp"
#include "peeler/event.hpp"
#include "peeler/feature_extract.hpp"
#include "peeler/fileio_matcher.hpp"
#include "peeler/ml_models.hpp"
#include "peeler/trace_io.hpp"

namespace peeler {

struct EngineConfig {
  Micros window_len = 5'000'000;
  /// Bundled rules when absent.
  std::optional<std::string> rules_path;
  /// ML stage disabled when absent (unless a classifier is handed to the engine directly).
  std::optional<std::string> model_path;
  /// Overrides the threshold stored with the model.
  std::optional<double> threshold;
  bool quarantine = false;
  bool enable_rules = true;
  bool enable_fileio = true;
  bool enable_ml = true;
  /// Accumulate wall-clock time per stage (costs a few clock reads per event).
  bool profile_stages = false;
  MatcherConfig matcher;

  /// Throws InvalidConfig.
  void validate() const;
};

enum class Verdict : std::uint8_t { Benign, Ransomware };

std::string_view to_string(Verdict v);

struct StageTimings {
  double rules_seconds = 0.0;
  double fileio_seconds = 0.0;
  double ml_seconds = 0.0;
};

struct DetectionReport {
  std::vector<Alert> alerts;
  std::array<std::size_t, 3> per_detector{};  // indexed by DetectorKind
  /// First alert's event timestamp minus the recorded attack onset; negative when the engine
  /// fired before the first malicious event.
  std::optional<std::int64_t> first_alert_latency;
  std::size_t events_processed = 0;
  std::size_t windows_classified = 0;
  double seconds = 0.0;
  double events_per_second = 0.0;
  StageTimings stages;
  Verdict verdict = Verdict::Benign;
};

class Engine {
 public:
  /// `model` wins over cfg.model_path; with neither the ML stage is off.
  Engine(EngineConfig cfg, RuleSet rules, std::optional<FusedClassifier> model = std::nullopt);

  /// Loads rules (bundled when no path) and the model file named by the config.
  static Engine from_config(const EngineConfig& cfg);

  /// Events must arrive in timestamp order (SchemaError otherwise). Alerts from windows closed by
  /// this event come first, then the per-event detectors.
  std::vector<Alert> process_event(const Event& e);

  /// Classifies the buffered window and starts the next one.
  std::optional<Alert> flush_window();

  /// Flushes the trailing partial window.
  std::vector<Alert> finish();

  bool ml_enabled() const { return model_.has_value() && cfg_.enable_ml; }
  const EngineConfig& config() const { return cfg_; }
  const RuleSet& rules() const { return rules_; }
  const std::optional<FusedClassifier>& model() const { return model_; }
  std::size_t windows_classified() const { return windows_classified_; }
  const StageTimings& stage_timings() const { return timings_; }
  bool quarantined(Pid pid) const { return quarantined_.count(pid) != 0; }

 private:
  bool admit(const Alert& a);
  Pid attribute(std::vector<std::pair<Pid, std::size_t>>& ranked) const;
  bool exempt(Pid pid) const;

  EngineConfig cfg_;
  RuleSet rules_;
  std::optional<FusedClassifier> model_;
  FileIoMatcher matcher_;
  std::vector<Event> window_;
  Micros window_start_ = 0;
  std::optional<Micros> last_ts_;
  std::unordered_set<Pid> quarantined_;
  std::unordered_map<Pid, std::string> images_;
  std::size_t windows_classified_ = 0;
  StageTimings timings_;
};

/// Replays the trace through the engine (immediate mode unless told otherwise) and summarizes.
DetectionReport run_trace(Engine& engine, const Trace& trace, const ReplayOptions& replay_opts = {});

/// Human-readable table.
std::string format_report(const DetectionReport& r);
/// JSON document with the same content.
std::string report_to_json(const DetectionReport& r);

struct StageThroughput {
  std::string stage;
  std::size_t events = 0;
  double seconds = 0.0;
  double events_per_second = 0.0;
};

struct BenchReport {
  std::size_t events = 0;
  StageThroughput full;
  StageThroughput rules_only;
  StageTimings breakdown;
  std::size_t alerts = 0;
};

/// Immediate replay of the full pipeline (with per-stage timing) and of the rules stage alone.
BenchReport bench_trace(const Trace& trace, const RuleSet& rules, const std::optional<FusedClassifier>& model,
                        Micros window_len = 5'000'000);

std::string format_bench(const BenchReport& r);

}  // namespace peeler
