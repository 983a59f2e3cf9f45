#include "peeler/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "peeler/errors.hpp"

namespace peeler {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string lower_basename(std::string_view image) {
  const auto slash = image.find_last_of("\\/");
  std::string s(slash == std::string_view::npos ? image : image.substr(slash + 1));
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string fmt(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

void EngineConfig::validate() const {
  if (window_len == 0) throw InvalidConfig("window_len must be positive");
  if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) throw InvalidConfig("threshold must lie in [0,1]");
}

std::string_view to_string(Verdict v) { return v == Verdict::Ransomware ? "ransomware" : "benign"; }

Engine::Engine(EngineConfig cfg, RuleSet rules, std::optional<FusedClassifier> model)
    : cfg_(std::move(cfg)), rules_(std::move(rules)), model_(std::move(model)), matcher_(cfg_.matcher) {
  cfg_.validate();
  if (model_ && cfg_.threshold) model_->threshold = *cfg_.threshold;
}

Engine Engine::from_config(const EngineConfig& cfg) {
  RuleSet rules = cfg.rules_path ? load_rules_file(*cfg.rules_path) : default_rules();
  std::optional<FusedClassifier> model;
  if (cfg.model_path) model = load_model_file(*cfg.model_path);
  return Engine(cfg, std::move(rules), std::move(model));
}

bool Engine::exempt(Pid pid) const {
  if (pid == 0 || pid == kSystemPid) return true;
  const auto it = images_.find(pid);
  if (it == images_.end()) return false;
  const auto name = lower_basename(it->second);
  return name == "system" || name == "explorer.exe";
}

bool Engine::admit(const Alert& a) {
  const bool fresh = quarantined_.insert(a.pid).second;
  return fresh || !cfg_.quarantine;
}

Pid Engine::attribute(std::vector<std::pair<Pid, std::size_t>>& ranked) const {
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  for (const auto& [pid, n] : ranked)
    if (!exempt(pid)) return pid;
  return ranked.empty() ? 0 : ranked.front().first;
}

std::optional<Alert> Engine::flush_window() {
  std::optional<Alert> out;
  if (!window_.empty() && ml_enabled()) {
    const auto t0 = cfg_.profile_stages ? Clock::now() : Clock::time_point{};
    const auto tree = build_process_tree(window_);
    const auto score = fuse(*model_, extract_mlr_features(tree), extract_svm_features(window_));
    ++windows_classified_;
    if (score.ransomware) {
      std::unordered_map<Pid, std::size_t> counts;
      for (const auto& e : window_) ++counts[e.pid];
      std::vector<std::pair<Pid, std::size_t>> ranked(counts.begin(), counts.end());
      Alert a;
      a.detector = DetectorKind::MlClassifier;
      a.pid = attribute(ranked);
      a.event_timestamp = window_.back().timestamp;
      a.emitted_timestamp = window_start_ + cfg_.window_len;
      std::string top;
      std::size_t shown = 0;
      for (const auto& [pid, n] : ranked) {
        if (exempt(pid)) continue;
        if (shown++ == 3) break;
        if (!top.empty()) top += ',';
        top += std::to_string(pid) + ':' + std::to_string(n);
      }
      a.trigger = "score=" + fmt(score.score, 4) + " mlr=" + fmt(score.mlr, 4) + " svm=" + fmt(score.svm, 4) +
                  " top=" + top;
      if (admit(a)) out = std::move(a);
    }
    if (cfg_.profile_stages) timings_.ml_seconds += since(t0);
  }
  window_.clear();
  window_start_ += cfg_.window_len;
  return out;
}

std::vector<Alert> Engine::process_event(const Event& e) {
  if (last_ts_ && e.timestamp < *last_ts_)
    throw SchemaError("event at " + std::to_string(e.timestamp) + " arrives after " + std::to_string(*last_ts_));
  last_ts_ = e.timestamp;
  std::vector<Alert> out;

  if (e.timestamp >= window_start_ + cfg_.window_len) {
    if (auto a = flush_window()) out.push_back(std::move(*a));
    // Empty windows in between carry nothing to classify.
    window_start_ = e.timestamp / cfg_.window_len * cfg_.window_len;
  }

  if (e.is_process_start())
    if (const auto* p = e.as<ProcessAttrs>()) images_[e.pid] = p->image_file_name;

  if (cfg_.enable_rules && e.is_process_start()) {
    const auto t0 = cfg_.profile_stages ? Clock::now() : Clock::time_point{};
    auto a = match_command(rules_, e);
    if (cfg_.profile_stages) timings_.rules_seconds += since(t0);
    if (a && admit(*a)) out.push_back(std::move(*a));
  }
  if (cfg_.enable_fileio) {
    const auto t0 = cfg_.profile_stages ? Clock::now() : Clock::time_point{};
    auto a = matcher_.ingest(e);
    if (cfg_.profile_stages) timings_.fileio_seconds += since(t0);
    if (a && admit(*a)) out.push_back(std::move(*a));
  }
  if (ml_enabled()) window_.push_back(e);
  return out;
}

std::vector<Alert> Engine::finish() {
  std::vector<Alert> out;
  if (auto a = flush_window()) out.push_back(std::move(*a));
  return out;
}

DetectionReport run_trace(Engine& engine, const Trace& trace, const ReplayOptions& replay_opts) {
  DetectionReport r;
  const auto t0 = Clock::now();
  const auto stats = replay(trace.events, replay_opts, [&](const Event& e) {
    for (auto& a : engine.process_event(e)) r.alerts.push_back(std::move(a));
  });
  for (auto& a : engine.finish()) r.alerts.push_back(std::move(a));
  r.seconds = since(t0);
  r.events_processed = stats.delivered;
  r.events_per_second = r.seconds > 0.0 ? static_cast<double>(r.events_processed) / r.seconds : 0.0;
  r.windows_classified = engine.windows_classified();
  r.stages = engine.stage_timings();
  for (const auto& a : r.alerts) ++r.per_detector[static_cast<std::size_t>(a.detector)];
  r.verdict = r.alerts.empty() ? Verdict::Benign : Verdict::Ransomware;
  if (!r.alerts.empty() && trace.manifest.attack_onset)
    r.first_alert_latency = static_cast<std::int64_t>(r.alerts.front().event_timestamp) -
                            static_cast<std::int64_t>(*trace.manifest.attack_onset);
  return r;
}

std::string format_report(const DetectionReport& r) {
  std::ostringstream os;
  os << "verdict            " << to_string(r.verdict) << '\n';
  os << "events             " << r.events_processed << '\n';
  os << "events/sec         " << fmt(r.events_per_second, 0) << '\n';
  os << "windows classified " << r.windows_classified << '\n';
  os << "alerts             " << r.alerts.size() << " (rules " << r.per_detector[0] << ", file-io " << r.per_detector[1]
     << ", ml " << r.per_detector[2] << ")\n";
  os << "first latency      "
     << (r.first_alert_latency ? fmt(static_cast<double>(*r.first_alert_latency) / 1000.0, 3) + " ms" : std::string("-"))
     << '\n';
  if (!r.alerts.empty()) {
    os << '\n' << "detector        pid       event_us      emitted_us    trigger\n";
    for (const auto& a : r.alerts) {
      char line[96];
      std::snprintf(line, sizeof line, "%-15s %-9llu %-13llu %-13llu ", std::string(to_string(a.detector)).c_str(),
                    static_cast<unsigned long long>(a.pid), static_cast<unsigned long long>(a.event_timestamp),
                    static_cast<unsigned long long>(a.emitted_timestamp));
      os << line << a.trigger << '\n';
    }
  }
  return os.str();
}

std::string report_to_json(const DetectionReport& r) {
  nlohmann::ordered_json j;
  j["verdict"] = to_string(r.verdict);
  j["events_processed"] = r.events_processed;
  j["events_per_second"] = r.events_per_second;
  j["seconds"] = r.seconds;
  j["windows_classified"] = r.windows_classified;
  j["first_alert_latency_us"] = r.first_alert_latency ? nlohmann::ordered_json(*r.first_alert_latency) : nullptr;
  j["per_detector"] = {{"command_rule", r.per_detector[0]}, {"fileio_pattern", r.per_detector[1]},
                       {"ml_classifier", r.per_detector[2]}};
  j["stages_seconds"] = {{"rules", r.stages.rules_seconds}, {"fileio", r.stages.fileio_seconds}, {"ml", r.stages.ml_seconds}};
  auto& alerts = j["alerts"] = nlohmann::ordered_json::array();
  for (const auto& a : r.alerts)
    alerts.push_back({{"detector", to_string(a.detector)},
                      {"pid", a.pid},
                      {"trigger", a.trigger},
                      {"event_timestamp", a.event_timestamp},
                      {"emitted_timestamp", a.emitted_timestamp}});
  return j.dump(2) + "\n";
}

namespace {

StageThroughput throughput(std::string stage, std::size_t events, double seconds) {
  return {std::move(stage), events, seconds, seconds > 0.0 ? static_cast<double>(events) / seconds : 0.0};
}

}  // namespace

BenchReport bench_trace(const Trace& trace, const RuleSet& rules, const std::optional<FusedClassifier>& model,
                        Micros window_len) {
  BenchReport b;
  b.events = trace.events.size();
  EngineConfig cfg;
  cfg.window_len = window_len;
  {
    Engine full(cfg, rules, model);
    const auto r = run_trace(full, trace);
    b.full = throughput("full", r.events_processed, r.seconds);
    b.alerts = r.alerts.size();
  }
  {
    auto prof = cfg;
    prof.profile_stages = true;
    Engine e(prof, rules, model);
    b.breakdown = run_trace(e, trace).stages;
  }
  {
    auto rules_cfg = cfg;
    rules_cfg.enable_fileio = false;
    rules_cfg.enable_ml = false;
    Engine e(rules_cfg, rules);
    const auto r = run_trace(e, trace);
    b.rules_only = throughput("rules-only", r.events_processed, r.seconds);
  }
  return b;
}

std::string format_bench(const BenchReport& b) {
  std::ostringstream os;
  os << "events           " << b.events << '\n';
  os << "full pipeline    " << fmt(b.full.events_per_second, 0) << " events/s (" << fmt(b.full.seconds, 3) << " s)\n";
  os << "rules only       " << fmt(b.rules_only.events_per_second, 0) << " events/s (" << fmt(b.rules_only.seconds, 3)
     << " s)\n";
  os << "stage breakdown  rules " << fmt(b.breakdown.rules_seconds, 4) << " s, file-io "
     << fmt(b.breakdown.fileio_seconds, 4) << " s, ml " << fmt(b.breakdown.ml_seconds, 4) << " s\n";
  os << "alerts           " << b.alerts << '\n';
  return os.str();
}

}  // namespace peeler
