#include "peeler/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "peeler/errors.hpp"
#include "peeler/pipeline.hpp"
#include "peeler/synth.hpp"

namespace peeler {

PreparedTrace prepare_trace(const Trace& trace, const RuleSet& rules, Micros window_len, std::string path) {
  PreparedTrace p;
  p.path = std::move(path);
  p.label = trace.manifest.label;
  p.family = trace.manifest.family;
  p.attack_onset = trace.manifest.attack_onset;

  EngineConfig cfg;
  cfg.window_len = window_len;
  cfg.enable_ml = false;
  Engine engine(cfg, rules);
  for (const auto& e : trace.events) {
    auto alerts = engine.process_event(e);
    if (!alerts.empty()) {
      p.first_static_alert = alerts.front();
      break;
    }
  }

  for (const auto& w : window_partition(trace.events, window_len)) {
    p.mlr.push_back(extract_mlr_features(build_process_tree(w)));
    p.svm.push_back(extract_svm_features(w));
    p.window_empty.push_back(w.events.empty());
    p.window_last_ts.push_back(w.events.empty() ? 0 : w.events.back().timestamp);
    p.window_end.push_back(w.end);
  }
  return p;
}

std::vector<PreparedTrace> prepare_corpus(const std::string& dir, const RuleSet& rules, Micros window_len) {
  const auto index = read_corpus_index(dir);
  std::vector<PreparedTrace> out(index.size());
  std::vector<std::string> errors(index.size());
  const auto n = static_cast<std::int64_t>(index.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    try {
      const auto path = (std::filesystem::path(dir) / index[ui].path).string();
      out[ui] = prepare_trace(read_trace_file(path), rules, window_len, index[ui].path);
    } catch (const std::exception& e) {
      errors[ui] = index[ui].path + ": " + e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw CorpusError(e);
  return out;
}

TraceOutcome peeler_outcome(const PreparedTrace& t, const FusedClassifier& model) {
  std::optional<Micros> ml_ts;
  for (std::size_t w = 0; w < t.mlr.size(); ++w) {
    if (t.window_empty[w]) continue;
    if (fuse(model, t.mlr[w], t.svm[w]).ransomware) {
      ml_ts = t.window_last_ts[w];
      break;
    }
  }
  TraceOutcome o;
  std::optional<Micros> first;
  if (t.first_static_alert && (!ml_ts || t.first_static_alert->event_timestamp <= *ml_ts)) {
    first = t.first_static_alert->event_timestamp;
    o.first_detector = t.first_static_alert->detector;
  } else if (ml_ts) {
    first = *ml_ts;
    o.first_detector = DetectorKind::MlClassifier;
  }
  o.ransomware = first.has_value();
  if (first && t.attack_onset)
    o.latency = static_cast<std::int64_t>(*first) - static_cast<std::int64_t>(*t.attack_onset);
  return o;
}

LatencyStats latency_stats(std::vector<double> v) {
  LatencyStats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean_ms = sum / static_cast<double>(v.size());
  auto pct = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.p50_ms = pct(0.5);
  s.p90_ms = pct(0.9);
  s.max_ms = v.back();
  return s;
}

void compute_rates(EvalSummary& s) {
  auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
  const double tp = double(s.tp), fp = double(s.fp), tn = double(s.tn), fn = double(s.fn);
  s.accuracy = ratio(tp + tn, tp + fp + tn + fn);
  s.tpr = ratio(tp, tp + fn);
  s.fnr = ratio(fn, tp + fn);
  s.fpr = ratio(fp, fp + tn);
  s.precision = ratio(tp, tp + fp);
  s.recall = s.tpr;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
}

namespace {

struct Split {
  std::vector<std::size_t> train, test;
};

Split stratified_split(const std::vector<PreparedTrace>& corpus, double fraction, std::uint64_t seed) {
  std::map<std::pair<int, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    groups[{static_cast<int>(corpus[i].label), corpus[i].family}].push_back(i);
  std::mt19937_64 rng(seed);
  Split s;
  for (auto& [key, idx] : groups) {
    const auto label = static_cast<Label>(key.first);
    std::size_t k = 0;
    if (label == Label::Benign || label == Label::ScreenLocker) {
      if (idx.size() >= 2)
        k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * double(idx.size()))), 1,
                                    idx.size() - 1);
      else
        k = idx.size();
    }
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    s.test.insert(s.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

FusedClassifier train_on(const std::vector<PreparedTrace>& corpus, const std::vector<std::size_t>& train,
                         const TrainOptions& opts) {
  std::vector<MlrFeatures> xm;
  std::vector<SvmFeatures> xs;
  std::vector<int> y;
  for (auto i : train) {
    const auto& t = corpus[i];
    const int label = is_ransomware(t.label) ? 1 : 0;
    for (std::size_t w = 0; w < t.mlr.size(); ++w) {
      if (t.window_empty[w]) continue;
      // Windows that close before the attack starts carry no malicious activity.
      if (label == 1 && t.attack_onset && t.window_end[w] <= *t.attack_onset) continue;
      xm.push_back(t.mlr[w]);
      xs.push_back(t.svm[w]);
      y.push_back(label);
    }
  }
  return train_fused(xm, xs, y, opts);
}

}  // namespace

FusedClassifier train_from_corpus(const std::vector<PreparedTrace>& corpus, double fraction, std::uint64_t seed,
                                  const TrainOptions& opts) {
  if (!(fraction > 0.0)) throw InvalidConfig("training fraction must be positive");
  std::vector<std::size_t> train;
  if (fraction >= 1.0) {
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus[i].label == Label::Benign || corpus[i].label == Label::ScreenLocker) train.push_back(i);
  } else {
    train = stratified_split(corpus, fraction, seed).train;
  }
  bool pos = false, neg = false;
  for (auto i : train) (corpus[i].label == Label::Benign ? neg : pos) = true;
  if (!pos || !neg) throw CorpusError("training needs both screen-locker and benign traces");
  return train_on(corpus, train, opts);
}

EvalSummary evaluate(const std::vector<PreparedTrace>& corpus, const EvalOptions& opts, const OutcomeFn& outcome) {
  if (opts.repeats == 0) throw InvalidConfig("repeats must be >= 1");
  if (!(opts.train_fraction > 0.0 && opts.train_fraction < 1.0)) throw InvalidConfig("train_fraction must lie in (0,1)");
  std::size_t n_benign = 0, n_ransom = 0, n_locker = 0;
  for (const auto& t : corpus) {
    if (t.label == Label::Benign) ++n_benign;
    if (is_ransomware(t.label)) ++n_ransom;
    if (t.label == Label::ScreenLocker) ++n_locker;
  }
  if (n_benign == 0) throw CorpusError("corpus has no benign traces");
  if (n_ransom == 0) throw CorpusError("corpus has no ransomware traces");
  if (!opts.model && n_locker == 0) throw CorpusError("corpus has no screen-locker traces to train on");

  EvalSummary s;
  s.repeats = opts.repeats;
  for (std::size_t rep = 0; rep < opts.repeats; ++rep) {
    const auto split = stratified_split(corpus, opts.train_fraction, derive_seed(opts.seed, rep));
    const FusedClassifier model = opts.model ? *opts.model : train_on(corpus, split.train, opts.train);
    for (auto i : split.test) {
      const auto& t = corpus[i];
      if (t.label == Label::Unknown) continue;
      const auto o = outcome(t, model);
      const bool truth = is_ransomware(t.label);
      if (truth) (o.ransomware ? s.tp : s.fn)++;
      else (o.ransomware ? s.fp : s.tn)++;
      s.rows.push_back({rep, t.path, t.label, t.family, o.ransomware, o.latency, o.first_detector});
    }
  }
  compute_rates(s);
  std::vector<double> crypto, locker;
  for (const auto& r : s.rows) {
    if (!r.predicted || !r.latency) continue;
    const double ms = static_cast<double>(*r.latency) / 1000.0;
    if (r.label == Label::Crypto) crypto.push_back(ms);
    if (r.label == Label::ScreenLocker) locker.push_back(ms);
  }
  s.crypto_latency = latency_stats(std::move(crypto));
  s.locker_latency = latency_stats(std::move(locker));
  return s;
}

namespace {

nlohmann::ordered_json stats_json(const LatencyStats& l) {
  return {{"count", l.count}, {"mean_ms", l.mean_ms}, {"p50_ms", l.p50_ms}, {"p90_ms", l.p90_ms}, {"max_ms", l.max_ms}};
}

}  // namespace

std::string summary_to_json(const EvalSummary& s) {
  nlohmann::ordered_json j;
  j["repeats"] = s.repeats;
  j["confusion"] = {{"tp", s.tp}, {"fp", s.fp}, {"tn", s.tn}, {"fn", s.fn}};
  j["accuracy"] = s.accuracy;
  j["tpr"] = s.tpr;
  j["fpr"] = s.fpr;
  j["fnr"] = s.fnr;
  j["precision"] = s.precision;
  j["recall"] = s.recall;
  j["f1"] = s.f1;
  j["latency"] = {{"crypto", stats_json(s.crypto_latency)}, {"locker", stats_json(s.locker_latency)}};
  return j.dump(2) + "\n";
}

std::string latency_table(const EvalSummary& s) {
  std::ostringstream os;
  os << "repeat|path|label|family|detected|detector|latency_ms\n";
  for (const auto& r : s.rows) {
    os << r.repeat << '|' << r.path << '|' << to_string(r.label) << '|' << r.family << '|' << (r.predicted ? 1 : 0) << '|'
       << (r.first_detector ? std::string(to_string(*r.first_detector)) : std::string("-")) << '|';
    if (r.latency) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(*r.latency) / 1000.0);
      os << buf;
    } else {
      os << '-';
    }
    os << '\n';
  }
  return os.str();
}

std::string format_summary(const EvalSummary& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "repeats    %zu\n"
                "confusion  tp=%zu fp=%zu tn=%zu fn=%zu\n"
                "accuracy   %.4f\nprecision  %.4f\nrecall     %.4f\nf1         %.4f\nfpr        %.4f\nfnr        %.4f\n"
                "latency    crypto n=%zu mean=%.1f ms p50=%.1f ms | locker n=%zu mean=%.1f ms p50=%.1f ms\n",
                s.repeats, s.tp, s.fp, s.tn, s.fn, s.accuracy, s.precision, s.recall, s.f1, s.fpr, s.fnr,
                s.crypto_latency.count, s.crypto_latency.mean_ms, s.crypto_latency.p50_ms, s.locker_latency.count,
                s.locker_latency.mean_ms, s.locker_latency.p50_ms);
  return buf;
}

}  // namespace peeler
