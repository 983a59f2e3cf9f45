#pragma once

#include <random>
#include <string>
#include <vector>

#include "peeler/eval.hpp"
#include "peeler/event.hpp"
#include "peeler/ml_models.hpp"
#include "peeler/synth.hpp"
#include "peeler/trace_io.hpp"

namespace peeler::testing {

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static constexpr char kChars[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 \\/:.-_\"'|{}\t%*?";
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, sizeof(kChars) - 2);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = kChars[pick(rng)];
  return s;
}

/// A valid event of a random (provider, etype) pair with arbitrary attribute values.
inline Event random_event(std::mt19937_64& rng, Micros ts) {
  std::uniform_int_distribution<int> kind(0, 11);
  const Pid pid = rng() % 100000;
  const Tid tid = rng() % 100000;
  switch (kind(rng)) {
    case 0: return make_process(EventType::Start, ts, pid, rng() % 5000, random_text(rng, 40), random_text(rng, 80), tid, rng() % 4);
    case 1: return make_process(EventType::End, ts, pid, rng() % 5000, random_text(rng, 40), {}, tid);
    case 2: return make_file_rw(EventType::Read, ts, pid, rng(), rng(), rng() % 1'000'000, tid);
    case 3: return make_file_rw(EventType::Write, ts, pid, rng(), rng(), rng(), tid);
    case 4: return make_file_rendel(EventType::Rename, ts, pid, rng(), rng(), tid);
    case 5: return make_file_rendel(EventType::Delete, ts, pid, rng(), rng(), tid);
    case 6: return make_file_name(EventType::FileCreate, ts, pid, rng(), random_text(rng, 60), tid);
    case 7: return make_file_name(EventType::FileDelete, ts, pid, rng(), random_text(rng, 60), tid);
    case 8: return make_thread(EventType::Start, ts, pid, tid, rng() % 5000);
    case 9: return make_thread(EventType::End, ts, pid, tid, rng() % 5000);
    case 10: return make_image(EventType::Load, ts, pid, random_text(rng, 50), rng() % (1u << 24), tid);
    default: return make_image(EventType::Unload, ts, pid, random_text(rng, 50), rng() % (1u << 24), tid);
  }
}

inline Trace random_trace(std::mt19937_64& rng, std::size_t n) {
  Trace t;
  Micros ts = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ts += rng() % 3000;
    t.events.push_back(random_event(rng, ts));
  }
  static constexpr Label kLabels[] = {Label::Benign, Label::Crypto, Label::ScreenLocker, Label::Unknown};
  t.manifest.label = kLabels[rng() % 4];
  t.manifest.family = "fam-" + std::to_string(rng() % 1000);
  t.manifest.seed = rng();
  t.manifest.event_count = n;
  t.manifest.duration = ts + rng() % 1000;
  if (rng() % 2) t.manifest.attack_onset = t.manifest.duration / 2;
  return t;
}

inline double random_real(std::mt19937_64& rng, double lo = -10.0, double hi = 10.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Scaler random_scaler(std::mt19937_64& rng, std::size_t dim) {
  Scaler s;
  for (std::size_t i = 0; i < dim; ++i) {
    const bool deg = rng() % 5 == 0;
    s.mean.push_back(random_real(rng, 0, 500));
    s.std.push_back(deg ? 1.0 : random_real(rng, 1e-3, 300));
    s.degenerate.push_back(deg);
  }
  return s;
}

/// A classifier with arbitrary (untrained) parameters, for persistence tests.
inline FusedClassifier random_model(std::mt19937_64& rng) {
  FusedClassifier fc;
  fc.mlr.scaler = random_scaler(rng, kMlrDim);
  for (auto& row : fc.mlr.weights)
    for (auto& w : row) w = random_real(rng);
  fc.mlr.l2 = random_real(rng, 1e-6, 1.0);
  fc.svm.scaler = random_scaler(rng, kSvmDim);
  auto& core = fc.svm.core;
  core.dim = kSvmDim;
  const std::size_t n_sv = 1 + rng() % 40;
  for (std::size_t i = 0; i < n_sv * kSvmDim; ++i) core.support.push_back(random_real(rng, -5, 5));
  for (std::size_t i = 0; i < n_sv; ++i) core.coef.push_back(random_real(rng, -10, 10));
  core.bias = random_real(rng);
  core.gamma = random_real(rng, 1e-3, 2.0);
  core.c = random_real(rng, 0.1, 100.0);
  fc.threshold = random_real(rng, 0.05, 0.95);
  return fc;
}

/// Process Start and Thread Start events for one application tree with the given shape. `depth`
/// counts edges below the root; the root has parent 0.
inline std::vector<Event> tree_fixture(unsigned n, unsigned depth, unsigned leaves, unsigned unique,
                                       unsigned threads, Pid root = 1000) {
  std::vector<Pid> parent(n, 0);
  const auto pid_of = [&](unsigned i) { return root + 4 * i; };
  // Spine 0..depth, then leaves under the root, each optionally behind one internal node.
  for (unsigned i = 1; i <= depth; ++i) parent[i] = pid_of(i - 1);
  const unsigned extra_leaves = leaves - 1;
  const unsigned extra_internal = n - (depth + 1) - extra_leaves;
  unsigned next = depth + 1;
  for (unsigned k = 0; k < extra_internal; ++k) {
    parent[next] = pid_of(0);
    parent[next + 1] = pid_of(next);
    next += 2;
  }
  while (next < n) parent[next++] = pid_of(0);
  std::vector<Event> out;
  Micros ts = 100;
  for (unsigned i = 0; i < n; ++i) {
    const std::string image = "C:\\Apps\\img" + std::to_string(i % unique) + ".exe";
    out.push_back(make_process(EventType::Start, ts++, pid_of(i), parent[i], image, image));
    const unsigned t = threads / n + (i < threads % n ? 1 : 0);
    for (unsigned j = 0; j < t; ++j) out.push_back(make_thread(EventType::Start, ts++, pid_of(i), 10 * j + 1, pid_of(i)));
  }
  return out;
}

/// Prepared synthetic traces: `per_kind` of each archetype (crypto cycles through the patterns).
inline std::vector<PreparedTrace> small_corpus(std::size_t per_kind, std::uint64_t master_seed,
                                               Micros duration = 40'000'000) {
  std::vector<PreparedTrace> out;
  const auto rules = default_rules();
  std::uint64_t counter = 0;
  for (auto a : {Archetype::Crypto, Archetype::Locker, Archetype::BenignCryptoLike, Archetype::BenignSpawner,
                 Archetype::BenignDesktop}) {
    for (std::size_t i = 0; i < per_kind; ++i) {
      SynthConfig cfg;
      cfg.archetype = a;
      cfg.pattern = kAllPatternKinds[i % kAllPatternKinds.size()];
      cfg.seed = derive_seed(master_seed, counter++);
      cfg.duration = duration;
      const auto st = synth_trace(cfg);
      out.push_back(prepare_trace(Trace{st.manifest, st.events}, rules, 5'000'000,
                                  "mem_" + std::to_string(counter)));
    }
  }
  return out;
}

inline FusedClassifier small_model(std::uint64_t master_seed = 1) {
  return train_from_corpus(small_corpus(6, master_seed), 1.0, master_seed);
}

}  // namespace peeler::testing
