#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peeler/event.hpp"
#include "peeler/fileio_matcher.hpp"
#include "peeler/trace_io.hpp"

namespace peeler {

enum class Archetype : std::uint8_t { Crypto, Locker, BenignCryptoLike, BenignSpawner, BenignDesktop };

std::string_view to_string(Archetype a);

/// CLI spellings: `crypto:post-overwrite`, `crypto:pre-overwrite`, `crypto:file-to-file-delete`,
/// `crypto:file-to-file-rename-delete`, `locker`, `benign:crypto-like`, `benign:spawner`,
/// `benign:desktop`.
struct ArchetypeChoice {
  Archetype archetype;
  PatternKind pattern = PatternKind::MemToFilePostOverwrite;
};
std::optional<ArchetypeChoice> parse_archetype(std::string_view s);
std::string archetype_name(Archetype a, PatternKind k);

/// Exact shape of a generated process forest. `depth` is in edges below the application root,
/// so a root with only direct children has depth 1.
struct SpawnProfile {
  unsigned n_processes = 44;
  unsigned depth = 3;
  unsigned n_threads = 300;
  std::optional<unsigned> n_leaves;
  std::optional<unsigned> n_unique_images;
};

/// Extra independent events of the second member of each correlated pair, as a standard deviation
/// (events per 5 s block) of a folded Gaussian. They weaken the otherwise near-linear couplings.
struct NoiseKnobs {
  double extra_writes = 0.0;
  double extra_unloads = 0.0;
  double extra_loads = 0.0;
  double extra_thread_ends = 0.0;
  /// Share of benign file I/O driven by a common activity level instead of independent draws.
  double benign_rw_coupling = 0.0;

  bool operator==(const NoiseKnobs&) const = default;
};

/// Frozen output of the calibration loop for the default corpus.
NoiseKnobs default_noise();

struct SynthConfig {
  std::uint64_t seed = 1;
  Archetype archetype = Archetype::BenignDesktop;
  PatternKind pattern = PatternKind::MemToFilePostOverwrite;  // crypto only
  unsigned n_files = 20;
  std::optional<SpawnProfile> spawn_profile;
  Micros duration = 40'000'000;
  bool command_injection = false;
  /// Multiplier on background event rates.
  double intensity = 1.0;
  NoiseKnobs noise = default_noise();
};

/// Throws InvalidConfig.
void validate(const SynthConfig& cfg);

struct GroundTruth {
  std::optional<Micros> attack_onset;
  /// Root pid of the generated application or locker forest, when there is one.
  std::optional<Pid> app_root;
  /// Index (into the event list) of the last event of each encrypted file's pattern instance.
  std::vector<std::size_t> completion_index;
  std::optional<std::size_t> first_completion_index;
  std::optional<Micros> first_completion_ts;
};

struct SynthTrace {
  TraceManifest manifest;
  std::vector<Event> events;
  GroundTruth truth;
};

SynthTrace synth_trace(const SynthConfig& cfg);

/// Builds the forest alone: events are Process Start (+ Thread Start) for one application root.
std::vector<Event> synth_process_forest(const SpawnProfile& profile, std::uint64_t seed,
                                        std::string_view root_image = "app.exe");

/// The attack command lines the synthesizer injects (vssadmin, bcdedit, reg, ...), in a fixed order.
std::span<const std::string_view> attack_command_templates();
/// Indices into attack_command_templates() used by screen lockers (registry tampering).
std::span<const std::size_t> locker_command_indices();

struct CorpusEntry {
  SynthConfig config;
  std::size_t count = 1;
};

struct CorpusIndexRow {
  std::string path;  // relative to the corpus directory
  Label label = Label::Unknown;
  std::string family;
  std::uint64_t seed = 0;
};

/// Per-trace seed derived from the master seed and a running counter.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter);

/// Expands entries into per-trace configs with derived seeds, in order.
std::vector<SynthConfig> expand_corpus(std::span<const CorpusEntry> spec, std::uint64_t master_seed);

/// 40 crypto (10 per pattern) / 40 locker / 120 benign (40 of each benign profile).
std::vector<CorpusEntry> default_corpus_spec(const NoiseKnobs& noise = default_noise());

inline constexpr std::string_view kCorpusIndexName = "index.txt";

/// Writes trace files and `index.txt` (`path | label | family | seed`). Throws IoError.
std::vector<CorpusIndexRow> synth_corpus(std::span<const CorpusEntry> spec, std::uint64_t master_seed,
                                         const std::string& dir);

/// Reads `index.txt`. Throws IoError or ParseError.
std::vector<CorpusIndexRow> read_corpus_index(const std::string& dir);

struct CalibrationTarget {
  std::array<double, 4> ransomware{0.9433, 0.9451, 0.9476, 0.9560};
  double benign_read_write = 0.35;
};

struct CalibrationResult {
  NoiseKnobs knobs;
  std::array<double, 4> ransomware{};
  double benign_read_write = 0.0;
  std::size_t rounds = 0;
};

/// Pooled per-window event-pair correlations of the default corpus under `knobs`.
CalibrationResult measure_corpus_correlations(const NoiseKnobs& knobs, std::uint64_t master_seed,
                                              Micros window_len = 5'000'000);

/// Bisects each knob independently until its pair lands on the target.
CalibrationResult calibrate_noise(const CalibrationTarget& target, std::uint64_t master_seed,
                                  std::size_t rounds = 18);

}  // namespace peeler
