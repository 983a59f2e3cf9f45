#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "peeler/event.hpp"

namespace peeler {

enum class PatternKind : std::uint8_t {
  MemToFilePostOverwrite,
  MemToFilePreOverwrite,
  FileToFileDelete,
  FileToFileRenameDelete,
};

inline constexpr std::size_t kPatternKindCount = 4;
inline constexpr std::array<PatternKind, kPatternKindCount> kAllPatternKinds = {
    PatternKind::MemToFilePostOverwrite, PatternKind::MemToFilePreOverwrite,
    PatternKind::FileToFileDelete, PatternKind::FileToFileRenameDelete};

std::string_view to_string(PatternKind k);
std::optional<PatternKind> parse_pattern_kind(std::string_view s);
/// File-to-File kinds need at least two file objects in the identity.
bool requires_multi_file(PatternKind k);

/// Regular expression of each acceptor over the alphabet {C,R,W,N,D}:
///   post-overwrite   C(R+W+R*)+NDC
///   pre-overwrite    CNDC(R+W+R*)+
///   file-to-file/del C+(R+C?W+R*)+D
///   file-to-file/ren C+(R+C?W+R*)+NDC
std::string_view pattern_regex(PatternKind k);

/// Deterministic automaton over the five-letter alphabet. State 0 is the start state and
/// kDead absorbs every letter.
class LetterDfa {
 public:
  static constexpr std::uint8_t kDead = 0xFF;

  std::uint8_t start() const { return 0; }
  std::uint8_t step(std::uint8_t state, char letter) const;
  bool accepting(std::uint8_t state) const { return state != kDead && accept_[state]; }
  std::size_t size() const { return next_.size(); }

  /// Anchored automaton for the pattern language.
  static const LetterDfa& anchored(PatternKind k);
  /// Automaton for Σ*L: accepts whenever some suffix of the input is in L.
  static const LetterDfa& search(PatternKind k);

 private:
  friend struct DfaBuilder;
  std::vector<std::array<std::uint8_t, 5>> next_;
  std::vector<bool> accept_;
};

int letter_index(char letter);

/// First pattern whose acceptor matches the whole sequence; File-to-File kinds only when
/// multi_file is set.
std::optional<PatternKind> match_letters(std::string_view letters, bool multi_file);

using IdentityId = std::uint64_t;

struct FileIdentity {
  IdentityId id = 0;
  std::set<Key> file_objects;
  std::set<std::string> file_names;  // normalized paths
  std::set<Key> file_keys;
};

struct LetteredEvent {
  Event event;
  char letter = 0;
};

struct FileEventsList {
  FileIdentity identity;
  std::vector<LetteredEvent> events;
  std::set<Pid> contributing_pids;
  std::optional<PatternKind> matched;

  // Incremental matching state.
  std::uint16_t etype_mask = 0;
  std::array<std::uint8_t, kPatternKindCount> dfa_state{};
  std::optional<std::string> first_dir;
  bool mixed_dirs = false;
  std::uint64_t last_seen_seq = 0;
  Micros last_seen_ts = 0;

  std::size_t unique_etypes() const;
  std::string letters() const;
};

/// Lowercase, '/' unified to '\\'.
std::string normalize_path(std::string_view path);
/// Parent directory of a normalized path ("" when there is none).
std::string parent_dir(std::string_view normalized);

struct MatcherConfig {
  std::size_t min_unique_etypes = 4;
  /// Identities idle for longer than either horizon are evicted (0 disables that horizon).
  std::uint64_t idle_horizon_events = 1'000'000;
  Micros idle_horizon_time = 600'000'000;
  std::uint64_t sweep_interval = 65'536;
};

/// Streaming file-I/O pattern matcher. Single-owner state; not thread-safe.
class FileIoMatcher {
 public:
  explicit FileIoMatcher(MatcherConfig cfg = {});

  /// Non-File events only feed the pid → image registry (Process/Start).
  std::optional<Alert> ingest(const Event& e);

  /// Resolves (and registers) the identity a File event belongs to.
  IdentityId resolve_identity(const Event& e);

  /// Stage-3 false-positive filter: true keeps the alert.
  bool stage3_filter(const FileEventsList& list, PatternKind candidate) const;
  bool is_exempt_pid(Pid pid) const;

  const FileEventsList* list(IdentityId id) const;
  std::size_t identity_count() const { return lists_.size(); }
  std::uint64_t events_seen() const { return seq_; }

 private:
  using Index = std::unordered_map<Key, std::vector<IdentityId>>;
  using NameIndex = std::unordered_map<std::string, std::vector<IdentityId>>;

  static std::optional<IdentityId> first_of(const Index& idx, Key k);
  static std::optional<IdentityId> first_of(const NameIndex& idx, const std::string& k);
  template <class Idx, class K>
  static void register_in(Idx& idx, const K& k, IdentityId id);
  template <class Idx, class K>
  static void unregister_from(Idx& idx, const K& k, IdentityId id);

  IdentityId create_identity();
  void sweep(Micros now);

  MatcherConfig cfg_;
  std::unordered_map<IdentityId, FileEventsList> lists_;
  Index by_object_;
  Index by_key_;
  NameIndex by_name_;
  std::unordered_map<Pid, std::string> images_;
  IdentityId next_id_ = 1;
  std::uint64_t seq_ = 0;
};

}  // namespace peeler
