#include "peeler/fileio_matcher.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <map>

namespace peeler {

namespace {

// Hand-written NFAs for the four acceptors. Each entry lists (from, letter, to).
struct Edge {
  int from;
  char letter;
  int to;
};

struct Nfa {
  int states;
  std::vector<Edge> edges;
  std::vector<int> accept;
};

// C (R+ W+ R*)+ N D C
const Nfa kPostNfa{8,
                   {{0, 'C', 1},
                    {1, 'R', 2},
                    {2, 'R', 2},
                    {2, 'W', 3},
                    {3, 'W', 3},
                    {3, 'R', 4},  // trailing R* or the next cycle's R+
                    {3, 'N', 5},
                    {4, 'R', 4},
                    {4, 'W', 3},
                    {4, 'N', 5},
                    {5, 'D', 6},
                    {6, 'C', 7}},
                   {7}};

// C N D C (R+ W+ R*)+
const Nfa kPreNfa{8,
                  {{0, 'C', 1},
                   {1, 'N', 2},
                   {2, 'D', 3},
                   {3, 'C', 4},
                   {4, 'R', 5},
                   {5, 'R', 5},
                   {5, 'W', 6},
                   {6, 'W', 6},
                   {6, 'R', 7},
                   {7, 'R', 7},
                   {7, 'W', 6}},
                  {6, 7}};

// C+ (R+ C? W+ R*)+ D
const Nfa kF2fDeleteNfa{7,
                        {{0, 'C', 1},
                         {1, 'C', 1},
                         {1, 'R', 2},
                         {2, 'R', 2},
                         {2, 'C', 3},
                         {2, 'W', 4},
                         {3, 'W', 4},
                         {4, 'W', 4},
                         {4, 'R', 5},
                         {4, 'D', 6},
                         {5, 'R', 5},
                         {5, 'C', 3},
                         {5, 'W', 4},
                         {5, 'D', 6}},
                        {6}};

// C+ (R+ C? W+ R*)+ N D C
const Nfa kF2fRenameNfa{9,
                        {{0, 'C', 1},
                         {1, 'C', 1},
                         {1, 'R', 2},
                         {2, 'R', 2},
                         {2, 'C', 3},
                         {2, 'W', 4},
                         {3, 'W', 4},
                         {4, 'W', 4},
                         {4, 'R', 5},
                         {4, 'N', 6},
                         {5, 'R', 5},
                         {5, 'C', 3},
                         {5, 'W', 4},
                         {5, 'N', 6},
                         {6, 'D', 7},
                         {7, 'C', 8}},
                        {8}};

const Nfa& nfa_for(PatternKind k) {
  switch (k) {
    case PatternKind::MemToFilePostOverwrite:
      return kPostNfa;
    case PatternKind::MemToFilePreOverwrite:
      return kPreNfa;
    case PatternKind::FileToFileDelete:
      return kF2fDeleteNfa;
    case PatternKind::FileToFileRenameDelete:
      return kF2fRenameNfa;
  }
  return kPostNfa;
}

constexpr char kLetters[5] = {'C', 'R', 'W', 'N', 'D'};

}  // namespace

struct DfaBuilder {
  // Subset construction. With `search` the start state is re-injected after every letter.
  static LetterDfa build(const Nfa& nfa, bool search) {
    using Set = std::uint32_t;
    std::map<Set, std::uint8_t> ids;
    std::vector<Set> sets;
    LetterDfa dfa;
    auto intern = [&](Set s) -> std::uint8_t {
      if (s == 0) return LetterDfa::kDead;
      auto it = ids.find(s);
      if (it != ids.end()) return it->second;
      const auto id = static_cast<std::uint8_t>(sets.size());
      ids.emplace(s, id);
      sets.push_back(s);
      dfa.next_.push_back({});
      bool acc = false;
      for (int a : nfa.accept)
        if (s & (Set{1} << a)) acc = true;
      dfa.accept_.push_back(acc);
      return id;
    };
    intern(Set{1});
    for (std::size_t i = 0; i < sets.size(); ++i) {
      for (int l = 0; l < 5; ++l) {
        Set to = 0;
        for (const auto& e : nfa.edges)
          if (e.letter == kLetters[l] && (sets[i] & (Set{1} << e.from))) to |= Set{1} << e.to;
        if (search) to |= Set{1};
        dfa.next_[i][l] = intern(to);
      }
    }
    return dfa;
  }
};

int letter_index(char letter) {
  switch (letter) {
    case 'C':
      return 0;
    case 'R':
      return 1;
    case 'W':
      return 2;
    case 'N':
      return 3;
    case 'D':
      return 4;
    default:
      return -1;
  }
}

std::uint8_t LetterDfa::step(std::uint8_t state, char letter) const {
  const int l = letter_index(letter);
  if (state == kDead || l < 0) return kDead;
  return next_[state][static_cast<std::size_t>(l)];
}

const LetterDfa& LetterDfa::anchored(PatternKind k) {
  static const std::array<LetterDfa, kPatternKindCount> dfas = [] {
    std::array<LetterDfa, kPatternKindCount> out;
    for (auto kind : kAllPatternKinds)
      out[static_cast<std::size_t>(kind)] = DfaBuilder::build(nfa_for(kind), false);
    return out;
  }();
  return dfas[static_cast<std::size_t>(k)];
}

const LetterDfa& LetterDfa::search(PatternKind k) {
  static const std::array<LetterDfa, kPatternKindCount> dfas = [] {
    std::array<LetterDfa, kPatternKindCount> out;
    for (auto kind : kAllPatternKinds)
      out[static_cast<std::size_t>(kind)] = DfaBuilder::build(nfa_for(kind), true);
    return out;
  }();
  return dfas[static_cast<std::size_t>(k)];
}

std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::MemToFilePostOverwrite:
      return "MemToFilePostOverwrite";
    case PatternKind::MemToFilePreOverwrite:
      return "MemToFilePreOverwrite";
    case PatternKind::FileToFileDelete:
      return "FileToFileDelete";
    case PatternKind::FileToFileRenameDelete:
      return "FileToFileRenameDelete";
  }
  return "?";
}

std::optional<PatternKind> parse_pattern_kind(std::string_view s) {
  for (auto k : kAllPatternKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

bool requires_multi_file(PatternKind k) {
  return k == PatternKind::FileToFileDelete || k == PatternKind::FileToFileRenameDelete;
}

std::string_view pattern_regex(PatternKind k) {
  switch (k) {
    case PatternKind::MemToFilePostOverwrite:
      return "C(R+W+R*)+NDC";
    case PatternKind::MemToFilePreOverwrite:
      return "CNDC(R+W+R*)+";
    case PatternKind::FileToFileDelete:
      return "C+(R+C?W+R*)+D";
    case PatternKind::FileToFileRenameDelete:
      return "C+(R+C?W+R*)+NDC";
  }
  return "";
}

std::optional<PatternKind> match_letters(std::string_view letters, bool multi_file) {
  for (auto k : kAllPatternKinds) {
    if (requires_multi_file(k) && !multi_file) continue;
    const auto& dfa = LetterDfa::anchored(k);
    std::uint8_t s = dfa.start();
    for (char c : letters) {
      s = dfa.step(s, c);
      if (s == LetterDfa::kDead) break;
    }
    if (dfa.accepting(s)) return k;
  }
  return std::nullopt;
}

std::size_t FileEventsList::unique_etypes() const {
  return static_cast<std::size_t>(std::popcount(etype_mask));
}

std::string FileEventsList::letters() const {
  std::string out;
  out.reserve(events.size());
  for (const auto& le : events) out.push_back(le.letter);
  return out;
}

std::string normalize_path(std::string_view path) {
  std::string out(path);
  for (auto& c : out) {
    if (c == '/') c = '\\';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string parent_dir(std::string_view normalized) {
  const auto pos = normalized.find_last_of('\\');
  if (pos == std::string_view::npos) return {};
  return std::string(normalized.substr(0, pos));
}

namespace {

std::string image_stem(std::string_view image) {
  const auto pos = image.find_last_of("\\/");
  if (pos != std::string_view::npos) image.remove_prefix(pos + 1);
  std::string out(image);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Names that extend a known name by appended extensions ("x" -> "x.enc") share its lineage.
std::vector<std::string> lineage_prefixes(const std::string& normalized) {
  std::vector<std::string> out;
  const auto slash = normalized.find_last_of('\\');
  const std::size_t base = slash == std::string::npos ? 0 : slash + 1;
  std::size_t end = normalized.size();
  while (true) {
    const auto dot = normalized.find_last_of('.', end == 0 ? 0 : end - 1);
    if (dot == std::string::npos || dot <= base) break;
    out.push_back(normalized.substr(0, dot));
    end = dot;
  }
  return out;
}

}  // namespace

FileIoMatcher::FileIoMatcher(MatcherConfig cfg) : cfg_(cfg) {}

std::optional<IdentityId> FileIoMatcher::first_of(const Index& idx, Key k) {
  auto it = idx.find(k);
  if (it == idx.end() || it->second.empty()) return std::nullopt;
  return it->second.front();
}

std::optional<IdentityId> FileIoMatcher::first_of(const NameIndex& idx, const std::string& k) {
  auto it = idx.find(k);
  if (it == idx.end() || it->second.empty()) return std::nullopt;
  return it->second.front();
}

// Each key maps to the ascending list of identities that contain it; lookups take the oldest.
template <class Idx, class K>
void FileIoMatcher::register_in(Idx& idx, const K& k, IdentityId id) {
  auto& ids = idx[k];
  auto pos = std::lower_bound(ids.begin(), ids.end(), id);
  if (pos == ids.end() || *pos != id) ids.insert(pos, id);
}

template <class Idx, class K>
void FileIoMatcher::unregister_from(Idx& idx, const K& k, IdentityId id) {
  auto it = idx.find(k);
  if (it == idx.end()) return;
  auto& ids = it->second;
  ids.erase(std::remove(ids.begin(), ids.end(), id), ids.end());
  if (ids.empty()) idx.erase(it);
}

IdentityId FileIoMatcher::create_identity() {
  const IdentityId id = next_id_++;
  auto& l = lists_[id];
  l.identity.id = id;
  for (auto k : kAllPatternKinds) l.dfa_state[static_cast<std::size_t>(k)] = LetterDfa::search(k).start();
  return id;
}

IdentityId FileIoMatcher::resolve_identity(const Event& e) {
  std::optional<IdentityId> hit;
  if (const auto* fn = e.as<FileNameAttrs>()) {
    const std::string name = normalize_path(fn->file_name);
    hit = first_of(by_object_, fn->file_object);
    if (!hit) hit = first_of(by_name_, name);
    if (!hit) {
      for (const auto& prefix : lineage_prefixes(name)) {
        hit = first_of(by_name_, prefix);
        if (hit) break;
      }
    }
    const IdentityId id = hit ? *hit : create_identity();
    auto& ident = lists_.at(id).identity;
    if (ident.file_objects.insert(fn->file_object).second) register_in(by_object_, fn->file_object, id);
    if (ident.file_names.insert(name).second) register_in(by_name_, name, id);
    return id;
  }

  Key file_key = 0, file_object = 0;
  if (const auto* rw = e.as<FileRwAttrs>()) {
    file_key = rw->file_key;
    file_object = rw->file_object;
  } else if (const auto* rd = e.as<FileRenDelAttrs>()) {
    file_key = rd->file_key;
    file_object = rd->file_object;
  }
  hit = first_of(by_object_, file_key);
  if (!hit) hit = first_of(by_object_, file_object);
  if (!hit) hit = first_of(by_key_, file_key);
  const IdentityId id = hit ? *hit : create_identity();
  auto& ident = lists_.at(id).identity;
  if (ident.file_keys.insert(file_key).second) register_in(by_key_, file_key, id);
  if (ident.file_objects.insert(file_object).second) register_in(by_object_, file_object, id);
  return id;
}

bool FileIoMatcher::is_exempt_pid(Pid pid) const {
  if (pid == kSystemPid) return true;
  auto it = images_.find(pid);
  if (it == images_.end()) return false;
  return it->second == "system" || it->second == "explorer.exe";
}

bool FileIoMatcher::stage3_filter(const FileEventsList& list, PatternKind) const {
  if (list.mixed_dirs) return false;
  std::size_t actors = 0;
  for (Pid p : list.contributing_pids)
    if (!is_exempt_pid(p)) ++actors;
  return actors <= 1;
}

const FileEventsList* FileIoMatcher::list(IdentityId id) const {
  auto it = lists_.find(id);
  return it == lists_.end() ? nullptr : &it->second;
}

void FileIoMatcher::sweep(Micros now) {
  for (auto it = lists_.begin(); it != lists_.end();) {
    const auto& l = it->second;
    const bool idle_events =
        cfg_.idle_horizon_events != 0 && seq_ - l.last_seen_seq > cfg_.idle_horizon_events;
    const bool idle_time = cfg_.idle_horizon_time != 0 && now > l.last_seen_ts &&
                           now - l.last_seen_ts > cfg_.idle_horizon_time;
    if (idle_events || idle_time) {
      const auto id = it->first;
      for (Key k : l.identity.file_objects) unregister_from(by_object_, k, id);
      for (Key k : l.identity.file_keys) unregister_from(by_key_, k, id);
      for (const auto& n : l.identity.file_names) unregister_from(by_name_, n, id);
      it = lists_.erase(it);
    } else {
      ++it;
    }
  }
}

std::optional<Alert> FileIoMatcher::ingest(const Event& e) {
  if (e.provider != Provider::File) {
    if (e.is_process_start())
      if (const auto* pa = e.as<ProcessAttrs>()) images_[e.pid] = image_stem(pa->image_file_name);
    return std::nullopt;
  }
  const auto letter = pattern_letter(e);
  if (!letter) return std::nullopt;

  ++seq_;
  if (cfg_.sweep_interval != 0 && seq_ % cfg_.sweep_interval == 0) sweep(e.timestamp);

  const IdentityId id = resolve_identity(e);
  auto& l = lists_.at(id);
  l.events.push_back({e, *letter});
  l.contributing_pids.insert(e.pid);
  l.etype_mask = static_cast<std::uint16_t>(l.etype_mask | (1u << static_cast<unsigned>(e.etype)));
  l.last_seen_seq = seq_;
  l.last_seen_ts = e.timestamp;
  if (const auto* fn = e.as<FileNameAttrs>()) {
    auto dir = parent_dir(normalize_path(fn->file_name));
    if (!l.first_dir)
      l.first_dir = std::move(dir);
    else if (dir != *l.first_dir)
      l.mixed_dirs = true;
  }
  for (auto k : kAllPatternKinds) {
    auto& s = l.dfa_state[static_cast<std::size_t>(k)];
    s = LetterDfa::search(k).step(s, *letter);
  }

  if (l.matched || l.unique_etypes() < cfg_.min_unique_etypes) return std::nullopt;

  const bool multi_file = l.identity.file_objects.size() >= 2;
  std::optional<PatternKind> candidate;
  for (auto k : kAllPatternKinds) {
    if (requires_multi_file(k) && !multi_file) continue;
    if (LetterDfa::search(k).accepting(l.dfa_state[static_cast<std::size_t>(k)])) {
      candidate = k;
      break;
    }
  }
  if (!candidate || !stage3_filter(l, *candidate)) return std::nullopt;

  l.matched = candidate;
  Pid offender = e.pid;
  for (Pid p : l.contributing_pids)
    if (!is_exempt_pid(p)) offender = p;
  return Alert{DetectorKind::FileIoPattern, offender, std::string(to_string(*candidate)),
               e.timestamp, e.timestamp};
}

}  // namespace peeler
