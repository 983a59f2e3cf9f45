#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracle.hpp"
#include "peeler/errors.hpp"
#include "peeler/feature_extract.hpp"
#include "peeler/synth.hpp"

using namespace peeler;
namespace fs = std::filesystem;

namespace {

std::string serialize(const SynthTrace& t) {
  std::ostringstream os;
  write_trace(t.manifest, t.events, os);
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SynthConfig crypto(PatternKind k, std::uint64_t seed, unsigned files) {
  SynthConfig c;
  c.archetype = Archetype::Crypto;
  c.pattern = k;
  c.seed = seed;
  c.n_files = files;
  return c;
}

std::size_t lineages_with_instances(const std::vector<Event>& events) {
  testing::PatternOracle oracle;
  oracle.run(events, false);
  std::size_t n = 0;
  for (const auto& f : oracle.files()) n += testing::has_pattern_instance(f.letters, f.objects.size() >= 2);
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

constexpr Archetype kArchetypes[] = {Archetype::Crypto, Archetype::Locker, Archetype::BenignCryptoLike,
                                     Archetype::BenignSpawner, Archetype::BenignDesktop};

}  // namespace

TEST_CASE("same seed gives a byte-identical trace") {
  for (auto a : kArchetypes) {
    SynthConfig cfg;
    cfg.archetype = a;
    cfg.seed = 1234;
    cfg.command_injection = true;
    const auto x = serialize(synth_trace(cfg));
    CHECK(x == serialize(synth_trace(cfg)));
    cfg.seed = 1235;
    CHECK(x != serialize(synth_trace(cfg)));
  }
}

TEST_CASE("generated traces are valid and round-trip") {
  for (auto a : kArchetypes) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      SynthConfig cfg;
      cfg.archetype = a;
      cfg.seed = seed;
      cfg.pattern = kAllPatternKinds[seed % 4];
      cfg.command_injection = seed % 2;
      const auto t = synth_trace(cfg);
      CAPTURE(to_string(a));
      REQUIRE_FALSE(t.events.empty());
      CHECK(t.manifest.event_count == t.events.size());
      CHECK(t.manifest.seed == seed);
      CHECK(t.manifest.duration >= t.events.back().timestamp);
      CHECK(t.manifest.duration >= cfg.duration);
      for (std::size_t i = 0; i < t.events.size(); ++i) {
        CHECK(validate_event(t.events[i]).empty());
        if (i) CHECK(t.events[i].timestamp > t.events[i - 1].timestamp);
      }
      std::istringstream in(serialize(t));
      CHECK(read_trace(in).events == t.events);
    }
  }
}

TEST_CASE("labels, onset and ground truth") {
  for (auto a : kArchetypes) {
    SynthConfig cfg;
    cfg.archetype = a;
    cfg.seed = 77;
    const auto t = synth_trace(cfg);
    const bool malicious = a == Archetype::Crypto || a == Archetype::Locker;
    CHECK(is_ransomware(t.manifest.label) == malicious);
    CHECK(t.manifest.attack_onset.has_value() == malicious);
    CHECK(t.manifest.attack_onset == t.truth.attack_onset);
    if (malicious) {
      CHECK(std::any_of(t.events.begin(), t.events.end(),
                        [&](const Event& e) { return e.timestamp == *t.truth.attack_onset; }));
    }
  }
  const auto c = synth_trace(crypto(PatternKind::FileToFileDelete, 5, 12));
  CHECK(c.manifest.label == Label::Crypto);
  CHECK(c.manifest.family == "crypto:file-to-file-delete");
  CHECK(c.truth.completion_index.size() == 12);
  REQUIRE(c.truth.first_completion_ts);
  CHECK(*c.truth.first_completion_ts >= *c.truth.attack_onset);
  CHECK(c.events[*c.truth.first_completion_index].timestamp == *c.truth.first_completion_ts);
  const auto l = synth_trace([] {
    SynthConfig s;
    s.archetype = Archetype::Locker;
    s.seed = 3;
    return s;
  }());
  CHECK(l.manifest.label == Label::ScreenLocker);
  REQUIRE(l.truth.app_root);
}

TEST_CASE("crypto traces contain a pattern instance per file (oracle)") {
  for (auto k : kAllPatternKinds) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto t = synth_trace(crypto(k, seed, 10));
      CAPTURE(to_string(k));
      CAPTURE(seed);
      CHECK(lineages_with_instances(t.events) >= 10);
    }
  }
}

TEST_CASE("a single encrypted file carries exactly its pattern language") {
  for (auto k : kAllPatternKinds) {
    const auto t = synth_trace(crypto(k, 7, 1));
    testing::PatternOracle oracle;
    oracle.run(t.events, false);
    std::vector<const testing::PatternOracle::File*> hits;
    for (const auto& f : oracle.files())
      if (testing::has_pattern_instance(f.letters, f.objects.size() >= 2)) hits.push_back(&f);
    REQUIRE(hits.size() == 1);
    CAPTURE(hits[0]->letters);
    CHECK(std::regex_match(hits[0]->letters, testing::anchored_re(k)));
  }
}

TEST_CASE("benign traces contain no pattern instance on any lineage (oracle)") {
  for (auto a : {Archetype::BenignCryptoLike, Archetype::BenignSpawner, Archetype::BenignDesktop}) {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      SynthConfig cfg;
      cfg.archetype = a;
      cfg.seed = seed;
      CAPTURE(to_string(a));
      CHECK(lineages_with_instances(synth_trace(cfg).events) == 0);
    }
  }
}

TEST_CASE("compression-like traces never alert over 100 seeds") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    SynthConfig cfg;
    cfg.archetype = Archetype::BenignCryptoLike;
    cfg.seed = seed;
    cfg.n_files = 30;
    const auto t = synth_trace(cfg);
    FileIoMatcher m;
    std::size_t alerts = 0;
    for (const auto& e : t.events) alerts += m.ingest(e).has_value();
    CAPTURE(seed);
    CHECK(alerts == 0);
  }
}

TEST_CASE("process forests match the requested shape") {
  SpawnProfile pycharm{140, 4, 993, 70, 11};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = extract_mlr_features(build_process_tree(synth_process_forest(pycharm, seed)));
    CHECK(f.n_processes == 140);
    CHECK(edge_depth(f) == 4);
    CHECK(f.n_threads_total == 993);
    CHECK(f.n_leaf_nodes == 70);
    CHECK(f.n_unique_image_names == 11);
  }
  SpawnProfile partial{140, 4, 993, std::nullopt, std::nullopt};
  const auto f = extract_mlr_features(build_process_tree(synth_process_forest(partial, 9)));
  CHECK(f.n_processes == 140);
  CHECK(edge_depth(f) == 4);
  CHECK(f.n_threads_total == 993);
  SpawnProfile chrome{42, 1, 1480, 41, 2};
  const auto c = extract_mlr_features(build_process_tree(synth_process_forest(chrome, 1)));
  CHECK(c.n_leaf_nodes == 41);
  CHECK(edge_depth(c) == 1);
  CHECK_THROWS_AS(synth_process_forest(SpawnProfile{5, 10, 5, std::nullopt, std::nullopt}, 1), InvalidConfig);
  CHECK_THROWS_AS(synth_process_forest(SpawnProfile{10, 2, 5, 1, std::nullopt}, 1), InvalidConfig);
}

TEST_CASE("locker forests are wide and spawn-heavy") {
  SynthConfig cfg;
  cfg.archetype = Archetype::Locker;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    const auto t = synth_trace(cfg);
    const auto tree = build_process_tree(t.events);
    const ProcessNode* root = nullptr;
    std::vector<const ProcessNode*> stack;
    for (const auto& r : tree.roots) stack.push_back(&r);
    while (!stack.empty() && !root) {
      const auto* n = stack.back();
      stack.pop_back();
      if (n->pid == *t.truth.app_root) root = n;
      for (const auto& c : n->children) stack.push_back(&c);
    }
    REQUIRE(root);
    ProcessTree sub;
    sub.roots.push_back(*root);
    const auto f = extract_mlr_features(sub);
    CHECK(f.n_processes >= 30);
    CHECK(f.max_depth >= 3);
  }
}

TEST_CASE("command injection draws from the attack templates") {
  const auto templates = attack_command_templates();
  REQUIRE(templates.size() == 24);
  const std::set<std::string_view> all(templates.begin(), templates.end());
  auto injected = [&](const SynthTrace& t) {
    std::vector<std::string> cmds;
    for (const auto& e : t.events)
      if (e.is_process_start() && all.count(e.as<ProcessAttrs>()->command_line)) cmds.push_back(e.as<ProcessAttrs>()->command_line);
    return cmds;
  };
  auto cfg = crypto(PatternKind::MemToFilePostOverwrite, 4, 5);
  CHECK(injected(synth_trace(cfg)).empty());
  cfg.command_injection = true;
  const auto c = injected(synth_trace(cfg));
  CHECK(c.size() >= 1);
  CHECK(c.size() <= 3);

  SynthConfig lk;
  lk.archetype = Archetype::Locker;
  lk.seed = 4;
  lk.command_injection = true;
  const auto l = injected(synth_trace(lk));
  std::set<std::string> locker_cmds;
  for (auto i : locker_command_indices()) locker_cmds.insert(std::string(templates[i]));
  REQUIRE_FALSE(l.empty());
  for (const auto& cmd : l) CHECK(locker_cmds.count(cmd) == 1);
}

TEST_CASE("config validation") {
  auto bad = crypto(PatternKind::MemToFilePostOverwrite, 1, 0);
  CHECK_THROWS_AS(synth_trace(bad), InvalidConfig);
  SynthConfig c;
  c.duration = 10;
  CHECK_THROWS_AS(validate(c), InvalidConfig);
  c = {};
  c.noise.benign_rw_coupling = 2.0;
  CHECK_THROWS_AS(validate(c), InvalidConfig);
  c = {};
  c.intensity = 0.0;
  CHECK_THROWS_AS(validate(c), InvalidConfig);
  c = {};
  c.archetype = Archetype::BenignSpawner;
  c.spawn_profile = SpawnProfile{3, 9, 3, std::nullopt, std::nullopt};
  CHECK_THROWS_AS(synth_trace(c), InvalidConfig);
}

TEST_CASE("archetype spellings round-trip") {
  const char* names[] = {"crypto:post-overwrite", "crypto:pre-overwrite", "crypto:file-to-file-delete",
                         "crypto:file-to-file-rename-delete", "locker", "benign:crypto-like", "benign:spawner",
                         "benign:desktop"};
  for (const char* n : names) {
    const auto a = parse_archetype(n);
    REQUIRE(a);
    CHECK(archetype_name(a->archetype, a->pattern) == n);
  }
  CHECK_FALSE(parse_archetype("crypto"));
  CHECK_FALSE(parse_archetype("benign"));
}

TEST_CASE("corpus expansion and writing") {
  const std::vector<CorpusEntry> spec = {{crypto(PatternKind::MemToFilePreOverwrite, 0, 3), 3},
                                         {[] {
                                            SynthConfig s;
                                            s.archetype = Archetype::BenignDesktop;
                                            s.duration = 5'000'000;
                                            return s;
                                          }(),
                                          3}};
  const auto configs = expand_corpus(spec, 42);
  REQUIRE(configs.size() == 6);
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    CHECK(configs[i].seed == derive_seed(42, i));
    seeds.insert(configs[i].seed);
  }
  CHECK(seeds.size() == 6);
  CHECK(configs[0].archetype == Archetype::Crypto);
  CHECK(configs[5].archetype == Archetype::BenignDesktop);

  TempDir a("peeler_corpus_a"), b("peeler_corpus_b");
  const auto rows = synth_corpus(spec, 42, a.path.string());
  synth_corpus(spec, 42, b.path.string());
  REQUIRE(rows.size() == 6);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a.path)) {
    if (entry.path().filename() == kCorpusIndexName) continue;
    ++files;
    CHECK(slurp(entry.path()) == slurp(b.path / entry.path().filename()));
  }
  CHECK(files == 6);
  CHECK(slurp(a.path / kCorpusIndexName) == slurp(b.path / kCorpusIndexName));

  const auto back = read_corpus_index(a.path.string());
  REQUIRE(back.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back[i].path == rows[i].path);
    CHECK(back[i].label == rows[i].label);
    CHECK(back[i].family == rows[i].family);
    CHECK(back[i].seed == rows[i].seed);
    const auto t = read_trace_file((a.path / back[i].path).string());
    CHECK(t.manifest.seed == back[i].seed);
  }
  CHECK(back[0].label == Label::Crypto);
  CHECK(back[3].label == Label::Benign);
  CHECK_THROWS_AS(read_corpus_index((a.path / "missing").string()), IoError);
}

TEST_CASE("default corpus composition") {
  std::size_t crypto = 0, locker = 0, benign = 0;
  for (const auto& e : default_corpus_spec()) {
    switch (e.config.archetype) {
      case Archetype::Crypto: crypto += e.count; break;
      case Archetype::Locker: locker += e.count; break;
      default: benign += e.count; break;
    }
  }
  CHECK(crypto == 40);
  CHECK(locker == 40);
  CHECK(benign == 120);
}
