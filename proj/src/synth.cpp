#include "peeler/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <unordered_set>

#include "peeler/errors.hpp"
#include "peeler/feature_extract.hpp"

namespace peeler {

namespace {

constexpr double kBlock = 5'000'000.0;  // generator block, aligned with the default window

// Engine from the standard library; the distributions are spelled out so output does not depend
// on the library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do v = eng_();
    while (v >= limit);
    return v % n;
  }
  int range(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  bool chance(double p) { return uniform() < p; }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double exponential(double mean) { return -mean * std::log(1.0 - uniform()); }
  unsigned poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda >= 30.0) return static_cast<unsigned>(std::max(0.0, std::round(lambda + std::sqrt(lambda) * normal())));
    const double l = std::exp(-lambda);
    unsigned k = 0;
    double p = uniform();
    while (p > l) {
      ++k;
      p *= uniform();
    }
    return k;
  }
  template <class C>
  const auto& pick(const C& c) {
    return c[below(c.size())];
  }

 private:
  std::mt19937_64 eng_;
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

const std::vector<std::string> kDlls = {
    "C:\\Windows\\System32\\ntdll.dll",    "C:\\Windows\\System32\\kernel32.dll",
    "C:\\Windows\\System32\\KernelBase.dll", "C:\\Windows\\System32\\user32.dll",
    "C:\\Windows\\System32\\gdi32.dll",    "C:\\Windows\\System32\\advapi32.dll",
    "C:\\Windows\\System32\\msvcrt.dll",   "C:\\Windows\\System32\\sechost.dll",
    "C:\\Windows\\System32\\rpcrt4.dll",   "C:\\Windows\\System32\\combase.dll",
    "C:\\Windows\\System32\\ole32.dll",    "C:\\Windows\\System32\\shell32.dll",
    "C:\\Windows\\System32\\shlwapi.dll",  "C:\\Windows\\System32\\ws2_32.dll",
    "C:\\Windows\\System32\\crypt32.dll",  "C:\\Windows\\System32\\bcrypt.dll",
    "C:\\Windows\\System32\\uxtheme.dll",  "C:\\Windows\\System32\\imm32.dll",
    "C:\\Windows\\System32\\version.dll",  "C:\\Windows\\System32\\winhttp.dll"};

struct HelperImage {
  const char* image;
  const char* args;
};

const std::vector<HelperImage> kHelpers = {
    {"C:\\Windows\\System32\\conhost.exe", "0xffffffff -ForceV1"},
    {"C:\\Windows\\System32\\backgroundTaskHost.exe", "-ServerName:BackgroundTaskHost.WebAccountProvider"},
    {"C:\\Windows\\System32\\SearchProtocolHost.exe", "Global\\UsGthrFltPipeMssGthrPipe1 Global\\UsGthrCtrlFltPipeMssGthrPipe1"},
    {"C:\\Windows\\System32\\RuntimeBroker.exe", "-Embedding"},
    {"C:\\Windows\\System32\\dllhost.exe", "/Processid:{AB8902B4-09CA-4BB6-B78D-A8F59079A8D5}"},
    {"C:\\Windows\\System32\\taskhostw.exe", "Install $(Arg0)"},
    {"C:\\Windows\\System32\\smartscreen.exe", "-Embedding"},
    {"C:\\Windows\\System32\\audiodg.exe", "0x4a0"}};

const std::vector<std::string> kUserDirs = {
    "C:\\Users\\user\\Documents", "C:\\Users\\user\\Documents\\Projects", "C:\\Users\\user\\Music",
    "C:\\Users\\user\\Pictures",  "C:\\Users\\user\\Pictures\\Trip",       "C:\\Users\\user\\Desktop",
    "C:\\Users\\user\\Videos"};

const std::vector<std::string> kStems = {"report", "invoice", "budget", "thesis", "notes", "summary",
                                         "photo", "holiday", "track", "letter", "contract", "draft",
                                         "scan", "slides", "plan", "minutes", "resume", "poster"};
const std::vector<std::string> kExts = {".docx", ".xlsx", ".pdf", ".txt", ".jpg", ".png", ".mp3", ".pptx", ".wav"};

const std::vector<std::string> kAppDataFiles = {
    "C:\\Users\\user\\AppData\\Local\\Microsoft\\Windows\\Explorer\\thumbcache_256.db",
    "C:\\Users\\user\\AppData\\Local\\Google\\Chrome\\User Data\\Default\\History",
    "C:\\Users\\user\\AppData\\Local\\Google\\Chrome\\User Data\\Default\\Cache\\data_1",
    "C:\\Users\\user\\AppData\\Local\\Microsoft\\Outlook\\user.ost",
    "C:\\Users\\user\\AppData\\Roaming\\Microsoft\\Windows\\Recent\\AutomaticDestinations\\f01b4d95cf55d32a.automaticDestinations-ms",
    "C:\\ProgramData\\Microsoft\\Search\\Data\\Applications\\Windows\\Windows.edb",
    "C:\\Users\\user\\AppData\\Local\\Temp\\setup.log",
    "C:\\Windows\\System32\\config\\SOFTWARE"};

constexpr std::string_view kTemplates[] = {
    "vssadmin.exe delete shadows /all /quiet",
    "bcdedit.exe /set {default} recoveryenabled No",
    "bcdedit.exe /set {default} bootstatuspolicy ignoreallfailures",
    "powershell.exe -e Get-WmiObject Win32_Shadowcopy | ForEach-Object{$_.Delete();}",
    "taskkill /t /f /im mal.exe",
    "del mal.exe",
    "reg add HKCU\\Software\\Microsoft\\Windows\\CurrentVersion\\Explorer\\Advanced /f /v HideFileExt /t REG_DWORD /d 1",
    "reg add HKCU\\Software\\Microsoft\\Windows\\CurrentVersion\\Explorer\\Advanced /f /v Hidden /t REG_DWORD /d 2",
    "reg add HKCU\\Software\\Microsoft\\Windows\\CurrentVersion\\Explorer\\Advanced /f /v EnableLUA /d 0 /tREG_DWORD /f",
    "reg add HKCU\\Control Panel\\Desktop /v Wallpaper /t REG_SZ /d PathtoRansomNoteImage /f",
    "reg add HKCU\\Control Panel\\Desktop /v WallpaperStyle /t REG_SZ /d \"0\" /f",
    "reg add HKCU\\Control Panel\\Desktop /v TileWallpaper /t REG_SZ /d \"0\" /f",
    "powershell.exe -ExecutionPolicy Restricted -Command Write-Host 'Final result: 1';",
    "powershell.exe Set-MpPreference -DisableArchiveScanning $true;",
    "powershell.exe Set-MpPreference -DisableBlockAtFirstSeen $true;",
    "icacls Path /deny *S-1-1-0:(OI)(CI)(DE,DC)",
    "icacls . /grant Everyone:F /T /C /Q",
    "notepad.exe C:\\Users\\USER\\Music\\# RESTORING FILES #.TXT",
    "cscript  C:\\Users\\kim105\\AppData\\Local\\Temp/SUwk.vbs",
    "wmic.exe shadowcopy delete",
    "net.exe stop vss",
    "net.exe stop McAfeeDLPAgentService /y",
    "schtasks  /create /sc onlogon /tn TASK_NAME /rl highest /tr PATH_TO_EXE",
    "vssadmin.exe resize shadowstorage /for=c: /on=c: /maxsize=401MB"};

constexpr std::size_t kLockerCommands[] = {6, 7, 8};

std::string utility_image(std::string_view cmd) {
  auto end = cmd.find(' ');
  std::string exe(cmd.substr(0, end));
  if (exe.find('.') == std::string::npos) exe += ".exe";
  return "C:\\Windows\\System32\\" + exe;
}

std::string random_word(Rng& rng, int len, bool upper_mix = false) {
  static constexpr char kLower[] = "abcdefghijklmnopqrstuvwxyz";
  static constexpr char kMixed[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  std::string s;
  for (int i = 0; i < len; ++i) s.push_back(upper_mix ? kMixed[rng.below(62)] : kLower[rng.below(26)]);
  return s;
}

std::string hex_word(Rng& rng, int len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (int i = 0; i < len; ++i) s.push_back(kHex[rng.below(16)]);
  return s;
}

// ---- forest shape ---------------------------------------------------------------------------

struct ShapeNode {
  int parent = -1;
  unsigned depth = 0;
  std::string image;
  unsigned threads = 0;
  bool leaf = true;
};

std::vector<ShapeNode> forest_shape(const SpawnProfile& p, Rng& rng, const std::string& root_image,
                                    const std::vector<std::string>& image_pool) {
  const unsigned n = p.n_processes, d = p.depth;
  if (n == 0) throw InvalidConfig("spawn profile needs at least one process");
  if (n < d + 1) throw InvalidConfig("spawn profile: depth needs at least depth+1 processes");
  const unsigned extra = n - d - 1;
  // Leaves hung off the spine give room for chains of length up to depth-1 below them.
  auto feasible = [&](unsigned leaves) {
    if (leaves < 1 || leaves > n - d) return false;
    if (d == 0) return n == 1;
    const unsigned phase2 = extra - (leaves - 1);
    return std::uint64_t(leaves - 1) * (d - 1) >= phase2;
  };
  unsigned leaves;
  if (p.n_leaves) {
    leaves = *p.n_leaves;
    if (!feasible(leaves)) throw InvalidConfig("spawn profile: leaf count infeasible for size and depth");
  } else {
    unsigned lo = 1;
    while (lo <= n - d && !feasible(lo)) ++lo;
    if (lo > n - d) throw InvalidConfig("spawn profile infeasible");
    leaves = lo + static_cast<unsigned>(rng.below(n - d - lo + 1));
  }

  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<ShapeNode> nodes;
    for (unsigned i = 0; i <= d; ++i) {
      nodes.push_back({i == 0 ? -1 : int(i) - 1, i, {}, 0, true});
      if (i > 0) nodes[i - 1].leaf = false;
    }
    for (unsigned k = 0; k + 1 < leaves; ++k) {
      int parent = 0;
      if (attempt == 0 && d >= 2 && !rng.chance(0.7)) parent = static_cast<int>(rng.below(d - 1));
      nodes.push_back({parent, nodes[parent].depth + 1, {}, 0, true});
    }
    bool ok = true;
    for (unsigned k = 0; k < extra - (leaves - 1); ++k) {
      std::vector<int> open;
      for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].leaf && nodes[i].depth < d) open.push_back(int(i));
      if (open.empty()) {
        ok = false;
        break;
      }
      const int parent = rng.pick(open);
      nodes[parent].leaf = false;
      nodes.push_back({parent, nodes[parent].depth + 1, {}, 0, true});
    }
    if (!ok) continue;

    unsigned unique = p.n_unique_images ? *p.n_unique_images
                                        : 1 + static_cast<unsigned>(rng.below(std::min<unsigned>(n, 5)));
    if (unique < 1 || unique > n) throw InvalidConfig("spawn profile: unique image count out of range");
    std::vector<std::string> names{root_image};
    for (std::size_t k = 0; names.size() < unique; ++k) {
      std::string cand = k < image_pool.size() ? image_pool[k] : "C:\\Program Files\\App\\bin\\helper" + std::to_string(k) + ".exe";
      if (std::find(names.begin(), names.end(), cand) == names.end()) names.push_back(cand);
    }
    std::vector<std::size_t> order(n - 1);
    std::iota(order.begin(), order.end(), 1);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    nodes[0].image = names[0];
    for (std::size_t k = 0; k < order.size(); ++k)
      nodes[order[k]].image = k + 1 < names.size() ? names[k + 1] : rng.pick(names);

    const unsigned threads = p.n_threads;
    if (threads >= n) {
      for (auto& nd : nodes) nd.threads = 1;
      for (unsigned t = n; t < threads; ++t) ++nodes[rng.below(n)].threads;
    } else {
      for (unsigned t = 0; t < threads; ++t) nodes[t == 0 ? 0 : order[t - 1]].threads = 1;
    }
    return nodes;
  }
  throw InvalidConfig("spawn profile infeasible");
}

// ---- trace assembly -------------------------------------------------------------------------

struct Draft {
  double t;
  std::uint64_t order;
  Event e;
  int file = -1;
  bool completes = false;
  bool malicious = false;
};

struct LiveProcess {
  Pid pid;
  std::vector<std::string> dlls;
  std::vector<Tid> threads;
};

class Builder {
 public:
  Builder(const SynthConfig& cfg)
      : cfg_(cfg), rng_(splitmix(cfg.seed)), noise_rng_(splitmix(cfg.seed ^ 0x6E6F697365ull)),
        duration_(static_cast<double>(cfg.duration)) {}

  Rng& rng() { return rng_; }
  double duration() const { return duration_; }

  Pid new_pid() {
    Pid p;
    do p = 4 * (64 + rng_.below(16000));
    while (!pids_.insert(p).second);
    return p;
  }
  Key new_key() {
    Key k;
    do k = 0xFFFF800000000000ull | (rng_.next() & 0x00007FFFFFFFFFF0ull);
    while (!keys_.insert(k).second);
    return k;
  }
  Tid new_tid() { return next_tid_ += 4 * (1 + rng_.below(8)); }

  bool in_range(double t) const { return t >= 0.0 && t < duration_; }

  void add(double t, Event e, int file = -1, bool completes = false, bool malicious = false) {
    if (!in_range(t)) return;
    drafts_.push_back({t, order_++, std::move(e), file, completes, malicious});
  }

  // Starts a process with its image loads and threads; a finite lifetime also emits the teardown.
  Pid spawn(double t, Pid parent, const std::string& image, const std::string& cmdline, unsigned n_loads,
            unsigned n_threads, double lifetime, bool malicious, Pid pid = 0, double thread_life = -1) {
    if (pid == 0) pid = new_pid();
    add(t, make_process(EventType::Start, 0, pid, parent, image, cmdline, 0, 1), -1, false, malicious);
    std::vector<std::string> dlls;
    for (unsigned k = 0; k < n_loads; ++k) {
      dlls.push_back(rng_.pick(kDlls));
      add(t + 200.0 + 300.0 * k, make_image(EventType::Load, 0, pid, dlls.back()), -1, false, malicious);
    }
    const double end = lifetime >= 0 ? t + lifetime : duration_ + 1.0;
    for (unsigned k = 0; k < n_threads; ++k) {
      const double ts = t + 1000.0 + rng_.uniform(0, std::min(400'000.0, std::max(1000.0, (end - t) * 0.3)));
      const Tid tid = new_tid();
      add(ts, make_thread(EventType::Start, 0, pid, tid, parent), -1, false, malicious);
      double te;
      if (thread_life > 0) te = ts + rng_.uniform(0.2, 1.0) * thread_life;
      else if (lifetime >= 0) te = end - 2000.0 - rng_.uniform(0, 5000);
      else te = ts + rng_.exponential(60'000'000.0);
      if (te <= ts) te = ts + 500.0;
      if (te < end) add(te, make_thread(EventType::End, 0, pid, tid, parent), -1, false, malicious);
    }
    if (lifetime >= 0 && in_range(end)) {
      add(end, make_process(EventType::End, 0, pid, parent, image, cmdline, 0, 1), -1, false, malicious);
      for (std::size_t k = 0; k < dlls.size(); ++k)
        add(end + 150.0 + 200.0 * double(k), make_image(EventType::Unload, 0, pid, dlls[k]), -1, false, malicious);
    }
    return pid;
  }

  // Long-running processes that exist before the trace starts.
  void background(double io_scale, double helper_rate, bool desktop_files) {
    const double I = cfg_.intensity;
    explorer_ = new_pid();
    hosts_ = {explorer_, new_pid(), new_pid(), new_pid(), new_pid()};
    noise_host_ = new_pid();
    std::vector<std::pair<Key, std::string>> files;
    for (const auto& f : kAppDataFiles) files.emplace_back(new_key(), f);
    std::vector<bool> opened(files.size(), false);
    const Key log_key = new_key();

    const auto blocks = static_cast<std::size_t>(std::ceil(duration_ / kBlock));
    for (std::size_t b = 0; b < blocks; ++b) {
      const double t0 = double(b) * kBlock;
      auto when = [&] { return t0 + rng_.uniform(0, kBlock); };
      const double activity = 0.4 + 1.2 * rng_.uniform();

      for (unsigned k = rng_.poisson(helper_rate * I * activity); k > 0; --k) {
        const auto& h = rng_.pick(kHelpers);
        spawn(when(), rng_.pick(hosts_), h.image, std::string("\"") + h.image + "\" " + h.args,
              static_cast<unsigned>(rng_.range(3, 9)), static_cast<unsigned>(rng_.range(1, 4)),
              rng_.uniform(300'000, 6'000'000), false, 0, 600'000.0);
      }
      for (unsigned k = rng_.poisson(8.0 * I * activity); k > 0; --k) {
        const double ts = when();
        const Pid pid = rng_.pick(hosts_);
        const Tid tid = new_tid();
        add(ts, make_thread(EventType::Start, 0, pid, tid, pid));
        add(ts + rng_.uniform(20'000, 800'000), make_thread(EventType::End, 0, pid, tid, pid));
      }
      for (unsigned k = rng_.poisson(3.0 * I * activity); k > 0; --k) {
        const double ts = when();
        const Pid pid = rng_.pick(hosts_);
        const auto& dll = rng_.pick(kDlls);
        add(ts, make_image(EventType::Load, 0, pid, dll));
        add(ts + rng_.uniform(200'000, 8'000'000), make_image(EventType::Unload, 0, pid, dll));
      }

      // File I/O: a shared activity level couples reads and writes, the remainder is independent.
      const double c = std::clamp(cfg_.noise.benign_rw_coupling, 0.0, 1.0);
      const double shared = rng_.exponential(1.0);
      const double own_r = rng_.exponential(1.0), own_w = rng_.exponential(1.0);
      const double base = io_scale * I;
      const unsigned n_r = rng_.poisson(base * (desktop_files ? 21.0 : 7.0) * (c * shared + (1 - c) * own_r));
      const unsigned n_w = rng_.poisson(base * 4.0 * (c * shared + (1 - c) * own_w));
      auto touch = [&](std::size_t fi, double ts) {
        if (!opened[fi]) {
          opened[fi] = true;
          add(ts - 100.0, make_file_name(EventType::FileCreate, 0, hosts_[fi % hosts_.size()], files[fi].first,
                                         files[fi].second));
        }
      };
      for (unsigned k = 0; k < n_r; ++k) {
        const std::size_t fi = rng_.below(files.size());
        const double ts = when() + 200.0;
        touch(fi, ts);
        add(ts, make_file_rw(EventType::Read, 0, hosts_[fi % hosts_.size()], files[fi].first, files[fi].first,
                             512u << rng_.below(6)));
      }
      for (unsigned k = 0; k < n_w; ++k) {
        const std::size_t fi = rng_.below(files.size());
        const double ts = when() + 200.0;
        touch(fi, ts);
        add(ts, make_file_rw(EventType::Write, 0, hosts_[fi % hosts_.size()], files[fi].first, files[fi].first,
                             512u << rng_.below(6)));
      }
      if (desktop_files && rng_.chance(0.5)) {
        // Editor lock/temp file: created, written, removed.
        const Key k = new_key();
        const double ts = when();
        const auto name = rng_.pick(kUserDirs) + "\\~$" + rng_.pick(kStems) + std::to_string(b) + ".tmp";
        add(ts, make_file_name(EventType::FileCreate, 0, explorer_, k, name));
        for (int w = rng_.range(1, 3); w > 0; --w) add(ts + 1000.0 * w, make_file_rw(EventType::Write, 0, explorer_, k, k, 162));
        add(ts + 400'000, make_file_name(EventType::FileDelete, 0, explorer_, k, name));
      }

      // Calibration noise: one independent extra member per correlated pair.
      const auto& nz = cfg_.noise;
      const double z[4] = {std::abs(noise_rng_.normal()), std::abs(noise_rng_.normal()),
                           std::abs(noise_rng_.normal()), std::abs(noise_rng_.normal())};
      auto nt = [&] { return t0 + noise_rng_.uniform(0, kBlock); };
      for (auto k = std::lround(nz.extra_writes * z[0]); k > 0; --k)
        add(nt(), make_file_rw(EventType::Write, 0, noise_host_, log_key, log_key, 256));
      for (auto k = std::lround(nz.extra_unloads * z[1]); k > 0; --k)
        add(nt(), make_image(EventType::Unload, 0, noise_host_, kDlls[noise_rng_.below(kDlls.size())]));
      for (auto k = std::lround(nz.extra_loads * z[2]); k > 0; --k)
        add(nt(), make_image(EventType::Load, 0, noise_host_, kDlls[noise_rng_.below(kDlls.size())]));
      for (auto k = std::lround(nz.extra_thread_ends * z[3]); k > 0; --k)
        add(nt(), make_thread(EventType::End, 0, noise_host_, 0x10000 + noise_rng_.below(0x10000), noise_host_));
    }
  }

  Pid explorer() const { return explorer_; }

  SynthTrace finish(Label label, std::string family, std::optional<Pid> app_root) {
    std::sort(drafts_.begin(), drafts_.end(),
              [](const Draft& a, const Draft& b) { return a.t != b.t ? a.t < b.t : a.order < b.order; });
    SynthTrace out;
    out.events.reserve(drafts_.size());
    Micros last = 0;
    std::vector<std::optional<std::size_t>> completion;
    for (std::size_t i = 0; i < drafts_.size(); ++i) {
      auto& d = drafts_[i];
      Micros ts = static_cast<Micros>(std::llround(d.t));
      if (i > 0 && ts <= last) ts = last + 1;
      last = ts;
      d.e.timestamp = ts;
      if (d.malicious && !out.truth.attack_onset) out.truth.attack_onset = ts;
      if (d.completes) {
        if (completion.size() <= std::size_t(d.file)) completion.resize(std::size_t(d.file) + 1);
        completion[std::size_t(d.file)] = i;
      }
      out.events.push_back(std::move(d.e));
    }
    for (const auto& c : completion)
      if (c) out.truth.completion_index.push_back(*c);
    if (!out.truth.completion_index.empty()) {
      out.truth.first_completion_index =
          *std::min_element(out.truth.completion_index.begin(), out.truth.completion_index.end());
      out.truth.first_completion_ts = out.events[*out.truth.first_completion_index].timestamp;
    }
    out.truth.app_root = app_root;
    auto& m = out.manifest;
    m.label = label;
    m.family = std::move(family);
    m.seed = cfg_.seed;
    m.event_count = out.events.size();
    m.duration = std::max<Micros>(cfg_.duration, out.events.empty() ? 0 : out.events.back().timestamp);
    m.attack_onset = out.truth.attack_onset;
    return out;
  }

 private:
  const SynthConfig& cfg_;
  Rng rng_;
  Rng noise_rng_;
  double duration_;
  std::vector<Draft> drafts_;
  std::uint64_t order_ = 0;
  std::unordered_set<Pid> pids_{0, 4};
  std::unordered_set<Key> keys_{0};
  Tid next_tid_ = 0x1000;
  Pid explorer_ = 0;
  Pid noise_host_ = 0;
  std::vector<Pid> hosts_;
};

// ---- crypto ---------------------------------------------------------------------------------

// One file's encryption as letters plus the per-letter event factory.
struct FileJob {
  std::string dir;
  std::string name;  // full path
  std::string letters;
};

std::string cycles(Rng& rng, bool first_has_create) {
  // Each cycle moves one chunk: about as many writes as reads.
  std::string s;
  const int n = rng.range(1, 3);
  for (int c = 0; c < n; ++c) {
    const int chunk = rng.range(2, 10);
    s.append(static_cast<std::size_t>(chunk), 'R');
    if (c == 0 && first_has_create) s.push_back('C');
    s.append(static_cast<std::size_t>(std::max(1, chunk + rng.range(-1, 1))), 'W');
    s.append(static_cast<std::size_t>(rng.range(0, 1)), 'R');
  }
  return s;
}

std::string pattern_letters(Rng& rng, PatternKind k) {
  switch (k) {
    case PatternKind::MemToFilePostOverwrite:
      return "C" + cycles(rng, false) + "NDC";
    case PatternKind::MemToFilePreOverwrite:
      return "CNDC" + cycles(rng, false);
    case PatternKind::FileToFileDelete:
      return std::string(static_cast<std::size_t>(rng.range(1, 2)), 'C') + cycles(rng, true) + "D";
    case PatternKind::FileToFileRenameDelete:
      return std::string(static_cast<std::size_t>(rng.range(1, 2)), 'C') + cycles(rng, true) + "NDC";
  }
  return {};
}

std::string new_extension(PatternKind k) {
  switch (k) {
    case PatternKind::FileToFileDelete:
      return ".crypted";
    case PatternKind::FileToFileRenameDelete:
      return ".WNCRYT";
    default:
      return {};
  }
}

void crypto_attack(Builder& b, const SynthConfig& cfg, double onset) {
  auto& rng = b.rng();
  const auto exe_name = random_word(rng, 8, true);
  const auto image = "C:\\Users\\user\\AppData\\Local\\Temp\\" + exe_name + ".exe";
  const Pid r = b.spawn(onset, b.explorer(), image, "\"" + image + "\"", 12, 6, -1, true);

  double t = onset + 30'000.0;
  if (cfg.command_injection) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < std::size(kTemplates); ++i)
      if (std::find(std::begin(kLockerCommands), std::end(kLockerCommands), i) == std::end(kLockerCommands) && i != 17)
        pool.push_back(i);
    for (int k = rng.range(1, 3); k > 0; --k) {
      const auto cmd = std::string(kTemplates[rng.pick(pool)]);
      b.spawn(t, r, utility_image(cmd), cmd, 4, 1, rng.uniform(100'000, 900'000), true);
      t += rng.uniform(20'000, 80'000);
    }
  }

  // Files: unique stems so name lineage never crosses files.
  std::vector<FileJob> jobs;
  std::unordered_set<std::string> used;
  for (unsigned i = 0; i < cfg.n_files; ++i) {
    FileJob j;
    j.dir = rng.pick(kUserDirs);
    std::string stem;
    do stem = rng.pick(kStems) + "_" + std::to_string(rng.range(100, 99999));
    while (!used.insert(stem).second);
    j.name = j.dir + "\\" + stem + rng.pick(kExts);
    j.letters = pattern_letters(rng, cfg.pattern);
    jobs.push_back(std::move(j));
  }

  // Files are processed a few at a time; events of files in flight interleave.
  const double span = std::max(2'000'000.0, (b.duration() - t) * rng.uniform(0.55, 0.9));
  const double per_file = span / std::max(1u, cfg.n_files);
  const unsigned in_flight = static_cast<unsigned>(rng.range(1, 3));
  std::vector<double> lane(in_flight, t + 50'000.0);
  const std::string ransom_ext = "." + hex_word(rng, 4);
  std::unordered_set<std::string> note_dirs;
  std::vector<double> paces(jobs.size());
  for (auto& p : paces) p = rng.uniform(0.15, 2.5);
  const double mean_pace = std::accumulate(paces.begin(), paces.end(), 0.0) / static_cast<double>(paces.size());
  const double lanes_used = static_cast<double>(std::min<std::size_t>(in_flight, jobs.size()));
  const double deadline = b.duration() - 100'000.0;
  for (std::size_t f = 0; f < jobs.size(); ++f) {
    auto& job = jobs[f];
    const auto lane_i = static_cast<std::size_t>(std::min_element(lane.begin(), lane.end()) - lane.begin());
    const double start = std::min(lane[lane_i], deadline - 10'000.0);
    const double gap = paces[f] / mean_pace * per_file * lanes_used / static_cast<double>(job.letters.size() + 1);
    std::vector<double> offsets(job.letters.size());
    double acc = 0.0;
    for (auto& o : offsets) o = acc += rng.uniform(0.3, 1.7) * gap;
    // Every file finishes inside the trace.
    const double squeeze = start + acc > deadline ? (deadline - start) / acc : 1.0;
    double ts = start;
    const Key a = b.new_key();
    Key nb = 0;
    int creates = 0;
    const auto final_name = [&]() -> std::string {
      switch (cfg.pattern) {
        case PatternKind::MemToFilePostOverwrite:
          return job.dir + "\\" + random_word(rng, 10, true) + ransom_ext;
        case PatternKind::MemToFilePreOverwrite:
          return job.dir + "\\" + hex_word(rng, 32) + ".locky";
        case PatternKind::FileToFileRenameDelete:
          return job.name + ".WNCRY";
        default:
          return job.name;
      }
    }();
    bool renamed = false, deleted = false;
    for (std::size_t i = 0; i < job.letters.size(); ++i) {
      ts = start + offsets[i] * squeeze;
      const bool last = i + 1 == job.letters.size();
      const char L = job.letters[i];
      const bool f2f = cfg.pattern == PatternKind::FileToFileDelete || cfg.pattern == PatternKind::FileToFileRenameDelete;
      Event e;
      switch (L) {
        case 'C':
          ++creates;
          if (!renamed && !deleted && (!f2f || nb == 0) && !(f2f && creates > 1 && i > 0 && job.letters[i - 1] == 'R')) {
            e = make_file_name(EventType::FileCreate, 0, r, creates == 1 ? a : b.new_key(), job.name);
          } else if (f2f && nb == 0) {
            nb = b.new_key();
            e = make_file_name(EventType::FileCreate, 0, r, nb, job.name + new_extension(cfg.pattern));
          } else {
            e = make_file_name(EventType::FileCreate, 0, r, f2f ? nb : a, final_name);
          }
          break;
        case 'R':
          e = make_file_rw(EventType::Read, 0, r, a, b.new_key(), 4096u << rng.below(5));
          break;
        case 'W':
          e = make_file_rw(EventType::Write, 0, r, f2f && nb ? nb : a, b.new_key(), 4096u << rng.below(5));
          break;
        case 'N':
          renamed = true;
          e = make_file_rendel(EventType::Rename, 0, r, f2f ? nb : a, b.new_key());
          break;
        case 'D':
          deleted = true;
          if (cfg.pattern == PatternKind::MemToFilePreOverwrite) {
            e = make_file_rendel(EventType::Delete, 0, r, a, b.new_key());
          } else {
            // Some families leave the unlink of the original to the kernel.
            const Pid who = cfg.pattern == PatternKind::FileToFileDelete && rng.chance(0.3) ? kSystemPid : r;
            e = make_file_name(EventType::FileDelete, 0, who, a, job.name);
          }
          break;
      }
      b.add(ts, std::move(e), int(f), last, true);
    }
    lane[lane_i] = ts;
    if (note_dirs.insert(job.dir).second) {
      const Key nk = b.new_key();
      const auto note = job.dir + "\\# RESTORING FILES #.TXT";
      b.add(ts + 2000.0, make_file_name(EventType::FileCreate, 0, r, nk, note), -1, false, true);
      b.add(ts + 2500.0, make_file_rw(EventType::Write, 0, r, nk, nk, 1800), -1, false, true);
    }
  }
}

// ---- lockers and spawners -------------------------------------------------------------------

void emit_forest(Builder& b, const std::vector<ShapeNode>& shape, double t0, double span, Pid root_parent,
                 bool malicious, bool churn, std::vector<Pid>& pids_out) {
  auto& rng = b.rng();
  std::vector<Pid> pids(shape.size());
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const auto& nd = shape[i];
    const double ts = t0 + span * double(i) / double(shape.size()) + rng.uniform(0, 0.3 * span / double(shape.size()));
    const Pid parent = nd.parent < 0 ? root_parent : pids[std::size_t(nd.parent)];
    const std::string cmd = "\"" + nd.image + "\"";
    double life = -1;
    if (churn && i > 0) life = rng.uniform(400'000, 3'500'000);
    else if (!churn && i > 0 && rng.chance(0.05)) life = rng.uniform(2'000'000, 20'000'000);
    pids[i] = b.spawn(ts, parent, nd.image, cmd, static_cast<unsigned>(rng.range(churn ? 6 : 4, churn ? 9 : 12)),
                      nd.threads, life, malicious, 0, churn ? 1'200'000.0 : -1.0);
  }
  pids_out = std::move(pids);
}

SpawnProfile locker_profile(Rng& rng) {
  SpawnProfile p;
  p.n_processes = static_cast<unsigned>(rng.range(36, 52));
  p.depth = static_cast<unsigned>(rng.range(3, 4));
  p.n_threads = p.n_processes + static_cast<unsigned>(rng.range(0, int(p.n_processes / 6)));
  p.n_unique_images = static_cast<unsigned>(rng.range(2, 4));
  return p;
}

void locker_attack(Builder& b, const SynthConfig& cfg, double onset) {
  auto& rng = b.rng();
  const auto profile = cfg.spawn_profile ? *cfg.spawn_profile : locker_profile(rng);
  const auto name = random_word(rng, 8, true);
  const auto root_image = "C:\\Users\\user\\AppData\\Roaming\\" + name + "\\" + name + ".exe";
  const std::vector<std::string> pool = {
      "C:\\Users\\user\\AppData\\Local\\" + random_word(rng, 8, true) + "\\" + random_word(rng, 8, true) + ".exe",
      "C:\\Windows\\System32\\cmd.exe", "C:\\Windows\\System32\\conhost.exe",
      "C:\\ProgramData\\" + random_word(rng, 8, true) + "\\" + random_word(rng, 8, true) + ".exe"};
  const auto shape = forest_shape(profile, rng, root_image, pool);
  const double span = rng.uniform(2'500'000, 7'000'000);
  std::vector<Pid> pids;
  emit_forest(b, shape, onset, span, b.explorer(), true, true, pids);

  // Registry tampering children of the replicated copies.
  if (cfg.command_injection) {
    double t = onset + span * rng.uniform(0.3, 0.8);
    for (std::size_t idx : kLockerCommands) {
      const auto cmd = std::string(kTemplates[idx]);
      b.spawn(t, pids[rng.below(pids.size())], "C:\\Windows\\System32\\reg.exe", cmd, 5, 1,
              rng.uniform(100'000, 400'000), true);
      t += rng.uniform(30'000, 200'000);
    }
  }
  // Watchdog: copies of the locker keep killing and respawning helpers for the rest of the trace.
  const std::vector<std::string> tools = {"C:\\Windows\\System32\\taskkill.exe", "C:\\Windows\\System32\\reg.exe",
                                          "C:\\Windows\\System32\\schtasks.exe"};
  for (double t = onset + span; t < b.duration(); t += rng.uniform(250'000, 1'200'000)) {
    const double life = rng.uniform(300'000, 1'500'000);
    const Pid copy = b.spawn(t, pids[0], root_image, "\"" + root_image + "\"", static_cast<unsigned>(rng.range(6, 9)),
                             1, life, true, 0, 300'000.0);
    const Pid shell = b.spawn(t + 20'000, copy, "C:\\Windows\\System32\\cmd.exe", "cmd.exe /c", 6,
                              1, life * 0.6, true, 0, 200'000.0);
    if (rng.chance(0.6)) {
      const auto& tool = rng.pick(tools);
      b.spawn(t + 40'000, shell, tool, "\"" + tool + "\"", 5, 1, life * 0.4, true, 0, 100'000.0);
    }
  }
}

struct AppProfile {
  const char* root;
  std::vector<std::string> pool;
  SpawnProfile shape;
};

const std::vector<AppProfile>& app_profiles() {
  static const std::vector<AppProfile> apps = {
      {"C:\\Program Files\\JetBrains\\PyCharm\\bin\\pycharm64.exe",
       {"C:\\Program Files\\JetBrains\\PyCharm\\jbr\\bin\\java.exe", "C:\\Python39\\python.exe",
        "C:\\Windows\\System32\\conhost.exe", "C:\\Program Files\\Git\\cmd\\git.exe",
        "C:\\Program Files\\Git\\mingw64\\bin\\git-remote-https.exe", "C:\\Windows\\System32\\cmd.exe",
        "C:\\Program Files\\JetBrains\\PyCharm\\bin\\fsnotifier64.exe", "C:\\Python39\\Scripts\\pip.exe",
        "C:\\Program Files\\JetBrains\\PyCharm\\bin\\restarter.exe", "C:\\Windows\\System32\\where.exe"},
       {140, 4, 993, 70, 11}},
      {"C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\IDE\\devenv.exe",
       {"C:\\Program Files\\dotnet\\dotnet.exe", "C:\\Windows\\System32\\conhost.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\ServiceHub\\Hosts\\ServiceHub.Host.CLR.x86.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\IDE\\PerfWatson2.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\MSBuild\\Current\\Bin\\MSBuild.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\ServiceHub\\controller\\ServiceHub.Controller.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\ServiceHub\\Hosts\\ServiceHub.IdentityHost.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\ServiceHub\\Hosts\\ServiceHub.SettingsHost.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\ServiceHub\\Hosts\\ServiceHub.Host.Node.x86.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\ServiceHub\\Hosts\\ServiceHub.RoslynCodeAnalysisService.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\IDE\\Extensions\\Microsoft\\LiveShare\\Agent\\vsls-agent.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\ServiceHub\\Hosts\\ServiceHub.DataWarehouseHost.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\ServiceHub\\Hosts\\ServiceHub.TestWindowStoreHost.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\IDE\\VcxprojReader.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\IDE\\CommonExtensions\\Microsoft\\TeamFoundation\\Team Explorer\\Git\\cmd\\git.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\VC\\Tools\\MSVC\\14.29.30133\\bin\\HostX64\\x64\\vctip.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\IDE\\Microsoft.Alm.Shared.Remoting.RemoteContainer.dll.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\IDE\\StandardCollector.Service.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\IDE\\VSIXInstaller.exe",
        "C:\\Program Files\\Microsoft Visual Studio\\2019\\Community\\Common7\\IDE\\vsn.exe"},
       {46, 4, 568, 29, 21}},
      {"C:\\Program Files\\Google\\Chrome\\Application\\chrome.exe",
       {"C:\\Program Files\\Google\\Chrome\\Application\\chrome.exe",
        "C:\\Program Files\\Google\\Chrome\\Application\\94.0.4606.81\\elevation_service.exe"},
       {42, 1, 1480, 41, 2}}};
  return apps;
}

void spawner_app(Builder& b, const SynthConfig& cfg, double start) {
  auto& rng = b.rng();
  const auto& app = app_profiles()[rng.below(app_profiles().size())];
  SpawnProfile p;
  if (cfg.spawn_profile) {
    p = *cfg.spawn_profile;
  } else {
    // Perturb the reference application while keeping its character.
    const double s = rng.uniform(0.75, 1.25);
    p.n_processes = std::max(p.depth + 2, static_cast<unsigned>(std::lround(app.shape.n_processes * s)));
    p.depth = app.shape.depth;
    p.n_threads = static_cast<unsigned>(std::lround(app.shape.n_threads * rng.uniform(0.75, 1.25)));
    p.n_unique_images = std::min<unsigned>(p.n_processes, *app.shape.n_unique_images);
    if (app.shape.depth == 1) p.n_leaves = p.n_processes - 1;
  }
  std::vector<std::string> pool = app.pool;
  if (std::string(app.root).find("chrome") != std::string::npos) pool.erase(pool.begin());
  const auto shape = forest_shape(p, rng, app.root, pool);
  std::vector<Pid> pids;
  const double startup = double(shape.size()) * rng.uniform(60'000, 150'000);
  emit_forest(b, shape, start, startup, b.explorer(), false, false, pids);

  // Session activity: builds, tabs and tool runs keep adding short subtrees under the app.
  const double mean_gap = rng.uniform(800'000, 3'000'000);
  for (double t = start + startup + rng.exponential(mean_gap); t < b.duration(); t += rng.exponential(mean_gap)) {
    Pid parent = pids[rng.below(std::min<std::size_t>(pids.size(), 8))];
    const int chain = rng.range(1, 3);
    const double life = rng.uniform(2'000'000, 15'000'000);
    for (int k = 0; k < chain; ++k) {
      const auto& image = pool.empty() ? std::string(app.root) : rng.pick(pool);
      const int fan = k + 1 == chain ? rng.range(1, 4) : 1;
      Pid next = parent;
      for (int f = 0; f < fan; ++f)
        next = b.spawn(t + 30'000.0 * (k * 4 + f), parent, image, "\"" + image + "\"", static_cast<unsigned>(rng.range(4, 12)),
                       static_cast<unsigned>(rng.range(3, 18)), life * rng.uniform(0.5, 1.0), false);
      parent = next;
    }
  }
}

void archiver(Builder& b, const SynthConfig& cfg, double start) {
  auto& rng = b.rng();
  const bool zip = rng.chance(0.5);
  const std::string image = zip ? "C:\\Program Files\\7-Zip\\7zFM.exe" : "C:\\Program Files\\WinRAR\\WinRAR.exe";
  const Pid a = b.spawn(start, b.explorer(), image, "\"" + image + "\"", 10, 4, -1, false);
  double t = start + 500'000.0;
  const double span = std::max(1'000'000.0, (b.duration() - t) * rng.uniform(0.4, 0.85));
  const double per_file = span / std::max(1u, cfg.n_files);
  const bool extract = rng.chance(0.3);
  const Key z = b.new_key();
  const auto archive = rng.pick(kUserDirs) + "\\backup_" + std::to_string(rng.range(1, 999)) + (zip ? ".7z" : ".rar");
  if (!extract) b.add(t, make_file_name(EventType::FileCreate, 0, a, z, archive));
  std::unordered_set<std::string> used;
  for (unsigned f = 0; f < cfg.n_files; ++f) {
    std::string stem;
    do stem = rng.pick(kStems) + "-" + std::to_string(rng.range(1, 99999));
    while (!used.insert(stem).second);
    const auto name = rng.pick(kUserDirs) + "\\" + stem + rng.pick(kExts);
    const Key s = b.new_key();
    const int chunks = rng.range(1, 4);
    b.add(t, make_file_name(EventType::FileCreate, 0, a, s, name));
    const double gap = per_file / (chunks * 6.0);
    for (int c = 0; c < chunks; ++c) {
      for (int r = rng.range(2, 6); r > 0; --r) {
        t += rng.uniform(0.3, 1.7) * gap;
        b.add(t, extract ? make_file_rw(EventType::Read, 0, a, z, z, 65536) : make_file_rw(EventType::Read, 0, a, s, s, 65536));
      }
      for (int w = rng.range(0, 1); w > 0; --w) {
        t += rng.uniform(0.3, 1.7) * gap;
        b.add(t, extract ? make_file_rw(EventType::Write, 0, a, s, s, 65536) : make_file_rw(EventType::Write, 0, a, z, z, 32768));
      }
    }
  }
}

}  // namespace

// ---- public API -----------------------------------------------------------------------------

// Output of calibrate_noise(CalibrationTarget{}, 42).
NoiseKnobs default_noise() { return NoiseKnobs{23.9254, 45.3091, 44.1402, 1.56517, 0.940634}; }

std::string_view to_string(Archetype a) {
  switch (a) {
    case Archetype::Crypto:
      return "crypto";
    case Archetype::Locker:
      return "locker";
    case Archetype::BenignCryptoLike:
      return "benign:crypto-like";
    case Archetype::BenignSpawner:
      return "benign:spawner";
    case Archetype::BenignDesktop:
      return "benign:desktop";
  }
  return "?";
}

namespace {

std::string_view pattern_slug(PatternKind k) {
  switch (k) {
    case PatternKind::MemToFilePostOverwrite:
      return "post-overwrite";
    case PatternKind::MemToFilePreOverwrite:
      return "pre-overwrite";
    case PatternKind::FileToFileDelete:
      return "file-to-file-delete";
    case PatternKind::FileToFileRenameDelete:
      return "file-to-file-rename-delete";
  }
  return "?";
}

}  // namespace

std::string archetype_name(Archetype a, PatternKind k) {
  if (a == Archetype::Crypto) return "crypto:" + std::string(pattern_slug(k));
  return std::string(to_string(a));
}

std::optional<ArchetypeChoice> parse_archetype(std::string_view s) {
  for (auto k : kAllPatternKinds)
    if (s == archetype_name(Archetype::Crypto, k)) return ArchetypeChoice{Archetype::Crypto, k};
  for (auto a : {Archetype::Locker, Archetype::BenignCryptoLike, Archetype::BenignSpawner, Archetype::BenignDesktop})
    if (s == to_string(a)) return ArchetypeChoice{a};
  return std::nullopt;
}

std::span<const std::string_view> attack_command_templates() { return kTemplates; }
std::span<const std::size_t> locker_command_indices() { return kLockerCommands; }

void validate(const SynthConfig& cfg) {
  if (cfg.duration < 1'000'000) throw InvalidConfig("duration must be at least one second");
  if (cfg.archetype == Archetype::Crypto && cfg.n_files < 1) throw InvalidConfig("crypto traces need n_files >= 1");
  if (cfg.archetype == Archetype::BenignCryptoLike && cfg.n_files < 1)
    throw InvalidConfig("crypto-like traces need n_files >= 1");
  if (!(cfg.intensity > 0.0)) throw InvalidConfig("intensity must be positive");
  const auto& n = cfg.noise;
  for (double v : {n.extra_writes, n.extra_unloads, n.extra_loads, n.extra_thread_ends})
    if (!(v >= 0.0)) throw InvalidConfig("noise knobs must be non-negative");
  if (!(n.benign_rw_coupling >= 0.0 && n.benign_rw_coupling <= 1.0))
    throw InvalidConfig("benign_rw_coupling must lie in [0,1]");
  if (cfg.spawn_profile && cfg.spawn_profile->n_processes == 0) throw InvalidConfig("spawn profile needs processes");
}

SynthTrace synth_trace(const SynthConfig& cfg) {
  validate(cfg);
  Builder b(cfg);
  auto& rng = b.rng();
  const double onset = rng.uniform(300'000, 3'000'000);
  std::optional<Pid> root;
  switch (cfg.archetype) {
    case Archetype::Crypto: {
      b.background(1.0, 0.8, false);
      crypto_attack(b, cfg, onset);
      return b.finish(Label::Crypto, archetype_name(cfg.archetype, cfg.pattern), root);
    }
    case Archetype::Locker: {
      b.background(1.0, 0.8, false);
      locker_attack(b, cfg, onset);
      auto t = b.finish(Label::ScreenLocker, "locker", root);
      // The root is the first malicious Process Start.
      for (const auto& e : t.events)
        if (e.is_process_start() && t.truth.attack_onset && e.timestamp == *t.truth.attack_onset) t.truth.app_root = e.pid;
      return t;
    }
    case Archetype::BenignCryptoLike:
      b.background(1.0, 0.8, false);
      archiver(b, cfg, onset);
      return b.finish(Label::Benign, "benign:crypto-like", root);
    case Archetype::BenignSpawner: {
      b.background(1.0, 0.8, false);
      spawner_app(b, cfg, onset);
      auto t = b.finish(Label::Benign, "benign:spawner", root);
      for (const auto& e : t.events) {
        if (!e.is_process_start()) continue;
        if (e.timestamp >= static_cast<Micros>(onset)) {
          t.truth.app_root = e.pid;
          break;
        }
      }
      return t;
    }
    case Archetype::BenignDesktop:
      b.background(1.6, 1.2, true);
      return b.finish(Label::Benign, "benign:desktop", root);
  }
  throw InvalidConfig("unknown archetype");
}

std::vector<Event> synth_process_forest(const SpawnProfile& profile, std::uint64_t seed, std::string_view root_image) {
  Rng rng(splitmix(seed));
  const auto shape = forest_shape(profile, rng, std::string(root_image), {});
  std::vector<Event> out;
  std::vector<Pid> pids(shape.size());
  Micros ts = 1000;
  Tid tid = 0x100;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    pids[i] = 1000 + 4 * i;
    const Pid parent = shape[i].parent < 0 ? 0 : pids[std::size_t(shape[i].parent)];
    out.push_back(make_process(EventType::Start, ts++, pids[i], parent, shape[i].image, "\"" + shape[i].image + "\""));
    for (unsigned k = 0; k < shape[i].threads; ++k) out.push_back(make_thread(EventType::Start, ts++, pids[i], tid += 4, parent));
  }
  return out;
}

// ---- corpora --------------------------------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  return splitmix(master ^ splitmix(counter + 1));
}

std::vector<SynthConfig> expand_corpus(std::span<const CorpusEntry> spec, std::uint64_t master_seed) {
  std::vector<SynthConfig> out;
  std::uint64_t counter = 0;
  for (const auto& entry : spec) {
    if (entry.count < 1) throw InvalidConfig("corpus entry count must be >= 1");
    for (std::size_t i = 0; i < entry.count; ++i) {
      SynthConfig c = entry.config;
      c.seed = derive_seed(master_seed, counter++);
      out.push_back(c);
    }
  }
  return out;
}

std::vector<CorpusEntry> default_corpus_spec(const NoiseKnobs& noise) {
  std::vector<CorpusEntry> spec;
  auto base = [&](Archetype a) {
    SynthConfig c;
    c.archetype = a;
    c.noise = noise;
    c.duration = 40'000'000;
    return c;
  };
  for (auto k : kAllPatternKinds) {
    auto c = base(Archetype::Crypto);
    c.pattern = k;
    c.n_files = 40;
    spec.push_back({c, 5});
    c.command_injection = true;
    spec.push_back({c, 5});
  }
  auto locker = base(Archetype::Locker);
  spec.push_back({locker, 20});
  locker.command_injection = true;
  spec.push_back({locker, 20});
  auto like = base(Archetype::BenignCryptoLike);
  like.n_files = 30;
  spec.push_back({like, 40});
  spec.push_back({base(Archetype::BenignSpawner), 40});
  spec.push_back({base(Archetype::BenignDesktop), 40});
  return spec;
}

std::vector<CorpusIndexRow> synth_corpus(std::span<const CorpusEntry> spec, std::uint64_t master_seed,
                                         const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create corpus directory '" + dir + "': " + ec.message());
  const auto configs = expand_corpus(spec, master_seed);
  std::vector<CorpusIndexRow> rows(configs.size());
  std::vector<std::string> errors(configs.size());
  const auto n = static_cast<std::int64_t>(configs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    try {
      const auto t = synth_trace(configs[ui]);
      char name[32];
      std::snprintf(name, sizeof name, "trace_%04zu.pt", ui);
      write_trace_file((fs::path(dir) / name).string(), t.manifest, t.events);
      rows[ui] = {name, t.manifest.label, t.manifest.family, configs[ui].seed};
    } catch (const std::exception& e) {
      errors[ui] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw IoError(e);
  std::ofstream idx(fs::path(dir) / kCorpusIndexName, std::ios::binary);
  if (!idx) throw IoError("cannot write corpus index in '" + dir + "'");
  for (const auto& r : rows) idx << r.path << " | " << to_string(r.label) << " | " << r.family << " | " << r.seed << '\n';
  if (!idx) throw IoError("failed writing corpus index");
  return rows;
}

std::vector<CorpusIndexRow> read_corpus_index(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / kCorpusIndexName);
  if (!in) throw IoError("cannot open corpus index in '" + dir + "'");
  std::vector<CorpusIndexRow> rows;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find('|', start)) != std::string::npos; start = pos + 1) f.push_back(trim(line.substr(start, pos - start)));
    f.push_back(trim(line.substr(start)));
    if (f.size() != 4) throw ParseError(line_no, "expected 'path | label | family | seed'");
    const auto label = parse_label(f[1]);
    if (!label) throw ParseError(line_no, "unknown label '" + f[1] + "'");
    std::uint64_t seed = 0;
    try {
      std::size_t used = 0;
      seed = std::stoull(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument(f[3]);
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad seed '" + f[3] + "'");
    }
    rows.push_back({f[0], *label, f[2], seed});
  }
  return rows;
}

// ---- calibration ----------------------------------------------------------------------------

CalibrationResult measure_corpus_correlations(const NoiseKnobs& knobs, std::uint64_t master_seed, Micros window_len) {
  const auto spec = default_corpus_spec(knobs);
  const auto configs = expand_corpus(spec, master_seed);
  std::vector<LabeledWindows> corpus(configs.size());
  const auto n = static_cast<std::int64_t>(configs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto t = synth_trace(configs[ui]);
    corpus[ui].label = t.manifest.label;
    for (const auto& w : window_partition(t.events, window_len)) corpus[ui].windows.push_back(extract_svm_features(w));
  }
  const auto rows = correlation_report(corpus);
  CalibrationResult r;
  r.knobs = knobs;
  for (std::size_t k = 0; k < 4; ++k) r.ransomware[k] = rows[k].ransomware.r;
  r.benign_read_write = rows[0].benign.r;
  return r;
}

CalibrationResult calibrate_noise(const CalibrationTarget& target, std::uint64_t master_seed, std::size_t rounds) {
  // Extra events only lower a coefficient and each knob mostly moves one pair, so the four
  // ransomware searches run side by side. The benign coupling also nudges the ransomware
  // (Read, Write) pair, hence the second pass.
  NoiseKnobs k;
  std::array<double*, 4> knob{&k.extra_writes, &k.extra_unloads, &k.extra_loads, &k.extra_thread_ends};
  CalibrationResult r;
  std::size_t evals = 0;
  auto measure = [&] {
    r = measure_corpus_correlations(k, master_seed);
    ++evals;
  };
  for (int pass = 0; pass < 2; ++pass) {
    std::array<double, 4> lo{}, hi{200, 200, 200, 200};
    for (std::size_t round = 0; round < rounds; ++round) {
      for (std::size_t i = 0; i < 4; ++i) *knob[i] = (lo[i] + hi[i]) / 2;
      measure();
      for (std::size_t i = 0; i < 4; ++i) (r.ransomware[i] > target.ransomware[i] ? lo[i] : hi[i]) = *knob[i];
    }
    for (std::size_t i = 0; i < 4; ++i) *knob[i] = (lo[i] + hi[i]) / 2;

    double clo = 0.0, chi = 1.0;
    k.benign_rw_coupling = 0.0;
    measure();
    if (r.benign_read_write >= target.benign_read_write) continue;
    for (std::size_t round = 0; round < rounds; ++round) {
      k.benign_rw_coupling = (clo + chi) / 2;
      measure();
      (r.benign_read_write < target.benign_read_write ? clo : chi) = k.benign_rw_coupling;
    }
    k.benign_rw_coupling = (clo + chi) / 2;
  }
  measure();
  r.rounds = evals;
  return r;
}

}  // namespace peeler
