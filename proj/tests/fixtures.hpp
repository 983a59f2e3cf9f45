#pragma once

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "peeler/event.hpp"
#include "peeler/fileio_matcher.hpp"
#include "peeler/ml_models.hpp"
#include "support.hpp"

namespace peeler::testing {

inline constexpr char kAlphabet[] = {'C', 'R', 'W', 'N', 'D'};

// A word of the pattern language: 1-3 cycles, each with 1-3 letters per run.
inline std::string random_word(std::mt19937_64& rng, PatternKind k) {
  auto n = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::string cycles;
  for (int c = n(1, 3); c > 0; --c) {
    cycles += std::string(n(1, 3), 'R');
    if (multi_kind(k) && n(0, 1)) cycles += 'C';
    cycles += std::string(n(1, 3), 'W');
    cycles += std::string(n(0, 2), 'R');
  }
  switch (k) {
    case PatternKind::MemToFilePostOverwrite: return "C" + cycles + "NDC";
    case PatternKind::MemToFilePreOverwrite: return "CNDC" + cycles;
    case PatternKind::FileToFileDelete: return std::string(n(1, 2), 'C') + cycles + "D";
    case PatternKind::FileToFileRenameDelete: return std::string(n(1, 2), 'C') + cycles + "NDC";
  }
  return {};
}

struct FileSpec {
  Key key, obj, obj2;
  std::string name;
};

inline Event letter_event(std::mt19937_64& rng, char letter, const FileSpec& f, Pid pid, Micros ts) {
  auto coin = [&] { return rng() % 2 == 0; };
  const Key obj = coin() ? f.obj : f.obj2;
  const Key key = coin() ? f.key : f.obj;
  switch (letter) {
    case 'C': return make_file_name(EventType::FileCreate, ts, pid, obj, coin() ? f.name : f.name + ".enc");
    case 'R': return make_file_rw(EventType::Read, ts, pid, key, obj);
    case 'W': return make_file_rw(EventType::Write, ts, pid, key, obj);
    case 'N': return make_file_rendel(EventType::Rename, ts, pid, key, obj);
    default:
      return coin() ? make_file_rendel(EventType::Delete, ts, pid, key, obj)
                    : make_file_name(EventType::FileDelete, ts, pid, obj, f.name);
  }
}

inline std::vector<Event> random_sequence(std::mt19937_64& rng) {
  auto n = [&](std::uint64_t lo, std::uint64_t hi) { return lo + rng() % (hi - lo + 1); };
  const std::size_t n_files = n(1, 5);
  std::vector<FileSpec> files;
  for (std::size_t i = 0; i < n_files; ++i) {
    const Key base = 0x1000 * (i + 1);
    const std::string dir = n(0, 3) == 0 ? "C:\\Other" : "C:\\Users\\u\\Docs";
    files.push_back({base + 1, base + 2, n(0, 2) == 0 ? base + 3 : base + 2, dir + "\\f" + std::to_string(i) + ".txt"});
  }
  static constexpr Pid kPids[] = {100, 100, 100, 100, 100, 4, 300, 200};
  const std::size_t len = n(1, 200);
  std::vector<std::pair<std::size_t, char>> plan;  // (file, letter)
  if (rng() % 2 == 0) {
    // Embed pattern words for a few files and shuffle them together, preserving per-file order.
    std::vector<std::string> words(n_files);
    for (auto& w : words)
      if (rng() % 3 != 0) w = random_word(rng, kAllPatternKinds[rng() % 4]);
    std::vector<std::size_t> pos(n_files, 0);
    while (plan.size() < len) {
      const std::size_t f = rng() % n_files;
      if (pos[f] < words[f].size() && rng() % 5 != 0) {
        plan.emplace_back(f, words[f][pos[f]++]);
      } else {
        plan.emplace_back(f, kAlphabet[rng() % 5]);
      }
    }
  } else {
    while (plan.size() < len) plan.emplace_back(rng() % n_files, kAlphabet[rng() % 5]);
  }
  std::vector<Event> out;
  Micros ts = 0;
  if (rng() % 2) out.push_back(make_process(EventType::Start, ts++, 300, 1, "C:\\Windows\\Explorer.EXE"));
  const bool single_actor = rng() % 2;
  for (auto [f, letter] : plan) {
    const Pid pid = single_actor ? (rng() % 6 == 0 ? 4 : 100) : kPids[rng() % std::size(kPids)];
    out.push_back(letter_event(rng, letter, files[f], pid, ts));
    ts += n(1, 500);
    if (rng() % 10 == 0) out.push_back(make_thread(EventType::Start, ts++, pid, 9, pid));
  }
  return out;
}

inline std::vector<Event> cerber_transcript() {
  const Key a = 0xFFFFA7063DB0C8A0;
  const std::string dir = "C:\\Users\\victim\\Music\\";
  return {
      make_file_name(EventType::FileCreate, 1000, 2244, a, dir + "D_186.wav"),
      make_file_rw(EventType::Read, 1100, 2244, a, a),
      make_file_rw(EventType::Read, 1200, 2244, a, a),
      make_file_rw(EventType::Write, 1300, 2244, a, a),
      make_file_rw(EventType::Write, 1400, 2244, a, a),
      make_file_rendel(EventType::Rename, 1500, 2244, a, a),
      make_file_name(EventType::FileDelete, 1600, 2244, a, dir + "D_186.wav"),
      make_file_name(EventType::FileCreate, 1700, 2244, a, dir + "2O8nlobpEl.8cbe"),
  };
}

inline std::vector<Event> locky_transcript() {
  const Key a = 0xFFFFC00A12345670;
  const std::string dir = "C:\\Users\\victim\\Documents\\";
  return {
      make_file_name(EventType::FileCreate, 10, 3100, a, dir + "budget.xlsx"),
      make_file_rendel(EventType::Rename, 20, 3100, a, a),
      make_file_name(EventType::FileDelete, 30, 3100, a, dir + "budget.xlsx"),
      make_file_name(EventType::FileCreate, 40, 3100, a, dir + "A1B2C3D4.locky"),
      make_file_rw(EventType::Read, 50, 3100, a, a),
      make_file_rw(EventType::Read, 60, 3100, a, a),
      make_file_rw(EventType::Write, 70, 3100, a, a),
      make_file_rw(EventType::Write, 80, 3100, a, a),
  };
}

inline std::vector<Event> infinitycrypt_transcript() {
  const Key src = 0xFFFFB203AFD146F0, dst = 0xFFFFB203AFD14160;
  const std::string dir = "C:\\Users\\victim\\Desktop\\";
  return {
      make_file_name(EventType::FileCreate, 10, 5120, src, dir + "report.txt"),
      make_file_name(EventType::FileCreate, 20, 5120, dst, dir + "report.txt.infinity"),
      make_file_rw(EventType::Read, 30, 5120, src, src),
      make_file_rw(EventType::Write, 40, 4, dst, dst),
      make_file_rw(EventType::Read, 50, 5120, src, src),
      make_file_rw(EventType::Write, 60, 5120, dst, dst),
      make_file_name(EventType::FileDelete, 70, 5120, src, dir + "report.txt"),
  };
}

inline std::vector<Event> wannacry_transcript() {
  const Key src = 0xFFFF9A0C11112220, dst = 0xFFFF9A0C33334440;
  const std::string dir = "C:\\Users\\victim\\Documents\\";
  return {
      make_file_name(EventType::FileCreate, 10, 6400, src, dir + "nasa.txt"),
      make_file_name(EventType::FileCreate, 20, 6400, dst, dir + "nasa.txt.WNCRYT"),
      make_file_rw(EventType::Read, 30, 6400, src, src),
      make_file_rw(EventType::Write, 40, 6400, dst, dst),
      make_file_rw(EventType::Read, 50, 4, src, src),
      make_file_rw(EventType::Write, 60, 6400, dst, dst),
      make_file_rendel(EventType::Rename, 70, 6400, dst, dst),
      make_file_name(EventType::FileDelete, 80, 6400, dst, dir + "nasa.txt.WNCRYT"),
      make_file_name(EventType::FileCreate, 90, 6400, dst, dir + "nasa.txt.WNCRY"),
  };
}

// Independent transcription of the attack command list.
inline const std::vector<std::string> kAttackCommands = {
    "vssadmin.exe delete shadows /all /quiet",
    "bcdedit.exe /set {default} recoveryenabled No",
    "bcdedit.exe /set {default} bootstatuspolicy ignoreallfailures",
    "powershell.exe -e Get-WmiObject Win32_Shadowcopy | ForEach-Object{$_.Delete();}",
    "taskkill /t /f /im mal.exe",
    "del mal.exe",
    R"(reg add HKCU\Software\Microsoft\Windows\CurrentVersion\Explorer\Advanced /f /v HideFileExt /t REG_DWORD /d 1)",
    R"(reg add HKCU\Software\Microsoft\Windows\CurrentVersion\Explorer\Advanced /f /v Hidden /t REG_DWORD /d 2)",
    R"(reg add HKCU\Software\Microsoft\Windows\CurrentVersion\Explorer\Advanced /f /v EnableLUA /d 0 /tREG_DWORD /f)",
    R"(reg add HKCU\Control Panel\Desktop /v Wallpaper /t REG_SZ /d PathtoRansomNoteImage /f)",
    R"(reg add HKCU\Control Panel\Desktop /v WallpaperStyle /t REG_SZ /d "0" /f)",
    R"(reg add HKCU\Control Panel\Desktop /v TileWallpaper /t REG_SZ /d "0" /f)",
    "powershell.exe -ExecutionPolicy Restricted -Command Write-Host 'Final result: 1';",
    "powershell.exe Set-MpPreference -DisableArchiveScanning $true;",
    "powershell.exe Set-MpPreference -DisableBlockAtFirstSeen $true;",
    "icacls Path /deny *S-1-1-0:(OI)(CI)(DE,DC)",
    "icacls . /grant Everyone:F /T /C /Q",
    R"(notepad.exe C:\Users\USER\Music\# RESTORING FILES #.TXT)",
    R"(cscript  C:\Users\kim105\AppData\Local\Temp/SUwk.vbs)",
    "wmic.exe shadowcopy delete",
    "net.exe stop vss",
    "net.exe stop McAfeeDLPAgentService /y",
    "schtasks  /create /sc onlogon /tn TASK_NAME /rl highest /tr PATH_TO_EXE",
    "vssadmin.exe resize shadowstorage /for=c: /on=c: /maxsize=401MB",
};

inline std::vector<std::string> benign_commands() {
  std::ifstream in(std::string(PEELER_TEST_DATA) + "/benign_commands.txt");
  if (!in) throw std::runtime_error("missing benign command corpus");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line.front() != '#') out.push_back(line);
  return out;
}

inline double two_pass_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> random_rows(std::mt19937_64& rng, std::size_t n, std::size_t dim, double lo = -2, double hi = 2) {
  std::vector<double> out(n * dim);
  for (auto& v : out) v = testing::random_real(rng, lo, hi);
  return out;
}

inline double dual_value(const SvmCore& m) {
  double lin = 0.0, quad = 0.0;
  const std::size_t n = m.n_support();
  for (std::size_t i = 0; i < n; ++i) {
    lin += std::abs(m.coef[i]);
    for (std::size_t j = 0; j < n; ++j) {
      const std::span<const double> a(m.support.data() + i * m.dim, m.dim);
      const std::span<const double> b(m.support.data() + j * m.dim, m.dim);
      double d2 = 0.0;
      for (std::size_t k = 0; k < m.dim; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
      quad += m.coef[i] * m.coef[j] * std::exp(-m.gamma * d2);
    }
  }
  return lin - 0.5 * quad;
}

}  // namespace peeler::testing
