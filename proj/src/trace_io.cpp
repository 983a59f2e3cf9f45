#include "peeler/trace_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "peeler/errors.hpp"

namespace peeler {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

std::string hex_key(Key k) {
  char buf[2 + 16];
  buf[0] = '0';
  buf[1] = 'x';
  auto [end, ec] = std::to_chars(buf + 2, buf + sizeof buf, k, 16);
  for (char* p = buf + 2; p != end; ++p)
    if (*p >= 'a' && *p <= 'f') *p = static_cast<char>(*p - 'a' + 'A');
  return std::string(buf, end);
}

std::uint64_t get_uint(const json& v, std::string_view key, std::size_t line) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto s = v.get<std::int64_t>();
    if (s >= 0) return static_cast<std::uint64_t>(s);
  }
  throw ParseError(line, "key '" + std::string(key) + "' must be an unsigned integer");
}

// *_key and *_object accept either an integer or a "0x"-prefixed hex string.
Key get_key(const json& v, std::string_view key, std::size_t line) {
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
      Key out = 0;
      auto [ptr, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), out, 16);
      if (ec == std::errc() && ptr == s.data() + s.size()) return out;
    }
    throw ParseError(line, "key '" + std::string(key) + "' has malformed hex value '" + s + "'");
  }
  return get_uint(v, key, line);
}

std::string get_text(const json& v, std::string_view key, std::size_t line) {
  if (!v.is_string()) throw ParseError(line, "key '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

bool is_attr_key(std::string_view k) {
  static constexpr std::string_view kKeys[] = {"session_id", "parent_id",   "image",
                                               "cmdline",    "file_key",    "file_object",
                                               "io_size",    "file_name",   "image_size"};
  for (auto x : kKeys)
    if (x == k) return true;
  return false;
}

ojson manifest_json(const TraceManifest& m) {
  ojson j;
  j["label"] = std::string(to_string(m.label));
  j["family"] = m.family;
  j["seed"] = m.seed;
  j["event_count"] = m.event_count;
  j["duration"] = m.duration;
  if (m.attack_onset) j["onset"] = *m.attack_onset;
  return j;
}

TraceManifest parse_manifest(std::string_view line) {
  const std::string_view prefix = kTraceHeader;
  if (line.substr(0, prefix.size()) != prefix) {
    if (line.substr(0, 14) == "PEELER-TRACE v")
      throw ParseError(1, "unsupported trace version");
    throw ParseError(1, "missing PEELER-TRACE v1 header");
  }
  auto rest = line.substr(prefix.size());
  if (rest.empty() || rest.front() != ' ') throw ParseError(1, "missing manifest object");
  json j;
  try {
    j = json::parse(rest.substr(1));
  } catch (const json::exception& ex) {
    throw ParseError(1, std::string("manifest: ") + ex.what());
  }
  if (!j.is_object()) throw ParseError(1, "manifest must be an object");
  TraceManifest m;
  bool seen_label = false, seen_count = false, seen_duration = false;
  for (const auto& [k, v] : j.items()) {
    if (k == "label") {
      auto l = parse_label(get_text(v, k, 1));
      if (!l) throw ParseError(1, "unknown label");
      m.label = *l;
      seen_label = true;
    } else if (k == "family") {
      m.family = get_text(v, k, 1);
    } else if (k == "seed") {
      m.seed = get_uint(v, k, 1);
    } else if (k == "event_count") {
      m.event_count = get_uint(v, k, 1);
      seen_count = true;
    } else if (k == "duration") {
      m.duration = get_uint(v, k, 1);
      seen_duration = true;
    } else if (k == "onset") {
      m.attack_onset = get_uint(v, k, 1);
    } else {
      throw ParseError(1, "unknown manifest key '" + k + "'");
    }
  }
  if (!seen_label || !seen_count || !seen_duration)
    throw ParseError(1, "manifest requires label, event_count and duration");
  return m;
}

}  // namespace

std::string encode_event(const Event& e) {
  ojson j;
  j["ts"] = e.timestamp;
  j["pid"] = e.pid;
  j["tid"] = e.tid;
  j["prov"] = std::string(to_string(e.provider));
  j["etype"] = std::string(to_string(e.etype));
  std::visit(
      [&](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, ProcessAttrs>) {
          j["session_id"] = a.session_id;
          j["parent_id"] = a.parent_id;
          j["image"] = a.image_file_name;
          j["cmdline"] = a.command_line;
        } else if constexpr (std::is_same_v<A, FileRwAttrs>) {
          j["file_key"] = hex_key(a.file_key);
          j["file_object"] = hex_key(a.file_object);
          j["io_size"] = a.io_size;
        } else if constexpr (std::is_same_v<A, FileRenDelAttrs>) {
          j["file_key"] = hex_key(a.file_key);
          j["file_object"] = hex_key(a.file_object);
        } else if constexpr (std::is_same_v<A, FileNameAttrs>) {
          j["file_object"] = hex_key(a.file_object);
          j["file_name"] = a.file_name;
        } else if constexpr (std::is_same_v<A, ThreadAttrs>) {
          j["parent_id"] = a.parent_id;
        } else if constexpr (std::is_same_v<A, ImageAttrs>) {
          j["image_size"] = a.image_size;
          j["file_name"] = a.file_name;
        }
      },
      e.attrs);
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

Event decode_event(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& ex) {
    throw ParseError(line_no, ex.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "event must be an object");

  auto required = [&](const char* k) -> const json& {
    auto it = j.find(k);
    if (it == j.end()) throw ParseError(line_no, std::string("missing key '") + k + "'");
    return *it;
  };
  Event e;
  e.timestamp = get_uint(required("ts"), "ts", line_no);
  e.pid = get_uint(required("pid"), "pid", line_no);
  e.tid = get_uint(required("tid"), "tid", line_no);
  const auto prov = parse_provider(get_text(required("prov"), "prov", line_no));
  if (!prov) throw ParseError(line_no, "unknown provider");
  const auto etype = parse_event_type(get_text(required("etype"), "etype", line_no));
  if (!etype) throw ParseError(line_no, "unknown etype");
  e.provider = *prov;
  e.etype = *etype;

  const auto idx = expected_attrs_index(e.provider, e.etype);
  if (!idx) throw SchemaError("line " + std::to_string(line_no) + ": etype invalid for provider");

  // Only the keys that belong to the pair's attribute variant may appear.
  std::vector<std::string_view> allowed;
  switch (*idx) {
    case 0:
      allowed = {"session_id", "parent_id", "image", "cmdline"};
      break;
    case 1:
      allowed = {"file_key", "file_object", "io_size"};
      break;
    case 2:
      allowed = {"file_key", "file_object"};
      break;
    case 3:
      allowed = {"file_object", "file_name"};
      break;
    case 4:
      allowed = {"parent_id"};
      break;
    case 5:
      allowed = {"image_size", "file_name"};
      break;
  }
  for (const auto& [k, v] : j.items()) {
    if (k == "ts" || k == "pid" || k == "tid" || k == "prov" || k == "etype") continue;
    if (!is_attr_key(k)) throw ParseError(line_no, "unknown key '" + k + "'");
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw SchemaError("line " + std::to_string(line_no) + ": attrs variant mismatch (key '" + k +
                        "')");
  }

  auto opt = [&](const char* k) -> const json* {
    auto it = j.find(k);
    return it == j.end() ? nullptr : &*it;
  };
  auto uint_or = [&](const char* k) -> std::uint64_t {
    const json* v = opt(k);
    return v ? get_uint(*v, k, line_no) : 0;
  };
  auto key_or = [&](const char* k) -> Key {
    const json* v = opt(k);
    return v ? get_key(*v, k, line_no) : 0;
  };
  auto text_or = [&](const char* k) -> std::string {
    const json* v = opt(k);
    return v ? get_text(*v, k, line_no) : std::string{};
  };

  switch (*idx) {
    case 0:
      e.attrs = ProcessAttrs{uint_or("session_id"), uint_or("parent_id"), text_or("image"),
                             text_or("cmdline")};
      break;
    case 1:
      e.attrs = FileRwAttrs{key_or("file_key"), key_or("file_object"), uint_or("io_size")};
      break;
    case 2:
      e.attrs = FileRenDelAttrs{key_or("file_key"), key_or("file_object")};
      break;
    case 3:
      e.attrs = FileNameAttrs{key_or("file_object"), text_or("file_name")};
      break;
    case 4:
      e.attrs = ThreadAttrs{uint_or("parent_id")};
      break;
    case 5:
      e.attrs = ImageAttrs{uint_or("image_size"), text_or("file_name")};
      break;
  }
  if (auto v = validate_event(e); !v.empty())
    throw SchemaError("line " + std::to_string(line_no) + ": " + v.front().message);
  return e;
}

Trace read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty trace");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Trace t;
  t.manifest = parse_manifest(line);
  t.events.reserve(t.manifest.event_count);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(line_no, "empty line");
    Event e = decode_event(line, line_no);
    if (!t.events.empty() && e.timestamp < t.events.back().timestamp)
      throw SchemaError("line " + std::to_string(line_no) + ": non-monotonic timestamp");
    t.events.push_back(std::move(e));
  }
  if (t.events.size() != t.manifest.event_count)
    throw SchemaError("event_count " + std::to_string(t.manifest.event_count) + " but body has " +
                      std::to_string(t.events.size()) + " events");
  if (!t.events.empty() && t.manifest.duration < t.events.back().timestamp)
    throw SchemaError("duration precedes last event timestamp");
  return t;
}

Trace read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace '" + path + "'");
  return read_trace(in);
}

void write_trace(const TraceManifest& manifest, std::span<const Event> events, std::ostream& out) {
  TraceManifest m = manifest;
  m.event_count = events.size();
  out << kTraceHeader << ' ' << manifest_json(m).dump(-1, ' ', false, json::error_handler_t::strict)
      << '\n';
  for (const auto& e : events) out << encode_event(e) << '\n';
  out.flush();
  if (!out) throw IoError("trace sink failed");
}

void write_trace_file(const std::string& path, const TraceManifest& manifest,
                      std::span<const Event> events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create trace '" + path + "'");
  write_trace(manifest, events, out);
}

ReplayStats replay(std::span<const Event> events, const ReplayOptions& opts,
                   const std::function<void(const Event&)>& consumer) {
  using clock = std::chrono::steady_clock;
  ReplayStats stats;
  const auto t0 = clock::now();
  const bool timed = opts.mode == ReplayMode::Timed && opts.time_scale > 0.0;
  const Micros first_ts = events.empty() ? 0 : events.front().timestamp;
  for (const auto& e : events) {
    if (timed) {
      const double offset_us = static_cast<double>(e.timestamp - first_ts) * opts.time_scale;
      std::this_thread::sleep_until(t0 + std::chrono::microseconds(static_cast<std::int64_t>(offset_us)));
    }
    consumer(e);
    ++stats.delivered;
  }
  stats.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  stats.events_per_second = stats.seconds > 0.0 ? static_cast<double>(stats.delivered) / stats.seconds
                                                 : 0.0;
  return stats;
}

std::vector<Window> window_partition(std::span<const Event> events, Micros window_len) {
  if (window_len == 0) throw std::invalid_argument("window_len must be positive");
  std::vector<Window> out;
  if (events.empty()) return out;
  const std::size_t n_windows = events.back().timestamp / window_len + 1;
  out.reserve(n_windows);
  std::size_t pos = 0;
  for (std::size_t w = 0; w < n_windows; ++w) {
    const Micros start = w * window_len;
    const Micros end = start + window_len;
    const std::size_t first = pos;
    while (pos < events.size() && events[pos].timestamp < end) ++pos;
    out.push_back(Window{w, start, end, events.subspan(first, pos - first)});
  }
  return out;
}

}  // namespace peeler
