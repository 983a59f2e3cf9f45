#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peeler/event.hpp"

namespace peeler {

inline constexpr std::string_view kTraceHeader = "PEELER-TRACE v1";

struct TraceManifest {
  Label label = Label::Unknown;
  std::string family;
  std::uint64_t seed = 0;  // 0 for captured traces
  std::uint64_t event_count = 0;
  Micros duration = 0;
  /// Timestamp of the first malicious event, recorded by the synthesizer.
  std::optional<Micros> attack_onset;

  bool operator==(const TraceManifest&) const = default;
};

struct Trace {
  TraceManifest manifest;
  std::vector<Event> events;
};

/// Throws ParseError on malformed lines and SchemaError on invariant violations.
Trace read_trace(std::istream& in);
Trace read_trace_file(const std::string& path);

/// Events must already be ordered and valid. Throws IoError when the sink fails.
void write_trace(const TraceManifest& manifest, std::span<const Event> events, std::ostream& out);
void write_trace_file(const std::string& path, const TraceManifest& manifest,
                      std::span<const Event> events);

/// Single-line encodings, exposed for the report writer and tests.
std::string encode_event(const Event& e);
Event decode_event(std::string_view line, std::size_t line_no);

enum class ReplayMode { Immediate, Timed };

struct ReplayOptions {
  ReplayMode mode = ReplayMode::Immediate;
  /// Multiplier on inter-event gaps in timed mode; 0 behaves like immediate delivery.
  double time_scale = 1.0;
};

struct ReplayStats {
  std::size_t delivered = 0;
  double seconds = 0.0;
  double events_per_second = 0.0;
};

/// Delivers every event in order. A throwing consumer stops the replay and the exception
/// propagates to the caller.
ReplayStats replay(std::span<const Event> events, const ReplayOptions& opts,
                   const std::function<void(const Event&)>& consumer);

/// Non-owning view over a contiguous run of events; valid while the source vector lives.
struct Window {
  std::size_t index = 0;
  Micros start = 0;
  Micros end = 0;
  std::span<const Event> events;
};

/// Tumbling windows aligned to t=0, covering [0, last timestamp]; empty interior windows are
/// kept so the list stays contiguous. Throws std::invalid_argument when window_len is 0.
std::vector<Window> window_partition(std::span<const Event> events, Micros window_len);

}  // namespace peeler
