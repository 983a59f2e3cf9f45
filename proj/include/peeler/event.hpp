#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace peeler {

using Pid = std::uint64_t;
using Tid = std::uint64_t;
using Key = std::uint64_t;
/// Microseconds since trace start.
using Micros = std::uint64_t;

inline constexpr Pid kSystemPid = 4;

enum class Provider : std::uint8_t { Process, File, Image, Thread };

// Start/End are shared by the Process and Thread providers.
enum class EventType : std::uint8_t {
  Start,
  End,
  Read,
  Write,
  Rename,
  Delete,
  FileCreate,
  FileDelete,
  Load,
  Unload,
};

inline constexpr int kProviderCount = 4;
inline constexpr int kEventTypeCount = 10;

struct ProcessAttrs {
  std::uint64_t session_id = 0;
  Pid parent_id = 0;
  std::string image_file_name;
  std::string command_line;
  bool operator==(const ProcessAttrs&) const = default;
};

struct FileRwAttrs {
  Key file_key = 0;
  Key file_object = 0;
  std::uint64_t io_size = 0;
  bool operator==(const FileRwAttrs&) const = default;
};

struct FileRenDelAttrs {
  Key file_key = 0;
  Key file_object = 0;
  bool operator==(const FileRenDelAttrs&) const = default;
};

struct FileNameAttrs {
  Key file_object = 0;
  std::string file_name;
  bool operator==(const FileNameAttrs&) const = default;
};

struct ThreadAttrs {
  Pid parent_id = 0;
  bool operator==(const ThreadAttrs&) const = default;
};

struct ImageAttrs {
  std::uint64_t image_size = 0;
  std::string file_name;
  bool operator==(const ImageAttrs&) const = default;
};

using EventAttrs = std::variant<ProcessAttrs, FileRwAttrs, FileRenDelAttrs, FileNameAttrs,
                                ThreadAttrs, ImageAttrs>;

struct Event {
  Pid pid = 0;
  Tid tid = 0;
  Provider provider = Provider::Process;
  EventType etype = EventType::Start;
  Micros timestamp = 0;
  EventAttrs attrs;

  bool operator==(const Event&) const = default;

  bool is(Provider p, EventType t) const { return provider == p && etype == t; }
  bool is_process_start() const { return is(Provider::Process, EventType::Start); }

  template <class A>
  const A* as() const {
    return std::get_if<A>(&attrs);
  }
};

struct Violation {
  std::string field;
  std::string message;
};

/// Empty result means the event is well formed.
std::vector<Violation> validate_event(const Event& e);

bool valid_pair(Provider p, EventType t);

/// Index of the EventAttrs alternative required by (p, t); nullopt for invalid pairs.
std::optional<std::size_t> expected_attrs_index(Provider p, EventType t);

/// C (FileCreate), R, W, N (Rename), D (Delete / FileDelete); nullopt otherwise.
std::optional<char> pattern_letter(const Event& e);

std::string_view to_string(Provider p);
std::string_view to_string(EventType t);
std::optional<Provider> parse_provider(std::string_view s);
std::optional<EventType> parse_event_type(std::string_view s);

enum class DetectorKind : std::uint8_t { CommandRule, FileIoPattern, MlClassifier };

std::string_view to_string(DetectorKind d);

struct Alert {
  DetectorKind detector = DetectorKind::CommandRule;
  Pid pid = 0;
  std::string trigger;
  Micros event_timestamp = 0;
  Micros emitted_timestamp = 0;

  bool operator==(const Alert&) const = default;
};

enum class Label : std::uint8_t { Benign, Crypto, ScreenLocker, Unknown };

std::string_view to_string(Label l);
std::optional<Label> parse_label(std::string_view s);
inline bool is_ransomware(Label l) { return l == Label::Crypto || l == Label::ScreenLocker; }

// Small constructors used by the synthesizer, fixtures and tests.
Event make_process(EventType t, Micros ts, Pid pid, Pid parent, std::string image,
                   std::string cmdline = {}, Tid tid = 0, std::uint64_t session = 1);
Event make_file_rw(EventType t, Micros ts, Pid pid, Key file_key, Key file_object,
                   std::uint64_t io_size = 4096, Tid tid = 0);
Event make_file_rendel(EventType t, Micros ts, Pid pid, Key file_key, Key file_object,
                       Tid tid = 0);
Event make_file_name(EventType t, Micros ts, Pid pid, Key file_object, std::string name,
                     Tid tid = 0);
Event make_thread(EventType t, Micros ts, Pid pid, Tid tid, Pid parent);
Event make_image(EventType t, Micros ts, Pid pid, std::string file_name,
                 std::uint64_t image_size = 0x10000, Tid tid = 0);

}  // namespace peeler
