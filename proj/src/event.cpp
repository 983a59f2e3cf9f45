#include "peeler/event.hpp"

#include <array>

namespace peeler {

namespace {

constexpr std::array<std::string_view, kProviderCount> kProviderNames = {"Process", "File", "Image",
                                                                         "Thread"};
constexpr std::array<std::string_view, kEventTypeCount> kEventTypeNames = {
    "Start", "End", "Read", "Write", "Rename", "Delete", "FileCreate", "FileDelete", "Load",
    "Unload"};

template <class A>
constexpr std::size_t attrs_index() {
  return EventAttrs(A{}).index();
}

}  // namespace

bool valid_pair(Provider p, EventType t) { return expected_attrs_index(p, t).has_value(); }

std::optional<std::size_t> expected_attrs_index(Provider p, EventType t) {
  switch (p) {
    case Provider::Process:
      if (t == EventType::Start || t == EventType::End) return attrs_index<ProcessAttrs>();
      break;
    case Provider::File:
      switch (t) {
        case EventType::Read:
        case EventType::Write:
          return attrs_index<FileRwAttrs>();
        case EventType::Rename:
        case EventType::Delete:
          return attrs_index<FileRenDelAttrs>();
        case EventType::FileCreate:
        case EventType::FileDelete:
          return attrs_index<FileNameAttrs>();
        default:
          break;
      }
      break;
    case Provider::Thread:
      if (t == EventType::Start || t == EventType::End) return attrs_index<ThreadAttrs>();
      break;
    case Provider::Image:
      if (t == EventType::Load || t == EventType::Unload) return attrs_index<ImageAttrs>();
      break;
  }
  return std::nullopt;
}

std::vector<Violation> validate_event(const Event& e) {
  std::vector<Violation> out;
  const auto expected = expected_attrs_index(e.provider, e.etype);
  if (!expected) {
    out.push_back({"etype", "etype invalid for provider"});
    return out;
  }
  if (*expected != e.attrs.index()) {
    out.push_back({"attrs", "attrs variant mismatch"});
    return out;
  }
  if (const auto* fn = e.as<FileNameAttrs>(); fn && fn->file_name.empty()) {
    out.push_back({"file_name", "file_name must be non-empty"});
  }
  return out;
}

std::optional<char> pattern_letter(const Event& e) {
  if (e.provider != Provider::File) return std::nullopt;
  switch (e.etype) {
    case EventType::FileCreate:
      return 'C';
    case EventType::Read:
      return 'R';
    case EventType::Write:
      return 'W';
    case EventType::Rename:
      return 'N';
    case EventType::Delete:
    case EventType::FileDelete:
      return 'D';
    default:
      return std::nullopt;
  }
}

std::string_view to_string(Provider p) { return kProviderNames[static_cast<std::size_t>(p)]; }
std::string_view to_string(EventType t) { return kEventTypeNames[static_cast<std::size_t>(t)]; }

std::optional<Provider> parse_provider(std::string_view s) {
  for (std::size_t i = 0; i < kProviderNames.size(); ++i)
    if (kProviderNames[i] == s) return static_cast<Provider>(i);
  return std::nullopt;
}

std::optional<EventType> parse_event_type(std::string_view s) {
  for (std::size_t i = 0; i < kEventTypeNames.size(); ++i)
    if (kEventTypeNames[i] == s) return static_cast<EventType>(i);
  return std::nullopt;
}

std::string_view to_string(DetectorKind d) {
  switch (d) {
    case DetectorKind::CommandRule:
      return "CommandRule";
    case DetectorKind::FileIoPattern:
      return "FileIoPattern";
    case DetectorKind::MlClassifier:
      return "MlClassifier";
  }
  return "?";
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Benign:
      return "benign";
    case Label::Crypto:
      return "crypto";
    case Label::ScreenLocker:
      return "screen_locker";
    case Label::Unknown:
      return "unknown";
  }
  return "unknown";
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "benign") return Label::Benign;
  if (s == "crypto") return Label::Crypto;
  if (s == "screen_locker") return Label::ScreenLocker;
  if (s == "unknown") return Label::Unknown;
  return std::nullopt;
}

Event make_process(EventType t, Micros ts, Pid pid, Pid parent, std::string image,
                   std::string cmdline, Tid tid, std::uint64_t session) {
  return Event{pid, tid, Provider::Process, t, ts,
               ProcessAttrs{session, parent, std::move(image), std::move(cmdline)}};
}

Event make_file_rw(EventType t, Micros ts, Pid pid, Key file_key, Key file_object,
                   std::uint64_t io_size, Tid tid) {
  return Event{pid, tid, Provider::File, t, ts, FileRwAttrs{file_key, file_object, io_size}};
}

Event make_file_rendel(EventType t, Micros ts, Pid pid, Key file_key, Key file_object, Tid tid) {
  return Event{pid, tid, Provider::File, t, ts, FileRenDelAttrs{file_key, file_object}};
}

Event make_file_name(EventType t, Micros ts, Pid pid, Key file_object, std::string name,
                     Tid tid) {
  return Event{pid, tid, Provider::File, t, ts, FileNameAttrs{file_object, std::move(name)}};
}

Event make_thread(EventType t, Micros ts, Pid pid, Tid tid, Pid parent) {
  return Event{pid, tid, Provider::Thread, t, ts, ThreadAttrs{parent}};
}

Event make_image(EventType t, Micros ts, Pid pid, std::string file_name, std::uint64_t image_size,
                 Tid tid) {
  return Event{pid, tid, Provider::Image, t, ts, ImageAttrs{image_size, std::move(file_name)}};
}

}  // namespace peeler
