#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "peeler/event.hpp"
#include "peeler/trace_io.hpp"

namespace peeler {

struct ProcessNode {
  Pid pid = 0;
  Pid parent_pid = 0;
  std::string image_name;
  unsigned thread_count = 0;
  std::vector<ProcessNode> children;
};

struct ProcessTree {
  std::vector<ProcessNode> roots;
  /// Parent edges dropped because they would have closed a cycle.
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kMlrDim = 5;
inline constexpr std::size_t kSvmDim = 8;

struct MlrFeatures {
  unsigned n_processes = 0;
  unsigned n_threads_total = 0;
  unsigned max_depth = 0;  // root = 1
  unsigned n_leaf_nodes = 0;
  unsigned n_unique_image_names = 0;

  bool operator==(const MlrFeatures&) const = default;
  std::array<double, kMlrDim> vec() const;
};

struct SvmFeatures {
  unsigned n_process_start = 0;
  unsigned n_process_end = 0;
  unsigned n_image_load = 0;
  unsigned n_image_unload = 0;
  unsigned n_file_read = 0;
  unsigned n_file_write = 0;
  unsigned n_thread_start = 0;
  unsigned n_thread_end = 0;

  bool operator==(const SvmFeatures&) const = default;
  std::array<double, kSvmDim> vec() const;
};

/// Parent id 0 means "no parent". Stub parents are created for referenced but unseen pids.
ProcessTree build_process_tree(std::span<const Event> events);
inline ProcessTree build_process_tree(const Window& w) { return build_process_tree(w.events); }

MlrFeatures extract_mlr_features(const ProcessTree& tree);
SvmFeatures extract_svm_features(std::span<const Event> events);
inline SvmFeatures extract_svm_features(const Window& w) { return extract_svm_features(w.events); }

/// Edge depth of a process tree: node depth minus one.
inline unsigned edge_depth(const MlrFeatures& f) { return f.max_depth == 0 ? 0 : f.max_depth - 1; }

struct Correlation {
  double r = 0.0;
  bool degenerate = false;
};

/// Throws std::invalid_argument on length mismatch or fewer than two samples.
Correlation pearson(std::span<const double> xs, std::span<const double> ys);

enum class CorrelationPair : std::uint8_t { ReadWrite, ProcessEndImageUnload, ProcessStartImageLoad, ThreadStartThreadEnd };
inline constexpr std::array<CorrelationPair, 4> kCorrelationPairs = {
    CorrelationPair::ReadWrite, CorrelationPair::ProcessEndImageUnload,
    CorrelationPair::ProcessStartImageLoad, CorrelationPair::ThreadStartThreadEnd};

std::string_view to_string(CorrelationPair p);

struct CorrelationRow {
  CorrelationPair pair;
  Correlation ransomware;
  Correlation benign;
};

struct LabeledWindows {
  Label label = Label::Unknown;
  std::vector<SvmFeatures> windows;
};

/// Per-window counts are pooled across traces of the same class before correlating.
std::vector<CorrelationRow> correlation_report(std::span<const LabeledWindows> corpus);

/// Delimiter-separated rendering: `pair|ransomware|benign`.
std::string format_correlation_report(std::span<const CorrelationRow> rows);

}  // namespace peeler
