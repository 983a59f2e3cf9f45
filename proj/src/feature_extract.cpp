#include "peeler/feature_extract.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace peeler {

std::array<double, kMlrDim> MlrFeatures::vec() const {
  return {double(n_processes), double(n_threads_total), double(max_depth), double(n_leaf_nodes),
          double(n_unique_image_names)};
}

std::array<double, kSvmDim> SvmFeatures::vec() const {
  return {double(n_process_start), double(n_process_end), double(n_image_load),
          double(n_image_unload),  double(n_file_read),   double(n_file_write),
          double(n_thread_start),  double(n_thread_end)};
}

namespace {

struct Proto {
  Pid pid;
  Pid parent;
  std::string image;
  unsigned threads = 0;
  bool stub = false;
  std::vector<std::size_t> kids;
};

std::string image_key(std::string_view image) {
  const auto pos = image.find_last_of("\\/");
  if (pos != std::string_view::npos) image.remove_prefix(pos + 1);
  std::string out(image);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

ProcessTree build_process_tree(std::span<const Event> events) {
  ProcessTree tree;
  std::vector<Proto> protos;
  std::unordered_map<Pid, std::size_t> index;
  std::unordered_map<Pid, std::string> any_image;

  for (const auto& e : events) {
    if (e.provider != Provider::Process) continue;
    const auto* pa = e.as<ProcessAttrs>();
    if (!pa) continue;
    if (!pa->image_file_name.empty()) any_image.emplace(e.pid, pa->image_file_name);
    if (e.etype == EventType::Start && !index.contains(e.pid)) {
      index.emplace(e.pid, protos.size());
      protos.push_back({e.pid, pa->parent_id, pa->image_file_name, 0, false, {}});
    }
  }
  const std::size_t n_started = protos.size();
  for (std::size_t i = 0; i < n_started; ++i) {
    const Pid parent = protos[i].parent;
    if (parent == 0 || index.contains(parent)) continue;
    auto img = any_image.find(parent);
    index.emplace(parent, protos.size());
    protos.push_back({parent, 0, img == any_image.end() ? std::string("?") : img->second, 0, true, {}});
  }
  for (const auto& e : events) {
    if (!e.is(Provider::Thread, EventType::Start)) continue;
    auto it = index.find(e.pid);
    if (it != index.end()) ++protos[it->second].threads;
  }

  // Accept parent edges in first-seen order, rejecting any that would close a cycle.
  std::vector<std::size_t> parent_of(protos.size(), SIZE_MAX);
  for (std::size_t i = 0; i < protos.size(); ++i) {
    const Pid parent = protos[i].parent;
    if (parent == 0) continue;
    const std::size_t p = index.at(parent);
    bool cycle = false;
    for (std::size_t a = p; a != SIZE_MAX; a = parent_of[a]) {
      if (a == i) {
        cycle = true;
        break;
      }
    }
    if (cycle) {
      tree.warnings.push_back("rejected parent edge " + std::to_string(parent) + " -> " +
                              std::to_string(protos[i].pid) + " (cycle)");
      continue;
    }
    parent_of[i] = p;
    protos[p].kids.push_back(i);
  }

  // Materialize bottom-up so deep chains do not recurse.
  std::vector<std::size_t> order;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < protos.size(); ++i)
    if (parent_of[i] == SIZE_MAX) stack.push_back(i);
  std::vector<std::size_t> roots(stack.rbegin(), stack.rend());
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    order.push_back(i);
    for (auto k : protos[i].kids) stack.push_back(k);
  }
  std::vector<ProcessNode> built(protos.size());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& pr = protos[*it];
    auto& node = built[*it];
    node.pid = pr.pid;
    node.parent_pid = pr.stub ? 0 : pr.parent;
    node.image_name = std::move(pr.image);
    node.thread_count = pr.threads;
    node.children.reserve(pr.kids.size());
    for (auto k : pr.kids) node.children.push_back(std::move(built[k]));
  }
  std::sort(roots.begin(), roots.end());
  for (auto r : roots) tree.roots.push_back(std::move(built[r]));
  return tree;
}

MlrFeatures extract_mlr_features(const ProcessTree& tree) {
  MlrFeatures f;
  std::unordered_set<std::string> images;
  std::vector<std::pair<const ProcessNode*, unsigned>> stack;
  for (const auto& r : tree.roots) stack.emplace_back(&r, 1u);
  while (!stack.empty()) {
    auto [n, depth] = stack.back();
    stack.pop_back();
    ++f.n_processes;
    f.n_threads_total += n->thread_count;
    f.max_depth = std::max(f.max_depth, depth);
    if (n->children.empty()) ++f.n_leaf_nodes;
    if (n->image_name != "?") images.insert(image_key(n->image_name));
    for (const auto& c : n->children) stack.emplace_back(&c, depth + 1);
  }
  f.n_unique_image_names = static_cast<unsigned>(images.size());
  return f;
}

SvmFeatures extract_svm_features(std::span<const Event> events) {
  SvmFeatures f;
  for (const auto& e : events) {
    switch (e.provider) {
      case Provider::Process:
        if (e.etype == EventType::Start) ++f.n_process_start;
        if (e.etype == EventType::End) ++f.n_process_end;
        break;
      case Provider::Image:
        if (e.etype == EventType::Load) ++f.n_image_load;
        if (e.etype == EventType::Unload) ++f.n_image_unload;
        break;
      case Provider::File:
        if (e.etype == EventType::Read) ++f.n_file_read;
        if (e.etype == EventType::Write) ++f.n_file_write;
        break;
      case Provider::Thread:
        if (e.etype == EventType::Start) ++f.n_thread_start;
        if (e.etype == EventType::End) ++f.n_thread_end;
        break;
    }
  }
  return f;
}

Correlation pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least two samples");
  // Single-pass updating co-moments.
  double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    mx += dx / n;
    my += dy / n;
    sxx += dx * (xs[i] - mx);
    syy += dy * (ys[i] - my);
    sxy += dx * (ys[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return {0.0, true};
  const double r = sxy / std::sqrt(sxx * syy);
  return {std::clamp(r, -1.0, 1.0), false};
}

std::string_view to_string(CorrelationPair p) {
  switch (p) {
    case CorrelationPair::ReadWrite:
      return "(File Read, File Write)";
    case CorrelationPair::ProcessEndImageUnload:
      return "(Process End, Image Unload)";
    case CorrelationPair::ProcessStartImageLoad:
      return "(Process Start, Image Load)";
    case CorrelationPair::ThreadStartThreadEnd:
      return "(Thread Start, Thread End)";
  }
  return "?";
}

namespace {

std::pair<double, double> pair_values(const SvmFeatures& f, CorrelationPair p) {
  switch (p) {
    case CorrelationPair::ReadWrite:
      return {f.n_file_read, f.n_file_write};
    case CorrelationPair::ProcessEndImageUnload:
      return {f.n_process_end, f.n_image_unload};
    case CorrelationPair::ProcessStartImageLoad:
      return {f.n_process_start, f.n_image_load};
    case CorrelationPair::ThreadStartThreadEnd:
      return {f.n_thread_start, f.n_thread_end};
  }
  return {0, 0};
}

Correlation correlate(const std::vector<const SvmFeatures*>& ws, CorrelationPair p) {
  if (ws.size() < 2) return {0.0, true};
  std::vector<double> xs, ys;
  xs.reserve(ws.size());
  ys.reserve(ws.size());
  for (const auto* w : ws) {
    auto [x, y] = pair_values(*w, p);
    xs.push_back(x);
    ys.push_back(y);
  }
  return pearson(xs, ys);
}

}  // namespace

std::vector<CorrelationRow> correlation_report(std::span<const LabeledWindows> corpus) {
  if (corpus.empty()) throw std::invalid_argument("correlation_report: empty corpus");
  std::vector<const SvmFeatures*> ransom, benign;
  for (const auto& t : corpus) {
    if (t.label == Label::Unknown) continue;
    auto& dst = is_ransomware(t.label) ? ransom : benign;
    for (const auto& w : t.windows) dst.push_back(&w);
  }
  std::vector<CorrelationRow> rows;
  for (auto p : kCorrelationPairs) rows.push_back({p, correlate(ransom, p), correlate(benign, p)});
  return rows;
}

std::string format_correlation_report(std::span<const CorrelationRow> rows) {
  std::ostringstream out;
  out << "pair|ransomware|benign\n";
  auto cell = [](const Correlation& c) {
    std::ostringstream s;
    s.precision(4);
    s << std::fixed << c.r;
    if (c.degenerate) s << " (degenerate)";
    return s.str();
  };
  for (const auto& r : rows) out << to_string(r.pair) << '|' << cell(r.ransomware) << '|' << cell(r.benign) << '\n';
  return out.str();
}

}  // namespace peeler
