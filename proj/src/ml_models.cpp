#include "peeler/ml_models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "peeler/errors.hpp"
#include "peeler/kernels.hpp"

namespace peeler {

// ---- scaler ---------------------------------------------------------------------------------

Scaler fit_scaler(std::span<const double> rows, std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0) throw DimensionMismatch("fit_scaler: ragged rows");
  const std::size_t n = rows.size() / dim;
  if (n < 2) throw std::invalid_argument("fit_scaler: need at least two samples");
  Scaler s;
  s.mean.assign(dim, 0.0);
  s.std.assign(dim, 1.0);
  s.degenerate.assign(dim, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dim; ++k) s.mean[k] += rows[i * dim + k];
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t k = 0; k < dim; ++k) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = rows[i * dim + k] - s.mean[k];
      ss += d * d;
    }
    const double var = ss / static_cast<double>(n);
    // Constant columns leave rounding residue in the mean, so compare against a relative floor.
    if (var <= 1e-24 * std::max(1.0, s.mean[k] * s.mean[k])) {
      s.degenerate[k] = true;
    } else {
      s.std[k] = std::sqrt(var);
    }
  }
  return s;
}

void Scaler::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != dim() || out.size() != dim()) throw DimensionMismatch("scaler: dimension mismatch");
  for (std::size_t k = 0; k < dim(); ++k) out[k] = (x[k] - mean[k]) / std[k];
}

std::vector<double> Scaler::apply(std::span<const double> x) const {
  std::vector<double> out(dim());
  apply(x, out);
  return out;
}

namespace {

void check_labels(std::size_t n_rows, std::span<const int> y, std::size_t min_rows) {
  if (n_rows != y.size()) throw DimensionMismatch("labels and samples differ in length");
  if (n_rows < min_rows) throw std::invalid_argument("need at least " + std::to_string(min_rows) + " samples");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw std::invalid_argument("labels must be 0 or 1");
    (v ? pos : neg) = true;
  }
  if (!pos || !neg) throw SingleClassError("both classes must be present");
}

std::vector<double> scale_rows(const Scaler& s, std::span<const double> rows) {
  std::vector<double> out(rows.size());
  const std::size_t d = s.dim();
  for (std::size_t i = 0; i < rows.size() / d; ++i)
    s.apply(rows.subspan(i * d, d), std::span<double>(out).subspan(i * d, d));
  return out;
}

}  // namespace

// ---- MLR ------------------------------------------------------------------------------------

std::array<double, 2> mlr_softmax(const MlrWeights& w, std::span<const double> z) {
  std::array<double, 2> s{};
  for (std::size_t c = 0; c < 2; ++c) {
    double v = w[c][kMlrDim];
    for (std::size_t k = 0; k < kMlrDim; ++k) v += w[c][k] * z[k];
    s[c] = v;
  }
  const double m = std::max(s[0], s[1]);
  const double e0 = std::exp(s[0] - m), e1 = std::exp(s[1] - m);
  const double sum = e0 + e1;
  return {e0 / sum, e1 / sum};
}

MlrObjective mlr_objective(const MlrWeights& w, std::span<const double> z, std::span<const int> y,
                           double l2) {
  MlrObjective o;
  const std::size_t n = y.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto zi = z.subspan(i * kMlrDim, kMlrDim);
    const auto p = mlr_softmax(w, zi);
    const auto yi = static_cast<std::size_t>(y[i]);
    o.loss -= std::log(std::max(p[yi], std::numeric_limits<double>::min())) * inv_n;
    for (std::size_t c = 0; c < 2; ++c) {
      const double r = (p[c] - (c == yi ? 1.0 : 0.0)) * inv_n;
      for (std::size_t k = 0; k < kMlrDim; ++k) o.grad[c][k] += r * zi[k];
      o.grad[c][kMlrDim] += r;
    }
  }
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t k = 0; k < kMlrDim; ++k) {
      o.loss += 0.5 * l2 * w[c][k] * w[c][k];
      o.grad[c][k] += l2 * w[c][k];
    }
  }
  return o;
}

namespace {

double squared_norm(const MlrWeights& g) {
  double s = 0.0;
  for (const auto& row : g)
    for (double v : row) s += v * v;
  return s;
}

}  // namespace

MlrModel train_mlr_dense(std::span<const double> rows, std::span<const int> y, const MlrOptions& opts) {
  if (rows.size() % kMlrDim != 0) throw DimensionMismatch("mlr rows must be 5 wide");
  check_labels(rows.size() / kMlrDim, y, 2);
  MlrModel m;
  m.l2 = opts.l2;
  m.scaler = fit_scaler(rows, kMlrDim);
  const auto z = scale_rows(m.scaler, rows);

  double step = 1.0;
  auto obj = mlr_objective(m.weights, z, y, m.l2);
  m.loss_history.push_back(obj.loss);
  for (m.iterations = 0; m.iterations < opts.max_iter; ++m.iterations) {
    const double gn2 = squared_norm(obj.grad);
    if (std::sqrt(gn2) < opts.grad_tol) {
      m.converged = true;
      break;
    }
    MlrObjective next;
    MlrWeights trial{};
    bool accepted = false;
    for (; step > 1e-16; step *= 0.5) {
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t k = 0; k < kMlrCols; ++k) trial[c][k] = m.weights[c][k] - step * obj.grad[c][k];
      next = mlr_objective(trial, z, y, m.l2);
      if (next.loss <= obj.loss - 0.5 * step * gn2) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    m.weights = trial;
    obj = next;
    m.loss_history.push_back(obj.loss);
    step = std::min(step * 2.0, 64.0);
  }
  if (!m.converged && std::sqrt(squared_norm(obj.grad)) < opts.grad_tol) m.converged = true;
  return m;
}

MlrModel train_mlr(std::span<const MlrFeatures> x, std::span<const int> y, const MlrOptions& opts) {
  std::vector<double> rows;
  rows.reserve(x.size() * kMlrDim);
  for (const auto& f : x) {
    const auto v = f.vec();
    rows.insert(rows.end(), v.begin(), v.end());
  }
  if (x.size() != y.size()) throw DimensionMismatch("labels and samples differ in length");
  if (x.size() < 4) throw std::invalid_argument("train_mlr: need at least 4 samples");
  return train_mlr_dense(rows, y, opts);
}

double predict_mlr_dense(const MlrModel& m, std::span<const double> x) {
  std::array<double, kMlrDim> z{};
  m.scaler.apply(x, z);
  return mlr_softmax(m.weights, z)[1];
}

double predict_mlr(const MlrModel& m, const MlrFeatures& x) {
  const auto v = x.vec();
  return predict_mlr_dense(m, v);
}

// ---- SVM ------------------------------------------------------------------------------------

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw DimensionMismatch("rbf_kernel: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

double SvmCore::decision(std::span<const double> z) const {
  double f = 0.0;
  kernels::svm_decision_batch_serial(*this, z, std::span<double>(&f, 1));
  return f;
}

SvmCore train_svm_dense(std::span<const double> rows, std::size_t dim, std::span<const int> y,
                        const SvmOptions& opts) {
  if (dim == 0 || rows.size() % dim != 0) throw DimensionMismatch("svm rows are ragged");
  const std::size_t n = rows.size() / dim;
  check_labels(n, y, 2);
  if (!(opts.c > 0.0) || !(opts.gamma > 0.0)) throw InvalidConfig("svm: c and gamma must be positive");

  std::vector<double> K(n * n);
  kernels::rbf_gram_omp(rows, dim, opts.gamma, K);

  const double C = opts.c;
  constexpr double kTau = 1e-12;
  std::vector<double> ys(n), alpha(n, 0.0), G(n, -1.0);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] ? 1.0 : -1.0;
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  const std::size_t max_iter = opts.max_iter ? opts.max_iter : std::max<std::size_t>(10'000'000, 100 * n);
  SvmCore core;
  core.dim = dim;
  core.gamma = opts.gamma;
  core.c = C;
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    // Maximal violating i, then j by second-order gain.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (ys[t] > 0 ? !upper(t) : !lower(t)) {
        const double v = -ys[t] * G[t];
        if (v >= gmax) {
          gmax = v;
          i = t;
        }
      }
    }
    if (i == n) {
      core.converged = true;
      break;
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (!(ys[t] > 0 ? !lower(t) : !upper(t))) continue;
      const double v = ys[t] * G[t];
      if (v >= gmax2) gmax2 = v;
      const double grad_diff = gmax + v;
      if (grad_diff > 0) {
        double quad = K[i * n + i] + K[t * n + t] - 2.0 * K[i * n + t];
        if (quad <= 0) quad = kTau;
        const double obj_diff = -(grad_diff * grad_diff) / quad;
        if (obj_diff <= best) {
          best = obj_diff;
          j = t;
        }
      }
    }
    if (gmax + gmax2 < opts.tol || j == n) {
      core.converged = true;
      break;
    }

    double quad = K[i * n + i] + K[j * n + j] - 2.0 * K[i * n + j];
    if (quad <= 0) quad = kTau;
    const double old_ai = alpha[i], old_aj = alpha[j];
    double ai = old_ai, aj = old_aj;
    if (ys[i] != ys[j]) {
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) {
          aj = 0;
          ai = diff;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = -diff;
      }
      if (diff > 0) {
        if (ai > C) {
          ai = C;
          aj = C - diff;
        }
      } else if (aj > C) {
        aj = C;
        ai = C + diff;
      }
    } else {
      const double delta = (G[i] - G[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) {
          ai = C;
          aj = sum - C;
        }
      } else if (aj < 0) {
        aj = 0;
        ai = sum;
      }
      if (sum > C) {
        if (aj > C) {
          aj = C;
          ai = sum - C;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = sum;
      }
    }
    alpha[i] = ai;
    alpha[j] = aj;
    const double dai = ai - old_ai, daj = aj - old_aj;
    for (std::size_t t = 0; t < n; ++t)
      G[t] += ys[i] * ys[t] * K[i * n + t] * dai + ys[j] * ys[t] * K[j * n + t] * daj;
  }
  core.iterations = iter;

  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t n_free = 0;
  double half_quad = 0.0;  // ½αᵀQα − Σα, tracked through the gradient
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = ys[t] * G[t];
    if (upper(t)) {
      if (ys[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (ys[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
    half_quad += alpha[t] * (G[t] - 1.0) / 2.0;
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  core.bias = -rho;
  core.dual_objective = -half_quad;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0.0) continue;
    core.coef.push_back(alpha[t] * ys[t]);
    core.support.insert(core.support.end(), rows.begin() + static_cast<std::ptrdiff_t>(t * dim),
                        rows.begin() + static_cast<std::ptrdiff_t>((t + 1) * dim));
  }
  return core;
}

SvmModel train_svm(std::span<const SvmFeatures> x, std::span<const int> y, const SvmOptions& opts) {
  if (x.size() != y.size()) throw DimensionMismatch("labels and samples differ in length");
  std::vector<double> rows;
  rows.reserve(x.size() * kSvmDim);
  for (const auto& f : x) {
    const auto v = f.vec();
    rows.insert(rows.end(), v.begin(), v.end());
  }
  check_labels(x.size(), y, 2);
  SvmModel m;
  m.scaler = fit_scaler(rows, kSvmDim);
  m.core = train_svm_dense(scale_rows(m.scaler, rows), kSvmDim, y, opts);
  return m;
}

double logistic(double f) {
  if (f >= 0) return 1.0 / (1.0 + std::exp(-f));
  const double e = std::exp(f);
  return e / (1.0 + e);
}

double svm_decision(const SvmModel& m, const SvmFeatures& x) {
  const auto v = x.vec();
  std::array<double, kSvmDim> z{};
  m.scaler.apply(v, z);
  return m.core.decision(z);
}

double predict_svm(const SvmModel& m, const SvmFeatures& x) { return logistic(svm_decision(m, x)); }

// ---- fusion ---------------------------------------------------------------------------------

FusedScore fuse_scores(double p_mlr, double p_svm, double threshold) {
  FusedScore s{p_mlr, p_svm, (p_mlr + p_svm) / 2.0, false};
  s.ransomware = s.score >= threshold;
  return s;
}

FusedScore fuse(const FusedClassifier& fc, const MlrFeatures& x_mlr, const SvmFeatures& x_svm) {
  return fuse_scores(predict_mlr(fc.mlr, x_mlr), predict_svm(fc.svm, x_svm), fc.threshold);
}

FusedClassifier train_fused(std::span<const MlrFeatures> x_mlr, std::span<const SvmFeatures> x_svm,
                            std::span<const int> y, const TrainOptions& opts) {
  if (!(opts.threshold > 0.0 && opts.threshold < 1.0)) throw InvalidConfig("threshold must lie in (0,1)");
  FusedClassifier fc;
  fc.mlr = train_mlr(x_mlr, y, opts.mlr);
  fc.svm = train_svm(x_svm, y, opts.svm);
  fc.threshold = opts.threshold;
  return fc;
}

// ---- persistence ----------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class It>
std::string join(It first, It last) {
  std::string out;
  for (auto it = first; it != last; ++it) {
    if (!out.empty()) out.push_back(' ');
    out += fmt(*it);
  }
  return out;
}

void write_scaler(std::ostream& out, std::string_view name, const Scaler& s) {
  out << '[' << name << "]\n";
  out << "mean = " << join(s.mean.begin(), s.mean.end()) << '\n';
  out << "std = " << join(s.std.begin(), s.std.end()) << '\n';
  out << "degenerate =";
  for (bool b : s.degenerate) out << ' ' << (b ? 1 : 0);
  out << '\n';
}

struct Section {
  std::size_t line = 0;
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<std::size_t> lines;
};

class Reader {
 public:
  explicit Reader(std::map<std::string, Section> sections) : sections_(std::move(sections)) {}

  const Section& section(const std::string& name) const {
    auto it = sections_.find(name);
    if (it == sections_.end()) throw ParseError(0, "missing section [" + name + "]");
    return it->second;
  }

  static std::vector<double> reals(const Section& s, const std::string& key, std::size_t expect = SIZE_MAX) {
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
      if (s.entries[i].first != key) continue;
      auto v = parse_reals(s.entries[i].second, s.lines[i]);
      if (expect != SIZE_MAX && v.size() != expect)
        throw ParseError(s.lines[i], "'" + key + "' expects " + std::to_string(expect) + " values");
      return v;
    }
    throw ParseError(s.line, "missing key '" + key + "'");
  }

  static std::vector<std::vector<double>> all(const Section& s, const std::string& key, std::size_t width) {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
      if (s.entries[i].first != key) continue;
      auto v = parse_reals(s.entries[i].second, s.lines[i]);
      if (v.size() != width) throw ParseError(s.lines[i], "'" + key + "' expects " + std::to_string(width) + " values");
      out.push_back(std::move(v));
    }
    return out;
  }

  static double real(const Section& s, const std::string& key) { return reals(s, key, 1)[0]; }

 private:
  static std::vector<double> parse_reals(const std::string& text, std::size_t line) {
    std::vector<double> out;
    const char* p = text.data();
    const char* end = p + text.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc() || (res.ptr != end && *res.ptr != ' '))
        throw ParseError(line, "bad number in '" + text + "'");
      out.push_back(v);
      p = res.ptr;
    }
    return out;
  }

  std::map<std::string, Section> sections_;
};

Scaler read_scaler(const Reader& r, const std::string& name, std::size_t dim) {
  const auto& s = r.section(name);
  Scaler sc;
  sc.mean = Reader::reals(s, "mean", dim);
  sc.std = Reader::reals(s, "std", dim);
  for (double v : Reader::reals(s, "degenerate", dim)) sc.degenerate.push_back(v != 0.0);
  for (double v : sc.std)
    if (!(v > 0.0)) throw ParseError(s.line, "scaler std must be positive");
  return sc;
}

}  // namespace

void save_model(const FusedClassifier& fc, std::ostream& out) {
  out << kModelHeader << '\n';
  write_scaler(out, "scaler.mlr", fc.mlr.scaler);
  out << "[mlr]\n";
  out << "l2 = " << fmt(fc.mlr.l2) << '\n';
  out << "converged = " << (fc.mlr.converged ? 1 : 0) << '\n';
  out << "iterations = " << fc.mlr.iterations << '\n';
  out << "w.benign = " << join(fc.mlr.weights[0].begin(), fc.mlr.weights[0].end()) << '\n';
  out << "w.ransomware = " << join(fc.mlr.weights[1].begin(), fc.mlr.weights[1].end()) << '\n';
  write_scaler(out, "scaler.svm", fc.svm.scaler);
  const auto& c = fc.svm.core;
  out << "[svm]\n";
  out << "dim = " << c.dim << '\n';
  out << "gamma = " << fmt(c.gamma) << '\n';
  out << "c = " << fmt(c.c) << '\n';
  out << "bias = " << fmt(c.bias) << '\n';
  out << "dual_objective = " << fmt(c.dual_objective) << '\n';
  out << "converged = " << (c.converged ? 1 : 0) << '\n';
  out << "iterations = " << c.iterations << '\n';
  out << "n_support = " << c.n_support() << '\n';
  for (std::size_t s = 0; s < c.n_support(); ++s) {
    const auto* row = c.support.data() + s * c.dim;
    out << "sv = " << fmt(c.coef[s]) << ' ' << join(row, row + c.dim) << '\n';
  }
  out << "[fusion]\n";
  out << "threshold = " << fmt(fc.threshold) << '\n';
  if (!out) throw IoError("failed writing model");
}

FusedClassifier load_model(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(1, "empty model stream");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  constexpr std::string_view kMagic = "PEELER-MODEL ";
  if (line.rfind(kMagic, 0) != 0) throw ParseError(1, "missing PEELER-MODEL header");
  if (line != kModelHeader) throw VersionMismatch("unsupported model version '" + line.substr(kMagic.size()) + "'");

  std::map<std::string, Section> sections;
  Section* cur = nullptr;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "malformed section header");
      const auto name = line.substr(1, line.size() - 2);
      if (sections.contains(name)) throw ParseError(line_no, "duplicate section [" + name + "]");
      cur = &sections[name];
      cur->line = line_no;
      continue;
    }
    if (!cur) throw ParseError(line_no, "entry outside a section");
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    cur->entries.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    cur->lines.push_back(line_no);
  }

  Reader r(std::move(sections));
  FusedClassifier fc;
  fc.mlr.scaler = read_scaler(r, "scaler.mlr", kMlrDim);
  const auto& mlr = r.section("mlr");
  fc.mlr.l2 = Reader::real(mlr, "l2");
  fc.mlr.converged = Reader::real(mlr, "converged") != 0.0;
  fc.mlr.iterations = static_cast<std::size_t>(Reader::real(mlr, "iterations"));
  const auto wb = Reader::reals(mlr, "w.benign", kMlrCols);
  const auto wr = Reader::reals(mlr, "w.ransomware", kMlrCols);
  std::copy(wb.begin(), wb.end(), fc.mlr.weights[0].begin());
  std::copy(wr.begin(), wr.end(), fc.mlr.weights[1].begin());

  fc.svm.scaler = read_scaler(r, "scaler.svm", kSvmDim);
  const auto& svm = r.section("svm");
  auto& c = fc.svm.core;
  c.dim = static_cast<std::size_t>(Reader::real(svm, "dim"));
  if (c.dim != kSvmDim) throw ParseError(svm.line, "svm dim must be 8");
  c.gamma = Reader::real(svm, "gamma");
  c.c = Reader::real(svm, "c");
  if (!(c.gamma > 0.0) || !(c.c > 0.0)) throw ParseError(svm.line, "svm gamma and c must be positive");
  c.bias = Reader::real(svm, "bias");
  c.dual_objective = Reader::real(svm, "dual_objective");
  c.converged = Reader::real(svm, "converged") != 0.0;
  c.iterations = static_cast<std::size_t>(Reader::real(svm, "iterations"));
  const auto n_sv = static_cast<std::size_t>(Reader::real(svm, "n_support"));
  const auto rows = Reader::all(svm, "sv", c.dim + 1);
  if (rows.size() != n_sv) throw ParseError(svm.line, "n_support disagrees with sv rows");
  for (const auto& row : rows) {
    c.coef.push_back(row[0]);
    c.support.insert(c.support.end(), row.begin() + 1, row.end());
  }

  fc.threshold = Reader::real(r.section("fusion"), "threshold");
  if (!(fc.threshold > 0.0 && fc.threshold < 1.0)) throw ParseError(0, "threshold must lie in (0,1)");
  return fc;
}

void save_model_file(const FusedClassifier& fc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model '" + path + "'");
  save_model(fc, out);
}

FusedClassifier load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path + "'");
  return load_model(in);
}

}  // namespace peeler
