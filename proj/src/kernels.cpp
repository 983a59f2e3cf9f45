#include "peeler/kernels.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace peeler::kernels {

namespace {

inline double gram_entry(const double* a, const double* b, std::size_t dim, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

inline double decision_row(const SvmCore& m, const double* z) {
  double f = m.bias;
  const std::size_t n = m.n_support();
  for (std::size_t s = 0; s < n; ++s) f += m.coef[s] * gram_entry(&m.support[s * m.dim], z, m.dim, m.gamma);
  return f;
}

}  // namespace

void rbf_gram_serial(std::span<const double> rows, std::size_t dim, double gamma, std::span<double> out) {
  const std::size_t n = rows.size() / dim;
  for (std::size_t i = 0; i < n; ++i) {
    out[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k = gram_entry(&rows[i * dim], &rows[j * dim], dim, gamma);
      out[i * n + j] = k;
      out[j * n + i] = k;
    }
  }
}

void rbf_gram_omp(std::span<const double> rows, std::size_t dim, double gamma, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(rows.size() / dim);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto un = static_cast<std::size_t>(n);
    out[ui * un + ui] = 1.0;
    for (std::size_t j = ui + 1; j < un; ++j) {
      const double k = gram_entry(&rows[ui * dim], &rows[j * dim], dim, gamma);
      out[ui * un + j] = k;
      out[j * un + ui] = k;
    }
  }
}

void svm_decision_batch_serial(const SvmCore& m, std::span<const double> rows, std::span<double> out) {
  const std::size_t n = rows.size() / m.dim;
  for (std::size_t i = 0; i < n; ++i) out[i] = decision_row(m, &rows[i * m.dim]);
}

void svm_decision_batch_omp(const SvmCore& m, std::span<const double> rows, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(rows.size() / m.dim);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    out[ui] = decision_row(m, &rows[ui * m.dim]);
  }
}

std::vector<SvmFeatures> svm_features_batch_serial(std::span<const Window> windows) {
  std::vector<SvmFeatures> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) out[i] = extract_svm_features(windows[i]);
  return out;
}

std::vector<SvmFeatures> svm_features_batch_omp(std::span<const Window> windows) {
  std::vector<SvmFeatures> out(windows.size());
  const auto n = static_cast<std::int64_t>(windows.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = extract_svm_features(windows[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<MlrFeatures> mlr_features_batch_serial(std::span<const Window> windows) {
  std::vector<MlrFeatures> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) out[i] = extract_mlr_features(build_process_tree(windows[i]));
  return out;
}

std::vector<MlrFeatures> mlr_features_batch_omp(std::span<const Window> windows) {
  std::vector<MlrFeatures> out(windows.size());
  const auto n = static_cast<std::int64_t>(windows.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    out[ui] = extract_mlr_features(build_process_tree(windows[ui]));
  }
  return out;
}

}  // namespace peeler::kernels
