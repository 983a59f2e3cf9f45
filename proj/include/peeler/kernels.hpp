#pragma once

// Data-parallel hot loops. Each kernel has a serial reference and an OpenMP variant that
// computes every output element with the same arithmetic, so the two agree bit for bit.

#include <span>
#include <vector>

#include "peeler/feature_extract.hpp"
#include "peeler/ml_models.hpp"
#include "peeler/trace_io.hpp"

namespace peeler::kernels {

/// out must hold n·n entries, n = rows.size() / dim.
void rbf_gram_serial(std::span<const double> rows, std::size_t dim, double gamma, std::span<double> out);
void rbf_gram_omp(std::span<const double> rows, std::size_t dim, double gamma, std::span<double> out);

/// Raw decision values for already-scaled rows.
void svm_decision_batch_serial(const SvmCore& m, std::span<const double> rows, std::span<double> out);
void svm_decision_batch_omp(const SvmCore& m, std::span<const double> rows, std::span<double> out);

std::vector<SvmFeatures> svm_features_batch_serial(std::span<const Window> windows);
std::vector<SvmFeatures> svm_features_batch_omp(std::span<const Window> windows);

std::vector<MlrFeatures> mlr_features_batch_serial(std::span<const Window> windows);
std::vector<MlrFeatures> mlr_features_batch_omp(std::span<const Window> windows);

}  // namespace peeler::kernels
