#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "peeler/feature_extract.hpp"

namespace peeler {

/// Per-feature standardization. Zero-variance features keep std = 1 and are flagged.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> degenerate;

  std::size_t dim() const { return mean.size(); }
  void apply(std::span<const double> x, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> x) const;
  bool operator==(const Scaler&) const = default;
};

/// Rows are row-major `dim`-wide. Uses the population standard deviation.
/// Throws std::invalid_argument with fewer than two samples.
Scaler fit_scaler(std::span<const double> rows, std::size_t dim);

// ---- multinomial logistic regression ---------------------------------------------------------

inline constexpr std::size_t kMlrCols = kMlrDim + 1;  // features + bias
using MlrWeights = std::array<std::array<double, kMlrCols>, 2>;  // [benign, ransomware]

struct MlrOptions {
  double l2 = 1e-3;
  std::size_t max_iter = 5000;
  double grad_tol = 1e-6;
};

struct MlrModel {
  Scaler scaler;
  MlrWeights weights{};
  double l2 = 1e-3;
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<double> loss_history;
};

/// Class probabilities for an already-scaled input.
std::array<double, 2> mlr_softmax(const MlrWeights& w, std::span<const double> z);

struct MlrObjective {
  double loss = 0.0;
  MlrWeights grad{};
};

/// Mean cross-entropy plus (l2/2)·‖W‖² over non-bias weights, with its analytic gradient.
/// `z` is row-major scaled data (kMlrDim wide), `y` is 1 for ransomware.
MlrObjective mlr_objective(const MlrWeights& w, std::span<const double> z, std::span<const int> y,
                           double l2);

/// Gradient descent with Armijo backtracking. Throws SingleClassError or DimensionMismatch.
MlrModel train_mlr(std::span<const MlrFeatures> x, std::span<const int> y, const MlrOptions& opts = {});
MlrModel train_mlr_dense(std::span<const double> rows, std::span<const int> y, const MlrOptions& opts = {});

double predict_mlr(const MlrModel& m, const MlrFeatures& x);
double predict_mlr_dense(const MlrModel& m, std::span<const double> x);

// ---- RBF support vector machine -------------------------------------------------------------

struct SvmOptions {
  double c = 10.0;
  double gamma = 1.0 / 8.0;
  double tol = 1e-3;
  /// 0 picks max(10'000'000, 100·n).
  std::size_t max_iter = 0;
};

/// Kernel machine in (already scaled) input space. coef[i] = αᵢ·yᵢ with yᵢ ∈ {−1, +1}.
struct SvmCore {
  std::size_t dim = 0;
  std::vector<double> support;  // row-major, dim wide
  std::vector<double> coef;
  double bias = 0.0;
  double gamma = 1.0 / 8.0;
  double c = 10.0;
  /// Σα − ½αᵀQα as tracked by the solver.
  double dual_objective = 0.0;
  bool converged = false;
  std::size_t iterations = 0;

  std::size_t n_support() const { return coef.size(); }
  double decision(std::span<const double> z) const;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// SMO with second-order working set selection on the precomputed Gram matrix.
/// `y` holds 1 (positive) / 0 (negative). Throws SingleClassError or DimensionMismatch.
SvmCore train_svm_dense(std::span<const double> rows, std::size_t dim, std::span<const int> y,
                        const SvmOptions& opts = {});

struct SvmModel {
  Scaler scaler;
  SvmCore core;
};

SvmModel train_svm(std::span<const SvmFeatures> x, std::span<const int> y, const SvmOptions& opts = {});

double logistic(double f);
double svm_decision(const SvmModel& m, const SvmFeatures& x);
/// logistic(f(x)).
double predict_svm(const SvmModel& m, const SvmFeatures& x);

// ---- fusion and persistence -----------------------------------------------------------------

struct FusedClassifier {
  MlrModel mlr;
  SvmModel svm;
  double threshold = 0.5;
};

struct FusedScore {
  double mlr = 0.0;
  double svm = 0.0;
  double score = 0.0;
  bool ransomware = false;
};

/// Average of two component scores; ransomware iff score ≥ threshold.
FusedScore fuse_scores(double p_mlr, double p_svm, double threshold);
FusedScore fuse(const FusedClassifier& fc, const MlrFeatures& x_mlr, const SvmFeatures& x_svm);

struct TrainOptions {
  MlrOptions mlr;
  SvmOptions svm;
  double threshold = 0.5;
};

FusedClassifier train_fused(std::span<const MlrFeatures> x_mlr, std::span<const SvmFeatures> x_svm,
                            std::span<const int> y, const TrainOptions& opts = {});

inline constexpr std::string_view kModelHeader = "PEELER-MODEL v1";

/// Throws IoError when the sink fails.
void save_model(const FusedClassifier& fc, std::ostream& out);
/// Throws ParseError or VersionMismatch.
FusedClassifier load_model(std::istream& in);
void save_model_file(const FusedClassifier& fc, const std::string& path);
FusedClassifier load_model_file(const std::string& path);

}  // namespace peeler
