#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairlat/model.hpp"
#include "fairlat/synth.hpp"
#include "fairlat/train.hpp"
#include "fairlat/types.hpp"

namespace fairlat::eval {

enum class PredictorKind : std::uint8_t { kLinear, kLogistic };

/// Scalar regression on the projected feature z_p: t_hat = LR(z_p).
struct Predictor {
  PredictorKind kind = PredictorKind::kLinear;
  double intercept = 0.0;
  double slope = 0.0;
  bool converged = true;  // logistic Newton convergence within 100 iterations

  /// Continuous prediction score; logistic returns the positive-class
  /// probability.
  double score(double z_p) const;
  Vector score(const VectorRef& z_p) const;
};

/// Linear: closed-form least squares. Logistic: Newton on the log-likelihood
/// with an L2 ridge of 1e-6 on the slope, tolerance 1e-8, at most 100
/// iterations; non-convergence returns the last iterate flagged.
Predictor fit_predictor(const VectorRef& z_p, const VectorRef& t, PredictorKind kind);

/// Mann-Whitney AUC; tied scores receive half credit.
double auc(const VectorRef& scores, const VectorRef& labels);

double rmse(const VectorRef& pred, const VectorRef& truth);

struct SignedCorr {
  double magnitude = 0.0;
  char sign = '+';
  double raw = 0.0;
};
/// Pearson correlation of predictions with a bias attribute; '+' marks
/// overestimation with larger s, '-' underestimation.
SignedCorr signed_bias_corr(const VectorRef& t_hat, const VectorRef& s);

/// Mean over all elements of |X - X'|.
double rec_error_l1(const MatrixRef& X, const MatrixRef& X_rec);

struct LatentDiversity {
  Matrix corr;                        // n x n, unit diagonal
  double mean_abs_offdiag = 0.0;      // excluding pairs with constant columns
  std::vector<int> constant_columns;  // reported, not included in the mean
};
LatentDiversity latent_corr_matrix(const MatrixRef& Z);

/// OLS of standardized z_p on standardized biases and target:
///   z_p = beta0 + beta_s . s + beta_t . t + eps.
struct Eq1Diagnostics {
  double beta0 = 0.0;
  Vector beta_s;
  double beta_t = 0.0;
  Vector std_errors;  // ordered as (beta0, beta_s..., beta_t)
  double residual_std = 0.0;
  double r_squared = 0.0;
};
Eq1Diagnostics fit_eq1_diagnostics(const VectorRef& z_p, const VectorRef& t,
                                   const MatrixRef& S);

struct FoldMetrics {
  bool has_prediction = false;
  double accuracy = 0.0;           // AUC or R-MSE when has_prediction
  std::vector<double> bias_corr;   // signed Corr(t_hat, s_i)
  double rec_l1 = 0.0;
  double diversity = 0.0;
};

struct MethodReport {
  std::string method;
  std::string accuracy_metric;  // "AUC" or "R-MSE"
  bool has_prediction = false;
  std::vector<FoldMetrics> folds;
  FoldMetrics aggregate;  // arithmetic mean of fold values
};

struct CvSpec {
  std::string target;
  std::vector<std::string> biases;
  int folds = 5;
  std::optional<std::string> stratify;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Per fold: train with the configured mode (attaching unlabelled rows when
/// semi-supervised), fit the predictor on training z_p, and evaluate
/// accuracy, signed bias correlations, L1 reconstruction error and latent
/// diversity on the test split. A failed fold aborts with its index.
MethodReport cross_validate(const synth::Dataset& dataset,
                            const model::Architecture& arch,
                            const train::TrainConfig& config, const CvSpec& spec);

struct EvalReport {
  std::string target;
  std::vector<std::string> bias_names;
  std::vector<double> truth_corr;  // empirical Corr(t, s_i), the X column
  int folds = 5;
  std::vector<MethodReport> methods;

  std::string to_csv() const;
  std::string to_table() const;
};

/// Runs cross_validate for each method (mode) over the shared fold split and
/// assembles the Table-1/2-shaped report.
EvalReport evaluate_methods(const synth::Dataset& dataset,
                            const model::Architecture& arch,
                            const train::TrainConfig& base_config,
                            const std::vector<train::Mode>& methods,
                            const CvSpec& spec);

}  // namespace fairlat::eval
