#pragma once

#include <string>
#include <vector>

#include "fairlat/graph.hpp"
#include "fairlat/types.hpp"

namespace fairlat::losses {

/// Sample correlation on tiny batches is noise; batches below this size are
/// rejected by the correlation terms.
inline constexpr int kMinCorrBatch = 8;

struct LossConfig {
  double eta = 0.5;        // balance between bias and target correlations
  double lambda = 1.0;     // joint-loss weight on the correlation term
  double variance_floor = 1e-8;  // added to each std dev in the denominator

  void validate() const;
};

/// Batch Pearson correlation with population moments:
///   cov(a, b) / ((sigma_a + floor) * (sigma_b + floor)).
/// Rejects zero-variance input when the floor is exactly 0.
double pearson_corr(const VectorRef& a, const VectorRef& b,
                    double variance_floor = 1e-8);

/// Tape-side Pearson correlation between two d x 1 column nodes.
int pearson_corr_node(graph::Tape& tape, int a, int b, double variance_floor);

/// Mean over all elements of (X - X')^2.
double rec_loss(const MatrixRef& X, const MatrixRef& X_rec);
int rec_loss_node(graph::Tape& tape, int x, int x_rec);

/// sum_i |Corr(z_p, s_i)| - eta * |Corr(z_p, t)|. S may have zero columns,
/// which reduces to the bias-free ablation. Rejects batches smaller than
/// kMinCorrBatch and batches where t or any s_i is constant.
double corr_loss(const VectorRef& z_p, const VectorRef& t, const MatrixRef& S,
                 double eta, double variance_floor = 1e-8);

/// Tape-side correlation loss; t and the bias columns enter as constant
/// leaves. Performs the same degenerate-batch checks as the plain form.
int corr_loss_node(graph::Tape& tape, int z_p, const VectorRef& t,
                   const MatrixRef& S, const LossConfig& config);

/// rec_loss + lambda * corr_loss.
double joint_loss(const MatrixRef& X, const MatrixRef& X_rec, const VectorRef& z_p,
                  const VectorRef& t, const MatrixRef& S, const LossConfig& config);

/// Throws NumericError when the batch cannot support the correlation terms
/// (too small, or constant t / s_i). Used to decide batch skips before any
/// tape work.
void check_corr_batch(const VectorRef& t, const MatrixRef& S);

/// One indicator column per non-reference category, in first-appearance
/// order of the labels. Column names are returned alongside.
struct DummyEncoding {
  Matrix columns;                        // d x (c-1)
  std::vector<std::string> column_labels;
};
DummyEncoding dummy_encode(const std::vector<std::string>& labels,
                           const std::string& reference);

}  // namespace fairlat::losses
