#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fairlat/errors.hpp"
#include "fairlat/types.hpp"

namespace fairlat::graph {

// Define-by-run reverse-mode tape. A tape is rebuilt per batch; node ids are
// indices into the tape, which by construction is already in topological
// order, so the backward pass is a single reverse sweep.

enum class Op : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,       // same shape
  kAddRow,    // d x m plus 1 x m row bias
  kSub,       // same shape
  kMul,       // elementwise, same shape
  kDiv,       // same shape, or denominator scalar (1x1)
  kScale,     // node times compile-time constant
  kSquare,
  kAbs,       // subgradient sign(x), sign(0) = 0
  kTanh,
  kSqrt,
  kMean,      // mean over all elements -> 1x1
  kSum,       // sum over all elements -> 1x1
  kBroadcast, // 1x1 -> rows x cols
};

struct Node {
  Op op = Op::kLeaf;
  int a = -1;
  int b = -1;
  double c = 0.0;  // scale factor for kScale
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
};

class Tape {
 public:
  int leaf(Matrix value, bool requires_grad = false);

  int matmul(int a, int b);
  int add(int a, int b);
  int add_row(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int div(int a, int b);
  int scale(int a, double c);
  int square(int a);
  int abs(int a);
  int tanh(int a);
  int sqrt(int a);
  int mean(int a);
  int sum(int a);
  int broadcast(int a, Index rows, Index cols);

  const Matrix& value(int id) const { return nodes_[check(id)].value; }
  const Matrix& grad(int id) const { return nodes_[check(id)].grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Accumulates gradients for every node reachable from `output`, which must
  /// be scalar (1x1). Unreached nodes keep zero gradient. Each node's grad is
  /// reset at the start of the sweep; calling backward twice on the same tape
  /// does not double-count.
  void backward(int output);

 private:
  int push(Node n);
  int check(int id) const;
  const Matrix& val(int id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
};

/// Relative error |a - f| / max(|a|, |f|, 1e-12) between analytic and
/// central-finite-difference gradients, per parameter tensor.
struct GradReport {
  struct PerParam {
    double max_rel_err = 0.0;
    Index worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
  };
  std::vector<PerParam> params;
  double max_rel_err = 0.0;
  double eps = 0.0;
};

/// Evaluates the loss and its analytic gradients at `params`. Implementations
/// build a fresh tape, run backward, and return (value, per-parameter grads).
using LossWithGrad =
    std::function<std::pair<double, std::vector<Matrix>>(const std::vector<Matrix>&)>;

/// Central-difference check of the analytic gradients produced by `loss`.
/// eps must lie in [1e-7, 1e-3]. The loss must be deterministic: it is
/// evaluated twice at the base point and rejected if the values differ.
GradReport grad_check(const LossWithGrad& loss, const std::vector<Matrix>& params,
                      double eps);

inline double rel_err(double a, double f) {
  return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-12});
}

}  // namespace fairlat::graph
