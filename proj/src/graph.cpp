#include "fairlat/graph.hpp"

#include <cmath>
#include <cstring>

namespace fairlat::graph {

namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_finite_leaf(const Matrix& m) {
  if (!m.allFinite()) throw NumericError("leaf value contains non-finite entries");
}

bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

}  // namespace

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::check(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw ShapeError("invalid node id " + std::to_string(id));
  return id;
}

int Tape::leaf(Matrix value, bool requires_grad) {
  require_finite_leaf(value);
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  check(a);
  check(b);
  const Matrix& A = val(a);
  const Matrix& B = val(b);
  if (A.cols() != B.rows())
    throw ShapeError("matmul: inner dimensions disagree, " + shape_of(A) + " * " +
                     shape_of(B));
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.value = A * B;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  check(a);
  check(b);
  const Matrix& A = val(a);
  const Matrix& B = val(b);
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw ShapeError("add: shape mismatch, " + shape_of(A) + " vs " + shape_of(B));
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = A + B;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int Tape::add_row(int a, int b) {
  check(a);
  check(b);
  const Matrix& A = val(a);
  const Matrix& B = val(b);
  if (B.rows() != 1 || A.cols() != B.cols())
    throw ShapeError("add_row: expected 1x" + std::to_string(A.cols()) +
                     " row bias, got " + shape_of(B));
  Node n;
  n.op = Op::kAddRow;
  n.a = a;
  n.b = b;
  n.value = A;
  n.value.rowwise() += B.row(0);
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  check(a);
  check(b);
  const Matrix& A = val(a);
  const Matrix& B = val(b);
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw ShapeError("sub: shape mismatch, " + shape_of(A) + " vs " + shape_of(B));
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = A - B;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  check(a);
  check(b);
  const Matrix& A = val(a);
  const Matrix& B = val(b);
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw ShapeError("mul: shape mismatch, " + shape_of(A) + " vs " + shape_of(B));
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = A.cwiseProduct(B);
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int Tape::div(int a, int b) {
  check(a);
  check(b);
  const Matrix& A = val(a);
  const Matrix& B = val(b);
  Node n;
  n.op = Op::kDiv;
  n.a = a;
  n.b = b;
  if (is_scalar(B)) {
    n.value = A / B(0, 0);
  } else if (A.rows() == B.rows() && A.cols() == B.cols()) {
    n.value = A.cwiseQuotient(B);
  } else {
    throw ShapeError("div: shape mismatch, " + shape_of(A) + " / " + shape_of(B));
  }
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(n));
}

int Tape::scale(int a, double c) {
  check(a);
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.c = c;
  n.value = val(a) * c;
  n.requires_grad = nodes_[a].requires_grad;
  return push(std::move(n));
}

int Tape::square(int a) {
  check(a);
  Node n;
  n.op = Op::kSquare;
  n.a = a;
  n.value = val(a).array().square();
  n.requires_grad = nodes_[a].requires_grad;
  return push(std::move(n));
}

int Tape::abs(int a) {
  check(a);
  Node n;
  n.op = Op::kAbs;
  n.a = a;
  n.value = val(a).array().abs();
  n.requires_grad = nodes_[a].requires_grad;
  return push(std::move(n));
}

int Tape::tanh(int a) {
  check(a);
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = val(a).array().tanh();
  n.requires_grad = nodes_[a].requires_grad;
  return push(std::move(n));
}

int Tape::sqrt(int a) {
  check(a);
  const Matrix& A = val(a);
  if ((A.array() < 0.0).any()) throw NumericError("sqrt: negative input");
  Node n;
  n.op = Op::kSqrt;
  n.a = a;
  n.value = A.array().sqrt();
  n.requires_grad = nodes_[a].requires_grad;
  return push(std::move(n));
}

int Tape::mean(int a) {
  check(a);
  const Matrix& A = val(a);
  if (A.size() == 0) throw ShapeError("mean: empty input");
  Node n;
  n.op = Op::kMean;
  n.a = a;
  n.value = Matrix::Constant(1, 1, A.mean());
  n.requires_grad = nodes_[a].requires_grad;
  return push(std::move(n));
}

int Tape::sum(int a) {
  check(a);
  const Matrix& A = val(a);
  if (A.size() == 0) throw ShapeError("sum: empty input");
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.value = Matrix::Constant(1, 1, A.sum());
  n.requires_grad = nodes_[a].requires_grad;
  return push(std::move(n));
}

int Tape::broadcast(int a, Index rows, Index cols) {
  check(a);
  const Matrix& A = val(a);
  if (!is_scalar(A))
    throw ShapeError("broadcast: source must be scalar, got " + shape_of(A));
  if (rows < 1 || cols < 1) throw ShapeError("broadcast: empty target shape");
  Node n;
  n.op = Op::kBroadcast;
  n.a = a;
  n.value = Matrix::Constant(rows, cols, A(0, 0));
  n.requires_grad = nodes_[a].requires_grad;
  return push(std::move(n));
}

void Tape::backward(int output) {
  check(output);
  if (!is_scalar(nodes_[output].value))
    throw ShapeError("backward: output must be scalar, got " +
                     shape_of(nodes_[output].value));

  for (Node& n : nodes_) {
    if (n.requires_grad)
      n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    else
      n.grad.resize(0, 0);
  }
  if (!nodes_[output].requires_grad) return;  // constant output: all grads zero
  nodes_[output].grad(0, 0) = 1.0;

  for (int i = output; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.op == Op::kLeaf) continue;
    const Matrix& g = n.grad;
    Node& pa = nodes_[n.a];
    switch (n.op) {
      case Op::kMatMul: {
        Node& pb = nodes_[n.b];
        if (pa.requires_grad) pa.grad.noalias() += g * pb.value.transpose();
        if (pb.requires_grad) pb.grad.noalias() += pa.value.transpose() * g;
        break;
      }
      case Op::kAdd: {
        Node& pb = nodes_[n.b];
        if (pa.requires_grad) pa.grad += g;
        if (pb.requires_grad) pb.grad += g;
        break;
      }
      case Op::kAddRow: {
        Node& pb = nodes_[n.b];
        if (pa.requires_grad) pa.grad += g;
        if (pb.requires_grad) pb.grad += g.colwise().sum();
        break;
      }
      case Op::kSub: {
        Node& pb = nodes_[n.b];
        if (pa.requires_grad) pa.grad += g;
        if (pb.requires_grad) pb.grad -= g;
        break;
      }
      case Op::kMul: {
        Node& pb = nodes_[n.b];
        if (pa.requires_grad) pa.grad.array() += g.array() * pb.value.array();
        if (pb.requires_grad) pb.grad.array() += g.array() * pa.value.array();
        break;
      }
      case Op::kDiv: {
        Node& pb = nodes_[n.b];
        if (is_scalar(pb.value) && !is_scalar(pa.value)) {
          const double b = pb.value(0, 0);
          if (pa.requires_grad) pa.grad += g / b;
          if (pb.requires_grad)
            pb.grad(0, 0) -= (g.array() * pa.value.array()).sum() / (b * b);
        } else {
          if (pa.requires_grad) pa.grad.array() += g.array() / pb.value.array();
          if (pb.requires_grad)
            pb.grad.array() -= g.array() * pa.value.array() /
                               pb.value.array().square();
        }
        break;
      }
      case Op::kScale:
        if (pa.requires_grad) pa.grad += g * n.c;
        break;
      case Op::kSquare:
        if (pa.requires_grad) pa.grad.array() += 2.0 * g.array() * pa.value.array();
        break;
      case Op::kAbs:
        if (pa.requires_grad)
          pa.grad.array() += g.array() * pa.value.array().sign();
        break;
      case Op::kTanh:
        if (pa.requires_grad)
          pa.grad.array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::kSqrt:
        if (pa.requires_grad)
          pa.grad.array() += g.array() * 0.5 / n.value.array();
        break;
      case Op::kMean:
        if (pa.requires_grad)
          pa.grad.array() += g(0, 0) / static_cast<double>(pa.value.size());
        break;
      case Op::kSum:
        if (pa.requires_grad) pa.grad.array() += g(0, 0);
        break;
      case Op::kBroadcast:
        if (pa.requires_grad) pa.grad(0, 0) += g.sum();
        break;
      case Op::kLeaf:
        break;
    }
  }
}

GradReport grad_check(const LossWithGrad& loss, const std::vector<Matrix>& params,
                      double eps) {
  if (eps < 1e-7 || eps > 1e-3)
    throw ConfigError("grad_check: eps must lie in [1e-7, 1e-3]");

  auto [base_value, analytic] = loss(params);
  auto [replay_value, replay_grads] = loss(params);
  if (std::memcmp(&base_value, &replay_value, sizeof(double)) != 0)
    throw NumericError("grad_check: loss is not deterministic across re-evaluation");
  (void)replay_grads;
  if (analytic.size() != params.size())
    throw ShapeError("grad_check: gradient count does not match parameter count");

  GradReport report;
  report.eps = eps;
  report.params.resize(params.size());
  std::vector<Matrix> work = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    GradReport::PerParam& pp = report.params[p];
    for (Index i = 0; i < params[p].size(); ++i) {
      const double saved = work[p](i);
      work[p](i) = saved + eps;
      const double up = loss(work).first;
      work[p](i) = saved - eps;
      const double down = loss(work).first;
      work[p](i) = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p](i);
      const double err = rel_err(a, numeric);
      if (err > pp.max_rel_err) {
        pp.max_rel_err = err;
        pp.worst_index = i;
        pp.analytic = a;
        pp.numeric = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, pp.max_rel_err);
  }
  return report;
}

}  // namespace fairlat::graph
