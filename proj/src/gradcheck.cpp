#include "fairlat/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <sstream>

#include "fairlat/graph.hpp"
#include "fairlat/losses.hpp"
#include "fairlat/model.hpp"
#include "fairlat/rng.hpp"
#include "fairlat/types.hpp"

namespace fairlat::gradcheck {

namespace {

using graph::Tape;

Matrix random_matrix(Rng& rng, Index rows, Index cols, double lo = -2.0,
                     double hi = 2.0) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Keeps abs inputs off the subgradient kink.
Matrix random_matrix_away_from_zero(Rng& rng, Index rows, Index cols,
                                    double min_abs) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      double v;
      do {
        v = rng.uniform(-2.0, 2.0);
      } while (std::abs(v) < min_abs);
      m(i, j) = v;
    }
  return m;
}

// Builds the op under test and reduces it to a scalar against a fixed,
// well-conditioned weight pattern. The weighting gives every output element a
// distinct upstream gradient (catching transposed or misindexed backward
// rules) while keeping the reduction linear, so central differences stay
// exact in coordinates the op itself treats linearly.
using OpBuilder = std::function<int(Tape&, const std::vector<int>&)>;

struct OpCase {
  std::string name;
  std::function<std::vector<Matrix>(Rng&)> make_inputs;
  OpBuilder build;
  bool reduce = true;  // wrap in a weighted mean when the op is not scalar
};

Matrix weight_pattern(Index rows, Index cols) {
  Matrix w(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      w(i, j) = 0.5 + static_cast<double>((3 * i + 5 * j) % 7) / 7.0;
  return w;
}

graph::LossWithGrad make_loss(const OpCase& op, bool corrupt) {
  return [&op, corrupt](const std::vector<Matrix>& params)
             -> std::pair<double, std::vector<Matrix>> {
    Tape tape;
    std::vector<int> leaves;
    leaves.reserve(params.size());
    for (const Matrix& p : params) leaves.push_back(tape.leaf(p, true));
    int out = op.build(tape, leaves);
    if (op.reduce) {
      const Matrix& v = tape.value(out);
      out = tape.mean(tape.mul(out, tape.leaf(weight_pattern(v.rows(), v.cols()))));
    }
    tape.backward(out);
    std::vector<Matrix> grads;
    grads.reserve(params.size());
    for (int leaf : leaves) {
      Matrix g = tape.grad(leaf);
      if (corrupt) g.array() = g.array() * 1.01 + 1e-3;
      grads.push_back(std::move(g));
    }
    return {tape.value(out)(0, 0), std::move(grads)};
  };
}

std::vector<OpCase> op_cases() {
  std::vector<OpCase> ops;
  ops.push_back({"matmul",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4),
                                              random_matrix(rng, 4, 2)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   return t.matmul(in[0], in[1]);
                 }});
  ops.push_back({"add",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4),
                                              random_matrix(rng, 3, 4)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   return t.add(in[0], in[1]);
                 }});
  ops.push_back({"add_row",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 4, 3),
                                              random_matrix(rng, 1, 3)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   return t.add_row(in[0], in[1]);
                 }});
  ops.push_back({"sub",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4),
                                              random_matrix(rng, 3, 4)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   return t.sub(in[0], in[1]);
                 }});
  ops.push_back({"mul",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4),
                                              random_matrix(rng, 3, 4)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   return t.mul(in[0], in[1]);
                 }});
  ops.push_back({"div",
                 [](Rng& rng) {
                   return std::vector<Matrix>{
                       random_matrix(rng, 3, 3),
                       random_matrix_away_from_zero(rng, 3, 3, 0.5)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   return t.div(in[0], in[1]);
                 }});
  ops.push_back({"div_scalar",
                 [](Rng& rng) {
                   return std::vector<Matrix>{
                       random_matrix(rng, 4, 2),
                       random_matrix_away_from_zero(rng, 1, 1, 0.5)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   return t.div(in[0], in[1]);
                 }});
  ops.push_back({"scale",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   return t.scale(in[0], -0.7);
                 }});
  ops.push_back({"square",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4)};
                 },
                 [](Tape& t, const std::vector<int>& in) { return t.square(in[0]); }});
  ops.push_back({"abs",
                 [](Rng& rng) {
                   return std::vector<Matrix>{
                       random_matrix_away_from_zero(rng, 3, 4, 1e-3)};
                 },
                 [](Tape& t, const std::vector<int>& in) { return t.abs(in[0]); }});
  ops.push_back({"tanh",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4)};
                 },
                 [](Tape& t, const std::vector<int>& in) { return t.tanh(in[0]); }});
  ops.push_back({"sqrt",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4, 0.1, 2.0)};
                 },
                 [](Tape& t, const std::vector<int>& in) { return t.sqrt(in[0]); }});
  ops.push_back({"reduce_mean",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4)};
                 },
                 [](Tape& t, const std::vector<int>& in) { return t.mean(in[0]); },
                 false});
  ops.push_back({"reduce_sum",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 3, 4)};
                 },
                 [](Tape& t, const std::vector<int>& in) { return t.sum(in[0]); },
                 false});
  ops.push_back({"broadcast",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 1, 1)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   return t.mul(t.broadcast(in[0], 3, 4),
                                t.leaf(Matrix::Constant(3, 4, 0.5)));
                 }});
  ops.push_back({"projection",
                 [](Rng& rng) {
                   return std::vector<Matrix>{random_matrix(rng, 6, 3),
                                              random_matrix_away_from_zero(rng, 3, 1,
                                                                           0.2)};
                 },
                 [](Tape& t, const std::vector<int>& in) {
                   const int norm = t.sqrt(t.sum(t.square(in[1])));
                   return t.div(t.matmul(in[0], in[1]), norm);
                 }});
  return ops;
}

// Correlation inputs are resampled until every |Corr| term sits clear of the
// abs kink, mirroring the per-op exclusion.
constexpr double kCorrKinkGuard = 5e-3;

OpCase pearson_case() {
  return {"pearson_corr",
          [](Rng& rng) {
            for (;;) {
              Matrix a = random_matrix(rng, 16, 1);
              Matrix b = random_matrix(rng, 16, 1);
              const double c = losses::pearson_corr(a.col(0), b.col(0));
              if (std::abs(c) > kCorrKinkGuard && std::abs(c) < 0.99)
                return std::vector<Matrix>{a, b};
            }
          },
          [](Tape& t, const std::vector<int>& in) {
            return losses::pearson_corr_node(t, in[0], in[1], 1e-8);
          },
          false};
}

OpCase corr_loss_case() {
  // t and S are batch constants fixed per draw; only z_p is differentiated.
  auto batch = std::make_shared<std::pair<Vector, Matrix>>();
  return {"corr_loss",
          [batch](Rng& rng) {
            for (;;) {
              Matrix zp = random_matrix(rng, 16, 1);
              Matrix t = random_matrix(rng, 16, 1);
              Matrix s = random_matrix(rng, 16, 2);
              const double c0 = losses::pearson_corr(zp.col(0), t.col(0));
              const double c1 = losses::pearson_corr(zp.col(0), s.col(0));
              const double c2 = losses::pearson_corr(zp.col(0), s.col(1));
              if (std::min({std::abs(c0), std::abs(c1), std::abs(c2)}) >
                  kCorrKinkGuard) {
                batch->first = t.col(0);
                batch->second = s;
                return std::vector<Matrix>{zp};
              }
            }
          },
          [batch](Tape& tape, const std::vector<int>& in) {
            losses::LossConfig lc;
            lc.eta = 0.5;
            return losses::corr_loss_node(tape, in[0], batch->first, batch->second,
                                          lc);
          },
          false};
}

struct JointCheck {
  model::Architecture arch;
  Matrix X;
  Vector t;
  Matrix S;
};

JointCheck make_joint_check(Rng& rng, std::uint64_t seed) {
  JointCheck jc;
  jc.arch.input_dim = 6;
  jc.arch.latent_dim = 3;
  jc.arch.enc_hidden = {5};
  jc.arch.dec_hidden = {5};
  for (;;) {
    jc.X = random_matrix(rng, 8, 6);
    jc.t = random_matrix(rng, 8, 1);
    jc.S = random_matrix(rng, 8, 2);
    // The kink guard needs z_p, which depends on the params under test.
    model::ModelParams params = model::init_params(jc.arch, seed);
    const Vector zp = model::project(model::encode(jc.arch, params, jc.X),
                                     params.projection);
    const double c0 = losses::pearson_corr(zp, jc.t);
    const double c1 = losses::pearson_corr(zp, jc.S.col(0));
    const double c2 = losses::pearson_corr(zp, jc.S.col(1));
    if (std::min({std::abs(c0), std::abs(c1), std::abs(c2)}) > kCorrKinkGuard)
      return jc;
  }
}

graph::LossWithGrad make_joint_loss(const JointCheck& jc, bool corrupt) {
  return [&jc, corrupt](const std::vector<Matrix>& flat)
             -> std::pair<double, std::vector<Matrix>> {
    const model::ModelParams params = model::ModelParams::unflatten(jc.arch, flat);
    Tape tape;
    model::ForwardNodes nodes = model::build_forward(tape, jc.arch, params, jc.X);
    losses::LossConfig lc;
    lc.eta = 0.5;
    lc.lambda = 1.0;
    const int rec = losses::rec_loss_node(tape, nodes.x, nodes.x_rec);
    const int corr = losses::corr_loss_node(tape, nodes.z_p, jc.t, jc.S, lc);
    const int joint = tape.add(rec, tape.scale(corr, lc.lambda));
    tape.backward(joint);
    std::vector<Matrix> grads;
    for (int leaf : nodes.param_leaves) {
      Matrix g = tape.grad(leaf);
      if (corrupt) g.array() += 1e-3;
      grads.push_back(std::move(g));
    }
    return {tape.value(joint)(0, 0), std::move(grads)};
  };
}

}  // namespace

Summary run_suite(std::uint64_t seed, int points_per_op, double tolerance,
                  double eps, const std::string& corrupt_op) {
  Summary summary;
  summary.tolerance = tolerance;

  std::vector<OpCase> ops = op_cases();
  ops.push_back(pearson_case());
  ops.push_back(corr_loss_case());

  for (const OpCase& op : ops) {
    Rng rng = sub_rng(seed, "gradcheck-" + op.name);
    OpResult result;
    result.op = op.name;
    result.points = points_per_op;
    const graph::LossWithGrad loss = make_loss(op, corrupt_op == op.name);
    for (int p = 0; p < points_per_op; ++p) {
      const std::vector<Matrix> inputs = op.make_inputs(rng);
      const graph::GradReport report = graph::grad_check(loss, inputs, eps);
      result.max_rel_err = std::max(result.max_rel_err, report.max_rel_err);
    }
    result.pass = result.max_rel_err < tolerance;
    summary.ops.push_back(result);
  }

  {
    Rng rng = sub_rng(seed, "gradcheck-joint");
    OpResult result;
    result.op = "joint_loss";
    result.points = points_per_op;
    for (int p = 0; p < points_per_op; ++p) {
      const std::uint64_t point_seed = rng.next_u64();
      const JointCheck jc = make_joint_check(rng, point_seed);
      const model::ModelParams params = model::init_params(jc.arch, point_seed);
      const graph::GradReport report =
          graph::grad_check(make_joint_loss(jc, corrupt_op == "joint_loss"),
                            params.flatten(), eps);
      result.max_rel_err = std::max(result.max_rel_err, report.max_rel_err);
    }
    result.pass = result.max_rel_err < tolerance;
    summary.ops.push_back(result);
  }

  for (const OpResult& r : summary.ops) {
    if (r.max_rel_err >= summary.max_rel_err) {
      summary.max_rel_err = r.max_rel_err;
      summary.worst_op = r.op;
    }
  }
  summary.pass = true;
  for (const OpResult& r : summary.ops) summary.pass = summary.pass && r.pass;
  return summary;
}

std::string Summary::to_table() const {
  std::ostringstream out;
  out << "op                 points  max_rel_err    status\n";
  for (const OpResult& r : ops) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-18s %6d  %.3e      %s\n", r.op.c_str(),
                  r.points, r.max_rel_err, r.pass ? "ok" : "FAIL");
    out << line;
  }
  char tail[128];
  std::snprintf(tail, sizeof(tail), "worst: %s (%.3e, tolerance %.1e) -> %s\n",
                worst_op.c_str(), max_rel_err, tolerance,
                pass ? "PASS" : "FAIL");
  out << tail;
  return out.str();
}

}  // namespace fairlat::gradcheck
