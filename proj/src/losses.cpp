#include "fairlat/losses.hpp"

#include <algorithm>
#include <cmath>

#include "fairlat/errors.hpp"

namespace fairlat::losses {

namespace {

bool is_constant(const VectorRef& v) {
  return v.maxCoeff() == v.minCoeff();
}

void check_pair(const VectorRef& a, const VectorRef& b) {
  if (a.size() != b.size())
    throw ShapeError("pearson_corr: length mismatch, " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  if (a.size() < 2) throw ShapeError("pearson_corr: need at least 2 samples");
  if (!a.allFinite() || !b.allFinite())
    throw NumericError("pearson_corr: non-finite input");
}

}  // namespace

void LossConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("loss config: eta must be > 0");
  if (lambda < 0.0) throw ConfigError("loss config: lambda must be >= 0");
  if (variance_floor != 0.0 &&
      (variance_floor < 1e-12 || variance_floor > 1e-6))
    throw ConfigError("loss config: variance floor must lie in [1e-12, 1e-6]");
}

double pearson_corr(const VectorRef& a, const VectorRef& b, double variance_floor) {
  check_pair(a, b);
  const double d = static_cast<double>(a.size());
  const double am = a.mean();
  const double bm = b.mean();
  const Vector ac = a.array() - am;
  const Vector bc = b.array() - bm;
  const double cov = ac.dot(bc) / d;
  const double sa = std::sqrt(ac.squaredNorm() / d);
  const double sb = std::sqrt(bc.squaredNorm() / d);
  if (variance_floor == 0.0 && (sa == 0.0 || sb == 0.0))
    throw NumericError("pearson_corr: zero-variance input with no variance floor");
  return cov / ((sa + variance_floor) * (sb + variance_floor));
}

int pearson_corr_node(graph::Tape& tape, int a, int b, double variance_floor) {
  const Index d = tape.value(a).rows();
  if (tape.value(a).cols() != 1 || tape.value(b).cols() != 1)
    throw ShapeError("pearson_corr_node: expects column vectors");
  if (tape.value(b).rows() != d)
    throw ShapeError("pearson_corr_node: length mismatch");
  if (d < 2) throw ShapeError("pearson_corr_node: need at least 2 samples");

  const int ac = tape.sub(a, tape.broadcast(tape.mean(a), d, 1));
  const int bc = tape.sub(b, tape.broadcast(tape.mean(b), d, 1));
  const int cov = tape.mean(tape.mul(ac, bc));
  const int floor_leaf = tape.leaf(Matrix::Constant(1, 1, variance_floor));
  const int sa = tape.add(tape.sqrt(tape.mean(tape.square(ac))), floor_leaf);
  const int sb = tape.add(tape.sqrt(tape.mean(tape.square(bc))), floor_leaf);
  return tape.div(cov, tape.mul(sa, sb));
}

double rec_loss(const MatrixRef& X, const MatrixRef& X_rec) {
  if (X.rows() != X_rec.rows() || X.cols() != X_rec.cols())
    throw ShapeError("rec_loss: shape mismatch, " + std::to_string(X.rows()) + "x" +
                     std::to_string(X.cols()) + " vs " + std::to_string(X_rec.rows()) +
                     "x" + std::to_string(X_rec.cols()));
  return (X - X_rec).array().square().mean();
}

int rec_loss_node(graph::Tape& tape, int x, int x_rec) {
  return tape.mean(tape.square(tape.sub(x, x_rec)));
}

void check_corr_batch(const VectorRef& t, const MatrixRef& S) {
  if (t.size() < kMinCorrBatch)
    throw NumericError("correlation batch too small: " + std::to_string(t.size()) +
                       " < " + std::to_string(kMinCorrBatch));
  if (is_constant(t))
    throw NumericError("degenerate batch: target is constant");
  for (Index j = 0; j < S.cols(); ++j)
    if (is_constant(S.col(j)))
      throw NumericError("degenerate batch: bias column " + std::to_string(j) +
                         " is constant");
}

double corr_loss(const VectorRef& z_p, const VectorRef& t, const MatrixRef& S,
                 double eta, double variance_floor) {
  if (z_p.size() != t.size() || (S.cols() > 0 && S.rows() != z_p.size()))
    throw ShapeError("corr_loss: batch length mismatch");
  check_corr_batch(t, S);
  double loss = -eta * std::abs(pearson_corr(z_p, t, variance_floor));
  for (Index j = 0; j < S.cols(); ++j)
    loss += std::abs(pearson_corr(z_p, S.col(j), variance_floor));
  return loss;
}

int corr_loss_node(graph::Tape& tape, int z_p, const VectorRef& t,
                   const MatrixRef& S, const LossConfig& config) {
  if (tape.value(z_p).rows() != t.size())
    throw ShapeError("corr_loss_node: batch length mismatch");
  check_corr_batch(t, S);
  const int t_leaf = tape.leaf(t);
  int loss =
      tape.scale(tape.abs(pearson_corr_node(tape, z_p, t_leaf,
                                            config.variance_floor)),
                 -config.eta);
  for (Index j = 0; j < S.cols(); ++j) {
    const int s_leaf = tape.leaf(S.col(j));
    loss = tape.add(
        loss, tape.abs(pearson_corr_node(tape, z_p, s_leaf, config.variance_floor)));
  }
  return loss;
}

double joint_loss(const MatrixRef& X, const MatrixRef& X_rec, const VectorRef& z_p,
                  const VectorRef& t, const MatrixRef& S, const LossConfig& config) {
  config.validate();
  const double rec = rec_loss(X, X_rec);
  if (config.lambda == 0.0) return rec;
  return rec + config.lambda * corr_loss(z_p, t, S, config.eta,
                                         config.variance_floor);
}

DummyEncoding dummy_encode(const std::vector<std::string>& labels,
                           const std::string& reference) {
  if (labels.empty()) throw DataError("dummy_encode: empty label vector");
  std::vector<std::string> categories;
  for (const std::string& l : labels)
    if (std::find(categories.begin(), categories.end(), l) == categories.end())
      categories.push_back(l);
  if (categories.size() < 2)
    throw DataError("dummy_encode: single-category input has no variance");
  if (std::find(categories.begin(), categories.end(), reference) == categories.end())
    throw DataError("dummy_encode: reference label '" + reference +
                    "' not present");

  DummyEncoding enc;
  for (const std::string& c : categories)
    if (c != reference) enc.column_labels.push_back(c);
  enc.columns = Matrix::Zero(static_cast<Index>(labels.size()),
                             static_cast<Index>(enc.column_labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < enc.column_labels.size(); ++j)
      if (labels[i] == enc.column_labels[j])
        enc.columns(static_cast<Index>(i), static_cast<Index>(j)) = 1.0;
  return enc;
}

}  // namespace fairlat::losses
