#include "fairlat/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "fairlat/errors.hpp"
#include "fairlat/losses.hpp"
#include "fairlat/parallel.hpp"
#include "fairlat/textio.hpp"

namespace fairlat::eval {

namespace {

double sigmoid(double s) {
  return s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
}

bool is_binary01(const VectorRef& v) {
  bool saw0 = false, saw1 = false;
  for (Index i = 0; i < v.size(); ++i) {
    if (v(i) == 0.0)
      saw0 = true;
    else if (v(i) == 1.0)
      saw1 = true;
    else
      return false;
  }
  return saw0 && saw1;
}

double population_std(const VectorRef& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().mean());
}

}  // namespace

double Predictor::score(double z_p) const {
  const double s = slope * z_p + intercept;
  return kind == PredictorKind::kLogistic ? sigmoid(s) : s;
}

Vector Predictor::score(const VectorRef& z_p) const {
  Vector out(z_p.size());
  for (Index i = 0; i < z_p.size(); ++i) out(i) = score(z_p(i));
  return out;
}

Predictor fit_predictor(const VectorRef& z_p, const VectorRef& t,
                        PredictorKind kind) {
  if (z_p.size() != t.size()) throw ShapeError("fit_predictor: length mismatch");
  if (z_p.size() < 3) throw DataError("fit_predictor: need at least 3 samples");
  if (!z_p.allFinite() || !t.allFinite())
    throw NumericError("fit_predictor: non-finite input");
  if (z_p.maxCoeff() == z_p.minCoeff())
    throw NumericError("fit_predictor: constant z_p");

  Predictor p;
  p.kind = kind;
  if (kind == PredictorKind::kLinear) {
    const double zm = z_p.mean();
    const double tm = t.mean();
    const Vector zc = z_p.array() - zm;
    const Vector tc = t.array() - tm;
    p.slope = zc.dot(tc) / zc.squaredNorm();
    p.intercept = tm - p.slope * zm;
    return p;
  }

  if (!is_binary01(t))
    throw DataError("fit_predictor: logistic regression needs 0/1 targets with "
                    "both classes present");
  // Newton on the ridge-regularized negative log-likelihood; the ridge keeps
  // coefficients finite under perfect separation.
  const double ridge = 1e-6;
  double a = 0.0, b = 0.0;
  p.converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    double g_a = ridge * a, g_b = 0.0;
    double h_aa = ridge, h_ab = 0.0, h_bb = 0.0;
    for (Index i = 0; i < z_p.size(); ++i) {
      const double s = a * z_p(i) + b;
      const double mu = sigmoid(s);
      const double r = mu - t(i);
      const double w = mu * (1.0 - mu);
      g_a += r * z_p(i);
      g_b += r;
      h_aa += w * z_p(i) * z_p(i);
      h_ab += w * z_p(i);
      h_bb += w;
    }
    const double det = h_aa * h_bb - h_ab * h_ab;
    if (!(std::abs(det) > 1e-300)) break;  // flat likelihood, stop flagged
    const double da = (h_bb * g_a - h_ab * g_b) / det;
    const double db = (h_aa * g_b - h_ab * g_a) / det;
    a -= da;
    b -= db;
    if (!std::isfinite(a) || !std::isfinite(b)) {
      a += da;
      b += db;
      break;
    }
    if (std::max(std::abs(da), std::abs(db)) < 1e-8) {
      p.converged = true;
      break;
    }
  }
  p.slope = a;
  p.intercept = b;
  return p;
}

double auc(const VectorRef& scores, const VectorRef& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: length mismatch");
  if (!is_binary01(labels))
    throw DataError("auc: labels must be 0/1 with both classes present");
  const Index n = scores.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return scores(x) < scores(y); });

  // Average ranks across ties, then the Mann-Whitney identity.
  std::vector<double> rank(static_cast<std::size_t>(n));
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores(order[j + 1]) == scores(order[i])) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  long n_pos = 0;
  for (Index r = 0; r < n; ++r) {
    if (labels(r) == 1.0) {
      rank_sum_pos += rank[static_cast<std::size_t>(r)];
      ++n_pos;
    }
  }
  const long n_neg = n - n_pos;
  const double u = rank_sum_pos - static_cast<double>(n_pos) *
                                      (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double rmse(const VectorRef& pred, const VectorRef& truth) {
  if (pred.size() != truth.size()) throw ShapeError("rmse: length mismatch");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

SignedCorr signed_bias_corr(const VectorRef& t_hat, const VectorRef& s) {
  if (s.maxCoeff() == s.minCoeff())
    throw NumericError("signed_bias_corr: constant bias attribute");
  SignedCorr out;
  out.raw = losses::pearson_corr(t_hat, s);
  out.magnitude = std::abs(out.raw);
  out.sign = out.raw < 0.0 ? '-' : '+';
  return out;
}

double rec_error_l1(const MatrixRef& X, const MatrixRef& X_rec) {
  if (X.rows() != X_rec.rows() || X.cols() != X_rec.cols())
    throw ShapeError("rec_error_l1: shape mismatch");
  return (X - X_rec).array().abs().mean();
}

LatentDiversity latent_corr_matrix(const MatrixRef& Z) {
  if (Z.rows() < 2) throw ShapeError("latent_corr_matrix: need at least 2 rows");
  const Index n = Z.cols();
  LatentDiversity out;
  out.corr = Matrix::Identity(n, n);
  std::vector<bool> constant(static_cast<std::size_t>(n), false);
  for (Index j = 0; j < n; ++j) {
    if (Z.col(j).maxCoeff() == Z.col(j).minCoeff()) {
      constant[static_cast<std::size_t>(j)] = true;
      out.constant_columns.push_back(static_cast<int>(j));
    }
  }
  double sum = 0.0;
  long count = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (constant[i] || constant[j]) continue;
      const double c = losses::pearson_corr(Z.col(i), Z.col(j));
      out.corr(i, j) = c;
      out.corr(j, i) = c;
      sum += std::abs(c);
      ++count;
    }
  }
  out.mean_abs_offdiag = count > 0 ? sum / static_cast<double>(count) : 0.0;
  return out;
}

Eq1Diagnostics fit_eq1_diagnostics(const VectorRef& z_p, const VectorRef& t,
                                   const MatrixRef& S) {
  const Index d = z_p.size();
  const Index k = S.cols();
  if (t.size() != d || (k > 0 && S.rows() != d))
    throw ShapeError("fit_eq1_diagnostics: length mismatch");
  if (d <= k + 2)
    throw DataError("fit_eq1_diagnostics: need more than k + 2 samples");

  auto standardize = [](const VectorRef& v) -> Vector {
    const double sd = population_std(v);
    if (sd == 0.0)
      throw NumericError("fit_eq1_diagnostics: constant regressor or response");
    return (v.array() - v.mean()) / sd;
  };

  const Vector y = standardize(z_p);
  Matrix R(d, k + 2);
  R.col(0).setOnes();
  for (Index j = 0; j < k; ++j) R.col(1 + j) = standardize(S.col(j));
  R.col(k + 1) = standardize(t);

  Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smin > 0.0) || smax / smin > 1e10)
    throw NumericError("fit_eq1_diagnostics: collinear regressors, condition "
                       "number " +
                       format_double(smin > 0.0 ? smax / smin
                                                : std::numeric_limits<double>::infinity()));

  const Vector beta = svd.solve(y);
  const Vector residuals = y - R * beta;
  const double rss = residuals.squaredNorm();
  const double tss = y.squaredNorm();  // y is centered by standardization
  const double dof = static_cast<double>(d - (k + 2));
  const double s2 = rss / dof;

  Eq1Diagnostics diag;
  diag.beta0 = beta(0);
  diag.beta_s = beta.segment(1, k);
  diag.beta_t = beta(k + 1);
  diag.residual_std = std::sqrt(rss / static_cast<double>(d));
  diag.r_squared = tss > 0.0 ? 1.0 - rss / tss : 0.0;
  const Matrix cov = (R.transpose() * R).inverse() * s2;
  diag.std_errors.resize(k + 2);
  for (Index j = 0; j < k + 2; ++j) diag.std_errors(j) = std::sqrt(cov(j, j));
  return diag;
}

namespace {

FoldMetrics mean_of(const std::vector<FoldMetrics>& folds) {
  FoldMetrics agg;
  if (folds.empty()) return agg;
  agg.has_prediction = folds.front().has_prediction;
  agg.bias_corr.assign(folds.front().bias_corr.size(), 0.0);
  for (const FoldMetrics& f : folds) {
    agg.accuracy += f.accuracy;
    agg.rec_l1 += f.rec_l1;
    agg.diversity += f.diversity;
    for (std::size_t j = 0; j < agg.bias_corr.size(); ++j)
      agg.bias_corr[j] += f.bias_corr[j];
  }
  const double n = static_cast<double>(folds.size());
  agg.accuracy /= n;
  agg.rec_l1 /= n;
  agg.diversity /= n;
  for (double& c : agg.bias_corr) c /= n;
  return agg;
}

}  // namespace

MethodReport cross_validate(const synth::Dataset& dataset,
                            const model::Architecture& arch,
                            const train::TrainConfig& config, const CvSpec& spec) {
  if (spec.folds < 2) throw ConfigError("cross_validate: folds must be >= 2");
  const synth::Attribute& target_attr = dataset.attribute(spec.target);
  const bool binary_target = target_attr.kind == synth::AttrKind::kBinary;
  const auto folds = synth::kfold_split(dataset, spec.folds, spec.seed, spec.stratify);
  const bool prediction = config.mode != train::Mode::kAblationPlainAe;

  MethodReport report;
  report.method = train::to_string(config.mode);
  report.accuracy_metric = binary_target ? "AUC" : "R-MSE";
  report.has_prediction = prediction;
  report.folds.resize(folds.size());

  run_parallel(folds.size(), spec.jobs, [&](std::size_t f) {
    try {
      const synth::Fold& fold = folds[f];
      train::LabelledData train_data =
          synth::make_labelled(dataset, fold.train_rows, spec.target, spec.biases);
      train::TrainConfig fold_config = config;
      fold_config.seed = fnv1a64("cv-" + report.method + "-fold-" + std::to_string(f)) ^
                         spec.seed;

      train::TrainResult trained;
      if (config.mode == train::Mode::kSemiSupervised) {
        const Matrix X_u = synth::rows_of(dataset.X, fold.unlabelled_rows);
        trained = train::train_semisupervised(X_u, train_data, std::nullopt, arch,
                                              fold_config);
      } else {
        trained = train::train_supervised(train_data, std::nullopt, arch, fold_config);
      }

      const train::LabelledData test_data =
          synth::make_labelled(dataset, fold.test_rows, spec.target, spec.biases);
      const Matrix Z_test = model::encode(arch, trained.params, test_data.X);
      const Matrix X_rec = model::decode(arch, trained.params, Z_test);

      FoldMetrics& metrics = report.folds[f];
      metrics.rec_l1 = rec_error_l1(test_data.X, X_rec);
      metrics.diversity = latent_corr_matrix(Z_test).mean_abs_offdiag;
      metrics.bias_corr.assign(spec.biases.size(), 0.0);
      metrics.has_prediction = prediction;
      if (prediction) {
        const Matrix Z_train = model::encode(arch, trained.params, train_data.X);
        const Vector zp_train = model::project(Z_train, trained.params.projection);
        const Predictor predictor = fit_predictor(
            zp_train, train_data.t,
            binary_target ? PredictorKind::kLogistic : PredictorKind::kLinear);
        const Vector zp_test = model::project(Z_test, trained.params.projection);
        const Vector scores = predictor.score(zp_test);
        metrics.accuracy = binary_target ? auc(scores, test_data.t)
                                         : rmse(scores, test_data.t);
        for (std::size_t j = 0; j < spec.biases.size(); ++j)
          metrics.bias_corr[j] = signed_bias_corr(scores, test_data.S.col(j)).raw;
      }
    } catch (const std::exception& e) {
      throw NumericError("fold " + std::to_string(f) + ": " + e.what());
    }
  });

  report.aggregate = mean_of(report.folds);
  return report;
}

EvalReport evaluate_methods(const synth::Dataset& dataset,
                            const model::Architecture& arch,
                            const train::TrainConfig& base_config,
                            const std::vector<train::Mode>& methods,
                            const CvSpec& spec) {
  EvalReport report;
  report.target = spec.target;
  report.bias_names = spec.biases;
  report.folds = spec.folds;
  const synth::Attribute& t = dataset.attribute(spec.target);
  for (const std::string& b : spec.biases)
    report.truth_corr.push_back(
        losses::pearson_corr(t.values, dataset.attribute(b).values));
  for (train::Mode mode : methods) {
    train::TrainConfig config = base_config;
    config.mode = mode;
    report.methods.push_back(cross_validate(dataset, arch, config, spec));
  }
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "method,fold,accuracy_metric,accuracy";
  for (const std::string& b : bias_names) out << ",corr_" << b;
  out << ",rec_error_l1,diversity\n";
  for (const MethodReport& m : methods) {
    auto emit = [&](const std::string& fold_id, const FoldMetrics& f) {
      out << m.method << ',' << fold_id << ',' << m.accuracy_metric << ',';
      if (f.has_prediction) out << format_double(f.accuracy);
      for (double c : f.bias_corr) {
        out << ',';
        if (f.has_prediction) out << format_double(c);
      }
      out << ',' << format_double(f.rec_l1) << ',' << format_double(f.diversity)
          << '\n';
    };
    for (std::size_t f = 0; f < m.folds.size(); ++f)
      emit(std::to_string(f), m.folds[f]);
    emit("mean", m.aggregate);
  }
  return out.str();
}

namespace {

std::string fixed3(double v, bool with_sign = false) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), with_sign ? "%+.3f" : "%.3f", v);
  return buf;
}

}  // namespace

std::string EvalReport::to_table() const {
  // Rows are metrics, columns are methods, mirroring the fair-prediction
  // tables: an X column with the ground-truth correlations, then one column
  // per method with aggregate values; '-' where a method has no prediction.
  std::vector<std::string> row_names;
  row_names.push_back(methods.empty() ? "accuracy" : methods.front().accuracy_metric);
  for (const std::string& b : bias_names) row_names.push_back("Corr (" + b + ")");
  row_names.push_back("Rec error");
  row_names.push_back("Diversity");

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"metric", "X"};
  for (const MethodReport& m : methods) header.push_back(m.method);
  cells.push_back(header);
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    std::vector<std::string> row{row_names[r]};
    if (r >= 1 && r <= bias_names.size())
      row.push_back(fixed3(truth_corr[r - 1], true));
    else
      row.push_back("-");
    for (const MethodReport& m : methods) {
      const FoldMetrics& a = m.aggregate;
      if (r == 0)
        row.push_back(a.has_prediction ? fixed3(a.accuracy) : "-");
      else if (r <= bias_names.size())
        row.push_back(a.has_prediction ? fixed3(a.bias_corr[r - 1], true) : "-");
      else if (r == bias_names.size() + 1)
        row.push_back(fixed3(a.rec_l1));
      else
        row.push_back(fixed3(a.diversity));
    }
    cells.push_back(row);
  }

  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c)
      widths[c] = std::max(widths[c], row[c].size());
  std::ostringstream out;
  out << "target: " << target << " (" << folds << "-fold cross-validation)\n";
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c] << std::string(widths[c] - row[c].size() + 2, ' ');
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace fairlat::eval
