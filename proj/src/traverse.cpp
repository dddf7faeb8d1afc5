#include "fairlat/traverse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fairlat/errors.hpp"
#include "fairlat/textio.hpp"

namespace fairlat::traverse {

ScheduleMode schedule_from_string(const std::string& s) {
  if (s == "sigma_range") return ScheduleMode::kSigmaRange;
  if (s == "target_range") return ScheduleMode::kTargetRange;
  throw ConfigError("unknown traversal schedule: " + s);
}

std::string to_string(ScheduleMode m) {
  return m == ScheduleMode::kSigmaRange ? "sigma_range" : "target_range";
}

Vector mean_latent(const MatrixRef& Z_test) {
  if (Z_test.rows() < 1) throw DataError("mean_latent: empty test set");
  return Z_test.colwise().mean();
}

namespace {

std::vector<double> even_steps(double lo, double hi, int frames) {
  std::vector<double> k(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i)
    k[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(frames - 1);
  return k;
}

}  // namespace

std::vector<double> k_schedule_sigma(const VectorRef& z_p_test, int frames,
                                     double p_norm) {
  if (frames < 2) throw ConfigError("k_schedule: need at least 2 frames");
  if (!(p_norm > 0.0)) throw NumericError("k_schedule: degenerate ||P||");
  const double m = z_p_test.mean();
  const double sd = std::sqrt((z_p_test.array() - m).square().mean());
  if (sd == 0.0)
    throw NumericError("k_schedule: zero standard deviation of projected values");
  const double half_span = 3.0 * sd / p_norm;
  return even_steps(-half_span, half_span, frames);
}

std::vector<double> k_schedule_target(const eval::Predictor& predictor,
                                      double z_p_reference, double p_norm,
                                      int frames, double lo, double hi) {
  if (frames < 2) throw ConfigError("k_schedule: need at least 2 frames");
  if (!(p_norm > 0.0)) throw NumericError("k_schedule: degenerate ||P||");
  if (!(hi > lo)) throw ConfigError("k_schedule: target range must have hi > lo");
  if (predictor.slope == 0.0)
    throw NumericError("k_schedule: predictor slope is zero, range unreachable");

  // Invert t_hat(k) = predictor(z_p_reference + k ||P||) at both endpoints.
  auto invert = [&](double t) {
    double s;
    if (predictor.kind == eval::PredictorKind::kLogistic) {
      if (!(t > 0.0 && t < 1.0))
        throw ConfigError("k_schedule: logistic target bounds must lie in (0, 1)");
      s = std::log(t / (1.0 - t));
    } else {
      s = t;
    }
    const double z = (s - predictor.intercept) / predictor.slope;
    return (z - z_p_reference) / p_norm;
  };
  double k_lo = invert(lo);
  double k_hi = invert(hi);
  if (k_lo > k_hi) std::swap(k_lo, k_hi);
  return even_steps(k_lo, k_hi, frames);
}

TraversalResult run_traversal(const model::Architecture& arch,
                              const model::ModelParams& params,
                              const eval::Predictor& predictor,
                              const VectorRef& d_bar,
                              const std::vector<double>& schedule) {
  if (schedule.size() < 2) throw ConfigError("run_traversal: need at least 2 frames");
  if (d_bar.size() != params.projection.size())
    throw ShapeError("run_traversal: reference point has wrong latent width");
  const double p_norm = params.projection.norm();
  if (p_norm < 1e-8)
    throw NumericError("run_traversal: degenerate projection direction");

  const Index h = static_cast<Index>(schedule.size());
  Matrix latents(h, d_bar.size());
  for (Index i = 0; i < h; ++i)
    latents.row(i) =
        (d_bar + schedule[static_cast<std::size_t>(i)] * params.projection)
            .transpose();

  TraversalResult result;
  result.k_values = schedule;
  result.frames = model::decode(arch, params, latents);
  result.z_p = model::project(latents, params.projection);
  result.t_hat.resize(h);
  for (Index i = 0; i < h; ++i) result.t_hat(i) = predictor.score(result.z_p(i));
  result.difference_map = result.frames.row(h - 1) - result.frames.row(0);
  return result;
}

void export_traversal(const TraversalResult& result, const std::string& prefix) {
  const Index h = result.frames.rows();
  const Index m = result.frames.cols();

  std::ostringstream frames;
  frames << "k,t_hat";
  for (Index j = 0; j < m; ++j) frames << ",x" << j;
  frames << '\n';
  for (Index i = 0; i < h; ++i) {
    frames << format_double(result.k_values[static_cast<std::size_t>(i)]) << ','
           << format_double(result.t_hat(i));
    for (Index j = 0; j < m; ++j) frames << ',' << format_double(result.frames(i, j));
    frames << '\n';
  }
  write_text_file(prefix + "frames.csv", frames.str());

  // Rank features by absolute difference, ties broken by feature index.
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(result.difference_map(a)) > std::abs(result.difference_map(b));
  });
  std::vector<int> rank(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < order.size(); ++i)
    rank[static_cast<std::size_t>(order[i])] = static_cast<int>(i) + 1;

  std::ostringstream diff;
  diff << "feature,signed_difference,abs_rank\n";
  for (Index j = 0; j < m; ++j)
    diff << 'x' << j << ',' << format_double(result.difference_map(j)) << ','
         << rank[static_cast<std::size_t>(j)] << '\n';
  write_text_file(prefix + "difference_map.csv", diff.str());
}

}  // namespace fairlat::traverse
