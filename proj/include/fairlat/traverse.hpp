#pragma once

#include <string>
#include <vector>

#include "fairlat/eval.hpp"
#include "fairlat/model.hpp"
#include "fairlat/types.hpp"

namespace fairlat::traverse {

enum class ScheduleMode : std::uint8_t { kSigmaRange, kTargetRange };
ScheduleMode schedule_from_string(const std::string& s);
std::string to_string(ScheduleMode m);

/// Columnwise mean of the test-set latent representations; the reference
/// point for sampling along P.
Vector mean_latent(const MatrixRef& Z_test);

/// Step values k_1 < ... < k_h for frames decoded at d_bar + k_i * P.
/// sigma_range spans +-3 std(z_p_test) / ||P||; target_range calibrates the
/// endpoints so the predicted targets span [lo, hi], using the linearity
/// z_p(d_bar + kP) = z_p(d_bar) + k ||P||.
std::vector<double> k_schedule_sigma(const VectorRef& z_p_test, int frames,
                                     double p_norm);
std::vector<double> k_schedule_target(const eval::Predictor& predictor,
                                      double z_p_reference, double p_norm,
                                      int frames, double lo, double hi);

struct TraversalResult {
  std::vector<double> k_values;
  Matrix frames;           // h x m, decoded reconstructions
  Vector t_hat;            // h, predicted target per frame
  Vector z_p;              // h, projected value per frame
  Vector difference_map;   // m, last frame minus first frame
};

/// Decodes frames at d_bar + k_i P, predicts t_hat from the projected value,
/// and reports the per-feature signed difference between the last and first
/// frame.
TraversalResult run_traversal(const model::Architecture& arch,
                              const model::ModelParams& params,
                              const eval::Predictor& predictor,
                              const VectorRef& d_bar,
                              const std::vector<double>& schedule);

/// Writes <prefix>frames.csv (k, t_hat, features per row) and
/// <prefix>difference_map.csv (feature, signed difference, rank by absolute
/// magnitude). Re-export is byte-identical.
void export_traversal(const TraversalResult& result, const std::string& prefix);

}  // namespace fairlat::traverse
