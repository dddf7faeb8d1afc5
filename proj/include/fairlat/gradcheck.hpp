#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fairlat::gradcheck {

struct OpResult {
  std::string op;
  int points = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct Summary {
  std::vector<OpResult> ops;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  std::string worst_op;
  bool pass = false;

  std::string to_table() const;
};

/// Central-difference verification of every differentiable op plus the full
/// joint loss on small random configurations. Inputs that would sit on the
/// |x| subgradient kink (abs arguments, correlation magnitudes) are resampled
/// away from it, matching the stated exclusion zone. `corrupt_op` is a test
/// fixture: the named op's analytic gradient is deliberately perturbed so the
/// suite must fail naming it.
Summary run_suite(std::uint64_t seed, int points_per_op, double tolerance = 1e-4,
                  double eps = 1e-5, const std::string& corrupt_op = "");

}  // namespace fairlat::gradcheck
