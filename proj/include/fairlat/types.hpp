#pragma once

#include <Eigen/Dense>

namespace fairlat {

// All numerics run in 64-bit floats; correlation terms on small batches are
// precision-sensitive.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

using MatrixRef = Eigen::Ref<const Matrix>;
using VectorRef = Eigen::Ref<const Vector>;

}  // namespace fairlat
