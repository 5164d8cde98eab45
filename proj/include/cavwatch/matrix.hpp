#pragma once

#include <Eigen/Dense>

namespace cavwatch {

/// Row-major so that one window (or one time step) is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace cavwatch
