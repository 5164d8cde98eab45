#pragma once

#include <cstddef>
#include <span>

#include "cavwatch/matrix.hpp"

namespace cavwatch {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  Vector first;
  Vector second;

  explicit AdamMoments(Eigen::Index size = 0)
      : first(Vector::Zero(size)), second(Vector::Zero(size)) {}
};

/// One bias-corrected Adam update in place. `step` is 1-based.
void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments &moments,
               const AdamHyper &hyper, std::size_t step);

}  // namespace cavwatch
