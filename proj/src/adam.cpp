#include "cavwatch/adam.hpp"

#include <cmath>

#include "cavwatch/errors.hpp"

namespace cavwatch {

void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments &moments,
               const AdamHyper &hyper, std::size_t step) {
  if (step < 1) throw ValidationError("adam: step is 1-based");
  const auto size = static_cast<Eigen::Index>(param.size());
  if (grad.size() != param.size() || moments.first.size() != size || moments.second.size() != size)
    throw DimensionMismatch("adam: parameter, gradient and moment sizes differ");

  const double t = static_cast<double>(step);
  const double correct1 = 1.0 - std::pow(hyper.beta1, t);
  const double correct2 = 1.0 - std::pow(hyper.beta2, t);
  double *m = moments.first.data();
  double *v = moments.second.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m[i] / correct1;
    const double v_hat = v[i] / correct2;
    param[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

}  // namespace cavwatch
