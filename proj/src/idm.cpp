#include "cavwatch/idm.hpp"

#include <algorithm>
#include <cmath>

#include "cavwatch/errors.hpp"

namespace cavwatch {

void IdmParams::validate() const {
  if (!(v0 > 0)) throw ValidationError("idm: v0 must be > 0");
  if (!(s0 > 0)) throw ValidationError("idm: s0 must be > 0");
  if (!(a > 0)) throw ValidationError("idm: a must be > 0");
  if (!(b > 0)) throw ValidationError("idm: b must be > 0");
  if (!(time_gap >= 0)) throw ValidationError("idm: T_gap must be >= 0");
  if (!(delta > 0)) throw ValidationError("idm: delta must be > 0");
  if (!(length > 0)) throw ValidationError("idm: length must be > 0");
}

double desired_spacing(double v, double dv, const IdmParams &p) {
  return p.s0 + p.time_gap * v + v * dv / (2.0 * std::sqrt(p.a * p.b));
}

double free_road_acceleration(double v, const IdmParams &p) {
  return p.a * (1.0 - std::pow(v / p.v0, p.delta));
}

double idm_acceleration(const KinematicContext &ctx, const IdmParams &p) {
  if (!(ctx.s > 0)) throw NonPositiveSpacing(ctx.s);
  const double s_star = std::max(0.0, desired_spacing(ctx.v, ctx.dv, p));
  const double ratio = s_star / ctx.s;
  return p.a * (1.0 - std::pow(ctx.v / p.v0, p.delta) - ratio * ratio);
}

}  // namespace cavwatch
