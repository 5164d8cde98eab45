#pragma once

namespace cavwatch {

/// Car-following parameters of the Intelligent Driver Model.
///
/// Defaults are the case-study platoon: 10 m/s desired speed, 2 m jam gap,
/// 0.73 m/s^2 acceleration, 1.67 m/s^2 comfortable braking, exponent 4 and
/// 5 m vehicles. The desired time gap is not part of that parameter table;
/// 1.0 s is the common highway value.
struct IdmParams {
  double v0 = 10.0;        ///< desired velocity (m/s)
  double s0 = 2.0;         ///< minimum bumper gap (m)
  double a = 0.73;         ///< maximum acceleration (m/s^2)
  double b = 1.67;         ///< comfortable deceleration (m/s^2)
  double time_gap = 1.0;   ///< desired time headway (s)
  double delta = 4.0;      ///< acceleration exponent
  double length = 5.0;     ///< vehicle length (m)

  void validate() const;
};

/// What a follower knows about one leader when it picks its acceleration.
struct KinematicContext {
  double v = 0.0;   ///< own velocity (m/s)
  double dv = 0.0;  ///< own velocity minus leader velocity (m/s)
  double s = 0.0;   ///< bumper-to-bumper gap (m)
};

/// s* = s0 + T v + v dv / (2 sqrt(a b)). Not clamped; may be negative when closing fast from behind.
double desired_spacing(double v, double dv, const IdmParams &p);

/// a (1 - (v/v0)^delta) -- the leader-free term.
double free_road_acceleration(double v, const IdmParams &p);

/// Full IDM acceleration against one leader. s* is clamped at zero before squaring.
/// Throws NonPositiveSpacing if ctx.s <= 0.
double idm_acceleration(const KinematicContext &ctx, const IdmParams &p);

}  // namespace cavwatch
