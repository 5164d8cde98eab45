#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

namespace cavwatch {

/// Perceived gap = factor * true gap.
struct GapScale {
  double factor = 10.0;
};
/// Perceived gap = true gap + u, u ~ U[low, high), redrawn every step.
struct GapNoise {
  double low = -2.0;
  double high = 2.0;
};
/// Perceived gap = true gap * max(floor, exp(-lambda (t - onset))).
struct GapExpDecay {
  double lambda = 0.05;
  double floor = 0.1;
};
/// Leader position reported with a fixed offset.
struct PositionShift {
  double offset = 0.0;
};
/// Leader position reported delay_steps late.
struct TimeShift {
  std::size_t delay_steps = 1;
};

using AttackKind = std::variant<GapScale, GapNoise, GapExpDecay, PositionShift, TimeShift>;

std::string kind_name(const AttackKind &kind);

struct AttackSpec {
  std::size_t victim = 1;               ///< 0-based; 0 is the lead vehicle
  double onset = 20.0;                  ///< s
  std::optional<double> duration;       ///< s; nullopt = until the end of the run
  AttackKind kind = GapScale{};
  std::uint64_t seed = 0;

  void validate() const;
  /// True iff t lies in [onset, onset + duration).
  bool active_at(double t) const;
};

nlohmann::json to_json(const AttackSpec &spec);
/// Strict: unknown keys and unknown kinds raise ValidationError.
AttackSpec attack_from_json(const nlohmann::json &j);

}  // namespace cavwatch
