#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cavwatch/attack_spec.hpp"
#include "cavwatch/idm.hpp"
#include "cavwatch/matrix.hpp"

namespace cavwatch {

struct VehicleState {
  double position = 0.0;      ///< distance from road start (m)
  double velocity = 0.0;      ///< m/s
  double acceleration = 0.0;  ///< m/s^2
};

struct SimConfig {
  std::size_t n_vehicles = 10;
  double road_length = 30000.0;  ///< informational; the road is not wrapped or truncated
  double dt = 1.0;
  std::size_t total_steps = 3000;   ///< recorded rows, including the initial formation
  std::size_t leaders_considered = 1;
  IdmParams params;
  double initial_gap = 9.0;         ///< bumper gap of the standing start formation (m)
  std::uint64_t seed = 0;

  void validate() const;
};

/// Read-only view of the positions recorded so far (row = step, column = vehicle).
class PositionHistory {
public:
  PositionHistory() = default;
  PositionHistory(std::span<const double> rows, std::size_t n_vehicles)
      : data_(rows), n_(n_vehicles) {}

  std::size_t steps() const { return n_ == 0 ? 0 : data_.size() / n_; }
  std::size_t vehicles() const { return n_; }
  double at(std::size_t step, std::size_t vehicle) const { return data_[step * n_ + vehicle]; }

private:
  std::span<const double> data_;
  std::size_t n_ = 0;
};

/// Where the simulation is when a follower consults its perception.
struct StepClock {
  std::size_t step = 0;
  double time = 0.0;
  PositionHistory history;  ///< rows [0, step]
};

/// The true relation between a follower and its rank-th leader.
struct LeaderObservation {
  std::size_t follower = 0;
  std::size_t leader = 0;
  std::size_t rank = 1;  ///< 1 = immediate leader
  double gap = 0.0;      ///< x_leader - x_follower - rank * length
  double dv = 0.0;       ///< v_follower - v_leader
};

struct Perceived {
  double gap = 0.0;
  double dv = 0.0;
};

/// Seam through which attacks falsify what a follower sees. An empty hook means truthful perception.
using PerceptionHook = std::function<Perceived(const LeaderObservation &, const StepClock &)>;

std::vector<VehicleState> initial_formation(const SimConfig &config);

/// Minimum over the min(m, idx) nearest leaders of the IDM acceleration; free-road law for idx == 0.
double follower_acceleration(std::span<const VehicleState> states, std::size_t idx, std::size_t m,
                             const IdmParams &params, const PerceptionHook &perceive,
                             const StepClock &clock);

/// Accelerations of every vehicle from the frozen states (synchronous update).
std::vector<double> accelerations(std::span<const VehicleState> states, const SimConfig &config,
                                  const PerceptionHook &perceive, const StepClock &clock);

/// One semi-implicit Euler step: v' = max(0, v + a dt), x' = x + v' dt.
/// The returned states carry the acceleration that was applied.
/// Throws CollisionDetected (tagged with clock.step + 1) if a bumper gap becomes <= 0.
std::vector<VehicleState> step(std::span<const VehicleState> states, const StepClock &clock,
                               const SimConfig &config, const PerceptionHook &perceive);

/// Time-major record. Row t holds the state at time t*dt and the acceleration evaluated from it.
struct Trajectory {
  double dt = 1.0;
  Matrix positions;
  Matrix velocities;
  Matrix accelerations;
  std::optional<AttackSpec> attack_label;

  std::size_t steps() const { return static_cast<std::size_t>(positions.rows()); }
  std::size_t vehicles() const { return static_cast<std::size_t>(positions.cols()); }
};

struct SimFailure {
  enum class Kind { Collision, NonPositivePerceivedGap };
  Kind kind = Kind::Collision;
  std::size_t step = 0;
  std::size_t vehicle = 0;
  double value = 0.0;  ///< offending (true or perceived) gap
  std::string message;
};

/// Non-throwing run: on collision (or a non-positive perceived gap) the rows recorded so far are
/// returned together with the failure.
struct SimResult {
  Trajectory trajectory;
  std::optional<SimFailure> failure;
};

SimResult run_simulation(const SimConfig &config, const PerceptionHook &perceive);
SimResult run_simulation(const SimConfig &config, const std::optional<AttackSpec> &attack);

/// Throwing variant; CollisionDetected aborts with the step index.
Trajectory simulate(const SimConfig &config, const std::optional<AttackSpec> &attack = std::nullopt);

}  // namespace cavwatch
