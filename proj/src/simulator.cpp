#include "cavwatch/simulator.hpp"

#include <algorithm>
#include <limits>

#include "cavwatch/attack.hpp"
#include "cavwatch/errors.hpp"

namespace cavwatch {

void SimConfig::validate() const {
  params.validate();
  if (n_vehicles < 1) throw ValidationError("sim: n_vehicles must be >= 1");
  if (!(dt > 0)) throw ValidationError("sim: dt must be > 0");
  if (total_steps < 1) throw ValidationError("sim: total_steps must be >= 1");
  if (leaders_considered < 1) throw ValidationError("sim: leaders_considered must be >= 1");
  if (!(initial_gap >= params.s0)) throw ValidationError("sim: initial_gap must be >= s0");
  if (!(road_length > 0)) throw ValidationError("sim: road_length must be > 0");
}

std::vector<VehicleState> initial_formation(const SimConfig &config) {
  // Rearmost vehicle at x = 0; lower index = further ahead.
  const double pitch = config.initial_gap + config.params.length;
  std::vector<VehicleState> states(config.n_vehicles);
  for (std::size_t i = 0; i < config.n_vehicles; ++i)
    states[i].position = static_cast<double>(config.n_vehicles - 1 - i) * pitch;
  return states;
}

double follower_acceleration(std::span<const VehicleState> states, std::size_t idx, std::size_t m,
                             const IdmParams &params, const PerceptionHook &perceive,
                             const StepClock &clock) {
  const VehicleState &self = states[idx];
  if (idx == 0) return free_road_acceleration(self.velocity, params);

  double best = std::numeric_limits<double>::infinity();
  const std::size_t available = std::min(m, idx);
  for (std::size_t k = 1; k <= available; ++k) {
    const VehicleState &leader = states[idx - k];
    LeaderObservation obs{idx, idx - k, k,
                          leader.position - self.position - static_cast<double>(k) * params.length,
                          self.velocity - leader.velocity};
    Perceived seen{obs.gap, obs.dv};
    if (perceive) seen = perceive(obs, clock);
    best = std::min(best, idm_acceleration({self.velocity, seen.dv, seen.gap}, params));
  }
  return best;
}

std::vector<double> accelerations(std::span<const VehicleState> states, const SimConfig &config,
                                  const PerceptionHook &perceive, const StepClock &clock) {
  std::vector<double> acc(states.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    acc[i] = follower_acceleration(states, i, config.leaders_considered, config.params, perceive,
                                   clock);
  return acc;
}

namespace {

std::vector<VehicleState> advance(std::span<const VehicleState> states,
                                  const std::vector<double> &acc, const SimConfig &config,
                                  std::size_t next_step) {
  std::vector<VehicleState> next(states.begin(), states.end());
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i].acceleration = acc[i];
    next[i].velocity = std::max(0.0, states[i].velocity + acc[i] * config.dt);
    next[i].position = states[i].position + next[i].velocity * config.dt;
  }
  for (std::size_t i = 1; i < next.size(); ++i) {
    const double gap = next[i - 1].position - next[i].position - config.params.length;
    if (!(gap > 0)) throw CollisionDetected(next_step, i, gap);
  }
  return next;
}

}  // namespace

std::vector<VehicleState> step(std::span<const VehicleState> states, const StepClock &clock,
                               const SimConfig &config, const PerceptionHook &perceive) {
  return advance(states, accelerations(states, config, perceive, clock), config, clock.step + 1);
}

SimResult run_simulation(const SimConfig &config, const PerceptionHook &perceive) {
  config.validate();
  const std::size_t n = config.n_vehicles;
  const std::size_t total = config.total_steps;

  std::vector<double> pos_rows;
  std::vector<double> vel_rows;
  std::vector<double> acc_rows;
  pos_rows.reserve(total * n);
  vel_rows.reserve(total * n);
  acc_rows.reserve(total * n);

  std::optional<SimFailure> failure;
  std::vector<VehicleState> states = initial_formation(config);
  for (std::size_t t = 0; t < total; ++t) {
    for (const auto &s : states) {
      pos_rows.push_back(s.position);
      vel_rows.push_back(s.velocity);
    }
    const StepClock clock{t, static_cast<double>(t) * config.dt, PositionHistory(pos_rows, n)};
    std::vector<double> acc;
    try {
      acc = accelerations(states, config, perceive, clock);
    } catch (const NonPositiveSpacing &e) {
      // Keep the row aligned: acceleration is undefined, record NaN and stop.
      acc_rows.insert(acc_rows.end(), n, std::numeric_limits<double>::quiet_NaN());
      failure = SimFailure{SimFailure::Kind::NonPositivePerceivedGap, t, 0, e.spacing(), e.what()};
      break;
    }
    acc_rows.insert(acc_rows.end(), acc.begin(), acc.end());
    if (t + 1 == total) break;
    try {
      states = advance(states, acc, config, t + 1);
    } catch (const CollisionDetected &e) {
      failure = SimFailure{SimFailure::Kind::Collision, e.step(), e.follower(), e.gap(), e.what()};
      break;
    }
  }

  const auto rows = static_cast<Eigen::Index>(pos_rows.size() / n);
  const auto cols = static_cast<Eigen::Index>(n);
  SimResult result;
  result.trajectory.dt = config.dt;
  result.trajectory.positions = Eigen::Map<const Matrix>(pos_rows.data(), rows, cols);
  result.trajectory.velocities = Eigen::Map<const Matrix>(vel_rows.data(), rows, cols);
  result.trajectory.accelerations = Eigen::Map<const Matrix>(acc_rows.data(), rows, cols);
  result.failure = std::move(failure);
  return result;
}

SimResult run_simulation(const SimConfig &config, const std::optional<AttackSpec> &attack) {
  PerceptionHook hook;
  if (attack) {
    attack->validate();
    if (attack->victim >= config.n_vehicles)
      throw ValidationError("attack: victim index out of range");
    hook = make_perception(*attack, config.dt);
  }
  SimResult result = run_simulation(config, hook);
  result.trajectory.attack_label = attack;
  return result;
}

Trajectory simulate(const SimConfig &config, const std::optional<AttackSpec> &attack) {
  SimResult result = run_simulation(config, attack);
  if (result.failure) {
    const auto &f = *result.failure;
    if (f.kind == SimFailure::Kind::Collision) throw CollisionDetected(f.step, f.vehicle, f.value);
    throw NonPositiveSpacing(f.value);
  }
  return std::move(result.trajectory);
}

}  // namespace cavwatch
