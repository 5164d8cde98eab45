#pragma once

#include <cstdint>

#include "cavwatch/attack_spec.hpp"
#include "cavwatch/rng.hpp"
#include "cavwatch/simulator.hpp"

namespace cavwatch {

/// Seeded uniform stream for GapNoise. The sequence is a pure function of the seed.
class NoiseStream {
public:
  explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}
  Engine &engine() { return engine_; }

private:
  Engine engine_;
};

/// One draw from U[low, high). Requires low < high.
double noise_sample(NoiseStream &stream, double low, double high);

/// Everything perceive_gap needs about the moment being perceived.
struct GapQuery {
  double time = 0.0;
  std::size_t step = 0;
  std::size_t follower = 0;
  std::size_t leader = 0;
  double true_gap = 0.0;
  PositionHistory history;  ///< must cover the delayed row for TimeShift
};

/// The gap the follower believes in. Identity outside the attack window and for non-victims.
/// Throws HistoryUnavailable if a TimeShift needs a row the history does not hold.
double perceive_gap(const AttackSpec &spec, double dt, const GapQuery &q, NoiseStream &noise);

/// Perception hook that routes the victim's gaps through perceive_gap. Owns its noise stream.
PerceptionHook make_perception(const AttackSpec &spec, double dt);

}  // namespace cavwatch
