#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavwatch/attack_spec.hpp"
#include "cavwatch/dataset.hpp"
#include "cavwatch/forecaster.hpp"
#include "cavwatch/simulator.hpp"

namespace cavwatch {

nlohmann::json to_json(const IdmParams &p);
IdmParams idm_from_json(const nlohmann::json &j);
nlohmann::json to_json(const SimConfig &c);
SimConfig sim_from_json(const nlohmann::json &j);

/// One attacked scenario. Artifacts are written under `name`.
struct NamedAttack {
  std::string name;
  AttackSpec spec;
};

/// Everything a run depends on. Loaded from one JSON document; unknown keys are rejected.
///
/// Sub-seeds: every stochastic stage gets derive_seed(seed ^ local, stage) where
/// `local` is the seed written in that stage's own config (0 by default), so the
/// master seed alone changes every stream while local seeds still distinguish runs.
struct RunConfig {
  SimConfig sim;
  std::size_t t1 = 15;
  std::size_t t2 = 5;
  std::vector<NamedAttack> attacks;
  ModelConfig model;
  double split_fraction = 0.8;
  double percentile = 95.0;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;

  void validate() const;

  WindowSpec window() const { return {t1, t2, sim.n_vehicles}; }
  SimConfig effective_sim() const;
  ModelConfig effective_model() const;
  AttackSpec effective_attack(std::size_t i) const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json &j);
  static RunConfig load(const std::filesystem::path &path);

  /// The three case-study attacks on the default platoon with the forest predictor.
  static RunConfig case_study();
};

}  // namespace cavwatch
