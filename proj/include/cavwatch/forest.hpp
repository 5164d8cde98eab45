#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "cavwatch/matrix.hpp"
#include "cavwatch/regression_tree.hpp"

namespace cavwatch {

/// Multi-output random forest regressor.
///
/// Tree i draws everything (bootstrap sample, feature subsets) from an engine
/// seeded with tree_seed(config.seed, i), so the fitted forest does not depend
/// on how trees are scheduled across threads. fit/predict are the OpenMP
/// kernels; fit_serial/predict_serial are the single-threaded references they
/// are tested against.
class RandomForest {
public:
  RandomForest() = default;
  explicit RandomForest(ForestConfig config) : config_(config) { config_.validate(); }

  void fit(const Matrix &X, const Matrix &Y);
  void fit_serial(const Matrix &X, const Matrix &Y);

  /// Mean of the tree outputs. Throws NotFitted.
  Matrix predict(const Matrix &X) const;
  Matrix predict_serial(const Matrix &X) const;

  bool fitted() const { return !trees_.empty(); }
  const ForestConfig &config() const { return config_; }
  const std::vector<RegressionTree> &trees() const { return trees_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_outputs() const { return n_outputs_; }

  static std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t tree);
  /// Builds a forest from already-fitted trees (used by tests and loaders).
  static RandomForest from_trees(ForestConfig config, std::vector<RegressionTree> trees,
                                 std::size_t n_features);

  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json &j);
  void save(const std::filesystem::path &path) const;
  static RandomForest load(const std::filesystem::path &path);

  friend bool operator==(const RandomForest &a, const RandomForest &b) {
    return a.n_features_ == b.n_features_ && a.n_outputs_ == b.n_outputs_ && a.trees_ == b.trees_;
  }

private:
  RegressionTree fit_tree(const Matrix &X, const Matrix &Y, std::size_t index) const;
  void check_training_shapes(const Matrix &X, const Matrix &Y) const;
  void check_predict_input(const Matrix &X) const;
  void predict_row(const Matrix &X, Eigen::Index r, Matrix &out) const;

  ForestConfig config_;
  std::vector<RegressionTree> trees_;
  std::size_t n_features_ = 0;
  std::size_t n_outputs_ = 0;
};

inline constexpr const char *kForestFormat = "cavwatch.forest.v1";

}  // namespace cavwatch
