#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "cavwatch/matrix.hpp"
#include "cavwatch/rng.hpp"

namespace cavwatch {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 16;
  std::size_t min_samples_leaf = 2;
  double feature_subsample = 1.0 / 3.0;  ///< fraction of features tried at each node
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
  /// max(1, floor(F * feature_subsample))
  std::size_t features_per_split(std::size_t n_features) const;

  nlohmann::json to_json() const;
  static ForestConfig from_json(const nlohmann::json &j);
};

/// CART regression tree with vector-valued leaves.
///
/// Splits maximise the summed squared-error reduction over all outputs,
/// using `x <= threshold` to go left, with midpoint thresholds between
/// consecutive distinct feature values.
class RegressionTree {
public:
  struct Node {
    std::int32_t feature = -1;  ///< -1 for leaves
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t leaf = -1;     ///< row in the leaf value table
  };

  /// Fits on the given training rows (duplicates allowed, e.g. a bootstrap sample).
  static RegressionTree fit(const Matrix &X, const Matrix &Y, std::span<const std::size_t> rows,
                            const ForestConfig &config, Engine &rng);
  static RegressionTree fit(const Matrix &X, const Matrix &Y, const ForestConfig &config, Engine &rng);

  /// Leaf value vector reached by one feature row.
  std::span<const double> leaf_values(const double *x) const;
  Matrix predict(const Matrix &X) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaf_rows_.size(); }
  std::size_t outputs() const { return outputs_; }
  std::size_t depth() const;
  /// Training rows that reached each leaf.
  const std::vector<std::size_t> &leaf_rows() const { return leaf_rows_; }
  const std::vector<Node> &nodes() const { return nodes_; }

  nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json &j, std::size_t outputs);

  friend bool operator==(const RegressionTree &, const RegressionTree &);

private:
  class Builder;

  std::vector<Node> nodes_;
  std::vector<double> values_;  ///< leaf_count x outputs, row-major
  std::vector<std::size_t> leaf_rows_;
  std::size_t outputs_ = 0;
};

bool operator==(const RegressionTree::Node &a, const RegressionTree::Node &b);

}  // namespace cavwatch
