#include "cavwatch/forest.hpp"

#include <numeric>

#include "cavwatch/csv.hpp"
#include "cavwatch/errors.hpp"
#include "cavwatch/rng.hpp"

namespace cavwatch {

std::uint64_t RandomForest::tree_seed(std::uint64_t forest_seed, std::size_t tree) {
  return splitmix64(forest_seed ^ splitmix64(static_cast<std::uint64_t>(tree) + 1));
}

void RandomForest::check_training_shapes(const Matrix &X, const Matrix &Y) const {
  if (X.rows() != Y.rows()) throw DimensionMismatch("forest: X and Y row counts differ");
  if (static_cast<std::size_t>(X.rows()) < config_.min_samples_leaf)
    throw ValidationError("forest: fewer rows than min_samples_leaf");
}

RegressionTree RandomForest::fit_tree(const Matrix &X, const Matrix &Y, std::size_t index) const {
  Engine rng(tree_seed(config_.seed, index));
  const auto W = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> rows(W);
  if (config_.bootstrap) {
    for (auto &r : rows) r = uniform_index(rng, W);
  } else {
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  return RegressionTree::fit(X, Y, rows, config_, rng);
}

void RandomForest::fit(const Matrix &X, const Matrix &Y) {
  check_training_shapes(X, Y);
  std::vector<RegressionTree> trees(config_.n_trees);
  const auto count = static_cast<std::ptrdiff_t>(config_.n_trees);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i)
    trees[static_cast<std::size_t>(i)] = fit_tree(X, Y, static_cast<std::size_t>(i));
  trees_ = std::move(trees);
  n_features_ = static_cast<std::size_t>(X.cols());
  n_outputs_ = static_cast<std::size_t>(Y.cols());
}

void RandomForest::fit_serial(const Matrix &X, const Matrix &Y) {
  check_training_shapes(X, Y);
  std::vector<RegressionTree> trees;
  trees.reserve(config_.n_trees);
  for (std::size_t i = 0; i < config_.n_trees; ++i) trees.push_back(fit_tree(X, Y, i));
  trees_ = std::move(trees);
  n_features_ = static_cast<std::size_t>(X.cols());
  n_outputs_ = static_cast<std::size_t>(Y.cols());
}

void RandomForest::check_predict_input(const Matrix &X) const {
  if (!fitted()) throw NotFitted("forest: predict called before fit");
  if (static_cast<std::size_t>(X.cols()) != n_features_)
    throw DimensionMismatch("forest: expected " + std::to_string(n_features_) + " features, got " +
                            std::to_string(X.cols()));
}

void RandomForest::predict_row(const Matrix &X, Eigen::Index r, Matrix &out) const {
  double *dst = out.row(r).data();
  std::fill(dst, dst + n_outputs_, 0.0);
  const double *x = X.row(r).data();
  for (const auto &tree : trees_) {
    const auto leaf = tree.leaf_values(x);
    for (std::size_t o = 0; o < n_outputs_; ++o) dst[o] += leaf[o];
  }
  const double scale = 1.0 / static_cast<double>(trees_.size());
  for (std::size_t o = 0; o < n_outputs_; ++o) dst[o] *= scale;
}

Matrix RandomForest::predict(const Matrix &X) const {
  check_predict_input(X);
  Matrix out(X.rows(), static_cast<Eigen::Index>(n_outputs_));
  const Eigen::Index rows = X.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < rows; ++r) predict_row(X, r, out);
  return out;
}

Matrix RandomForest::predict_serial(const Matrix &X) const {
  check_predict_input(X);
  Matrix out(X.rows(), static_cast<Eigen::Index>(n_outputs_));
  for (Eigen::Index r = 0; r < X.rows(); ++r) predict_row(X, r, out);
  return out;
}

RandomForest RandomForest::from_trees(ForestConfig config, std::vector<RegressionTree> trees,
                                      std::size_t n_features) {
  if (trees.empty()) throw ValidationError("forest: no trees");
  RandomForest f(config);
  f.n_outputs_ = trees.front().outputs();
  for (const auto &t : trees)
    if (t.outputs() != f.n_outputs_) throw DimensionMismatch("forest: trees disagree on output size");
  f.trees_ = std::move(trees);
  f.n_features_ = n_features;
  return f;
}

nlohmann::json RandomForest::to_json() const {
  if (!fitted()) throw NotFitted("forest: nothing to save");
  nlohmann::json trees = nlohmann::json::array();
  for (const auto &t : trees_) trees.push_back(t.to_json());
  return {{"format", kForestFormat},
          {"config", config_.to_json()},
          {"n_features", n_features_},
          {"n_outputs", n_outputs_},
          {"trees", std::move(trees)}};
}

RandomForest RandomForest::from_json(const nlohmann::json &j) {
  if (!j.contains("format") || j.at("format") != kForestFormat)
    throw ValidationError(std::string("forest: expected format tag ") + kForestFormat);
  const auto n_features = j.at("n_features").get<std::size_t>();
  const auto n_outputs = j.at("n_outputs").get<std::size_t>();
  std::vector<RegressionTree> trees;
  for (const auto &t : j.at("trees")) {
    trees.push_back(RegressionTree::from_json(t, n_outputs));
    for (const auto &node : trees.back().nodes())
      if (node.feature >= 0 && static_cast<std::size_t>(node.feature) >= n_features)
        throw DimensionMismatch("forest: split on feature outside the input width");
  }
  return from_trees(ForestConfig::from_json(j.at("config")), std::move(trees), n_features);
}

void RandomForest::save(const std::filesystem::path &path) const {
  csv::write_text(path, to_json().dump());
}

RandomForest RandomForest::load(const std::filesystem::path &path) {
  return from_json(nlohmann::json::parse(csv::read_text(path)));
}

}  // namespace cavwatch
