#include "cavwatch/regression_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cavwatch/errors.hpp"

namespace cavwatch {

void ForestConfig::validate() const {
  if (n_trees < 1) throw ValidationError("forest: n_trees must be >= 1");
  if (max_depth < 1) throw ValidationError("forest: max_depth must be >= 1");
  if (min_samples_leaf < 1) throw ValidationError("forest: min_samples_leaf must be >= 1");
  if (!(feature_subsample > 0 && feature_subsample <= 1))
    throw ValidationError("forest: feature_subsample must be in (0, 1]");
}

std::size_t ForestConfig::features_per_split(std::size_t n_features) const {
  const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(n_features) * feature_subsample));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n_features, 1));
}

nlohmann::json ForestConfig::to_json() const {
  return {{"n_trees", n_trees},
          {"max_depth", max_depth},
          {"min_samples_leaf", min_samples_leaf},
          {"feature_subsample", feature_subsample},
          {"bootstrap", bootstrap},
          {"seed", seed}};
}

ForestConfig ForestConfig::from_json(const nlohmann::json &j) {
  ForestConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto &k = it.key();
    if (k == "n_trees") c.n_trees = it->get<std::size_t>();
    else if (k == "max_depth") c.max_depth = it->get<std::size_t>();
    else if (k == "min_samples_leaf") c.min_samples_leaf = it->get<std::size_t>();
    else if (k == "feature_subsample") c.feature_subsample = it->get<double>();
    else if (k == "bootstrap") c.bootstrap = it->get<bool>();
    else if (k == "seed") c.seed = it->get<std::uint64_t>();
    else throw ValidationError("forest: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

bool operator==(const RegressionTree::Node &a, const RegressionTree::Node &b) {
  return a.feature == b.feature && a.threshold == b.threshold && a.left == b.left &&
         a.right == b.right && a.leaf == b.leaf;
}

bool operator==(const RegressionTree &a, const RegressionTree &b) {
  return a.outputs_ == b.outputs_ && a.nodes_ == b.nodes_ && a.values_ == b.values_ &&
         a.leaf_rows_ == b.leaf_rows_;
}

class RegressionTree::Builder {
public:
  Builder(const Matrix &X, const Matrix &Y, const ForestConfig &config, Engine &rng, RegressionTree &tree)
      : X_(X), Y_(Y), config_(config), rng_(rng), tree_(tree),
        outputs_(static_cast<std::size_t>(Y.cols())),
        features_(static_cast<std::size_t>(X.cols())),
        candidates_(config.features_per_split(features_)),
        feature_order_(features_),
        total_(outputs_), left_(outputs_), mean_(outputs_) {
    std::iota(feature_order_.begin(), feature_order_.end(), std::size_t{0});
  }

  std::int32_t grow(std::vector<std::size_t> &rows, std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t n = end - begin;
    sum_targets(rows, begin, end, total_);

    if (depth >= config_.max_depth || n < 2 * config_.min_samples_leaf || constant_targets(rows, begin, end))
      return make_leaf(n);

    const Split s = best_split(rows, begin, end);
    if (s.feature < 0) return make_leaf(n);

    const auto f = static_cast<Eigen::Index>(s.feature);
    const auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                       rows.begin() + static_cast<std::ptrdiff_t>(end),
                                       [&](std::size_t r) { return X_(static_cast<Eigen::Index>(r), f) <= s.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - rows.begin());

    const auto id = static_cast<std::int32_t>(tree_.nodes_.size());
    tree_.nodes_.push_back(Node{s.feature, s.threshold, -1, -1, -1});
    const std::int32_t l = grow(rows, begin, mid, depth + 1);
    const std::int32_t r = grow(rows, mid, end, depth + 1);
    tree_.nodes_[static_cast<std::size_t>(id)].left = l;
    tree_.nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

private:
  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
  };

  const double *target_row(std::size_t r) const { return Y_.data() + r * outputs_; }

  void sum_targets(const std::vector<std::size_t> &rows, std::size_t begin, std::size_t end,
                   std::vector<double> &out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      const double *y = target_row(rows[i]);
      for (std::size_t o = 0; o < outputs_; ++o) out[o] += y[o];
    }
  }

  bool constant_targets(const std::vector<std::size_t> &rows, std::size_t begin, std::size_t end) const {
    const double *first = target_row(rows[begin]);
    for (std::size_t i = begin + 1; i < end; ++i)
      if (!std::equal(first, first + outputs_, target_row(rows[i]))) return false;
    return true;
  }

  std::int32_t make_leaf(std::size_t n) {
    const auto id = static_cast<std::int32_t>(tree_.nodes_.size());
    const auto leaf = static_cast<std::int32_t>(tree_.leaf_rows_.size());
    tree_.nodes_.push_back(Node{-1, 0.0, -1, -1, leaf});
    for (std::size_t o = 0; o < outputs_; ++o) tree_.values_.push_back(total_[o] / static_cast<double>(n));
    tree_.leaf_rows_.push_back(n);
    return id;
  }

  Split best_split(const std::vector<std::size_t> &rows, std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    const std::size_t min_leaf = config_.min_samples_leaf;

    // Gains are scored on targets centred at the node mean, which keeps large
    // target offsets from swamping the squared sums.
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t o = 0; o < outputs_; ++o) mean_[o] = total_[o] * inv_n;
    double node_sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double *y = target_row(rows[i]);
      for (std::size_t o = 0; o < outputs_; ++o) {
        const double d = y[o] - mean_[o];
        node_sse += d * d;
      }
    }
    if (!(node_sse > 0)) return {};
    // Gains below this are rounding noise.
    const double min_gain = 1e-12 * node_sse;

    // Partial Fisher-Yates: the first `candidates_` entries become this node's feature subset.
    for (std::size_t k = 0; k < candidates_; ++k) {
      const std::size_t j = k + uniform_index(rng_, features_ - k);
      std::swap(feature_order_[k], feature_order_[j]);
    }

    Split best;
    double best_gain = min_gain;
    sorted_.resize(n);
    for (std::size_t k = 0; k < candidates_; ++k) {
      const std::size_t f = feature_order_[k];
      const auto fc = static_cast<Eigen::Index>(f);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = rows[begin + i];
        sorted_[i] = {X_(static_cast<Eigen::Index>(r), fc), r};
      }
      std::sort(sorted_.begin(), sorted_.end());
      if (sorted_.front().first == sorted_.back().first) continue;

      std::fill(left_.begin(), left_.end(), 0.0);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double *y = target_row(sorted_[i].second);
        for (std::size_t o = 0; o < outputs_; ++o) left_[o] += y[o];
        if (sorted_[i].first == sorted_[i + 1].first) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        // SSE reduction = sum_o (L_o - nl mu_o)^2 * n / (nl nr)
        const double nl_d = static_cast<double>(nl);
        double dev = 0.0;
        for (std::size_t o = 0; o < outputs_; ++o) {
          const double d = left_[o] - nl_d * mean_[o];
          dev += d * d;
        }
        const double gain = dev * static_cast<double>(n) / (nl_d * static_cast<double>(nr));
        // Distinct features often induce the same partition deep in a tree; a
        // relative margin keeps the first one instead of letting rounding pick.
        if (gain > best_gain * (1.0 + 1e-9)) {
          best_gain = gain;
          best.feature = static_cast<std::int32_t>(f);
          const double lo = sorted_[i].first;
          const double hi = sorted_[i + 1].first;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid >= lo && mid < hi)) mid = lo;
          best.threshold = mid;
        }
      }
    }
    return best;
  }

  const Matrix &X_;
  const Matrix &Y_;
  const ForestConfig &config_;
  Engine &rng_;
  RegressionTree &tree_;
  std::size_t outputs_;
  std::size_t features_;
  std::size_t candidates_;
  std::vector<std::size_t> feature_order_;
  std::vector<double> total_;
  std::vector<double> left_;
  std::vector<double> mean_;
  std::vector<std::pair<double, std::size_t>> sorted_;
};

RegressionTree RegressionTree::fit(const Matrix &X, const Matrix &Y, std::span<const std::size_t> rows,
                                   const ForestConfig &config, Engine &rng) {
  config.validate();
  if (X.rows() != Y.rows()) throw DimensionMismatch("tree: X and Y row counts differ");
  if (rows.empty()) throw ValidationError("tree: no training rows");
  if (X.cols() < 1 || Y.cols() < 1) throw ValidationError("tree: need at least one feature and one output");
  RegressionTree tree;
  tree.outputs_ = static_cast<std::size_t>(Y.cols());
  std::vector<std::size_t> work(rows.begin(), rows.end());
  Builder builder(X, Y, config, rng, tree);
  builder.grow(work, 0, work.size(), 0);
  return tree;
}

RegressionTree RegressionTree::fit(const Matrix &X, const Matrix &Y, const ForestConfig &config, Engine &rng) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(X.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit(X, Y, rows, config, rng);
}

std::span<const double> RegressionTree::leaf_values(const double *x) const {
  std::size_t id = 0;
  while (nodes_[id].feature >= 0) {
    const Node &node = nodes_[id];
    id = static_cast<std::size_t>(x[node.feature] <= node.threshold ? node.left : node.right);
  }
  return {values_.data() + static_cast<std::size_t>(nodes_[id].leaf) * outputs_, outputs_};
}

Matrix RegressionTree::predict(const Matrix &X) const {
  Matrix out(X.rows(), static_cast<Eigen::Index>(outputs_));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const auto leaf = leaf_values(X.row(r).data());
    std::copy(leaf.begin(), leaf.end(), out.row(r).data());
  }
  return out;
}

std::size_t RegressionTree::depth() const {
  // Nodes are stored in preorder, so a single forward pass can propagate depths.
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

nlohmann::json RegressionTree::to_json() const {
  std::vector<std::int32_t> feature, left, right, leaf;
  std::vector<double> threshold;
  for (const auto &n : nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    leaf.push_back(n.leaf);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right},     {"leaf", leaf},           {"leaf_rows", leaf_rows_},
          {"values", values_}};
}

RegressionTree RegressionTree::from_json(const nlohmann::json &j, std::size_t outputs) {
  RegressionTree t;
  t.outputs_ = outputs;
  const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<std::int32_t>>();
  const auto right = j.at("right").get<std::vector<std::int32_t>>();
  const auto leaf = j.at("leaf").get<std::vector<std::int32_t>>();
  t.leaf_rows_ = j.at("leaf_rows").get<std::vector<std::size_t>>();
  t.values_ = j.at("values").get<std::vector<double>>();
  const std::size_t count = feature.size();
  if (threshold.size() != count || left.size() != count || right.size() != count || leaf.size() != count ||
      t.values_.size() != t.leaf_rows_.size() * outputs || count == 0)
    throw DimensionMismatch("tree: inconsistent node arrays");
  for (std::size_t i = 0; i < count; ++i) {
    const Node n{feature[i], threshold[i], left[i], right[i], leaf[i]};
    const bool bad_leaf = n.feature < 0 && (n.leaf < 0 || static_cast<std::size_t>(n.leaf) >= t.leaf_rows_.size());
    const bool bad_split = n.feature >= 0 && (n.left <= static_cast<std::int32_t>(i) || n.right <= static_cast<std::int32_t>(i) ||
                                              static_cast<std::size_t>(n.left) >= count ||
                                              static_cast<std::size_t>(n.right) >= count);
    if (bad_leaf || bad_split) throw DimensionMismatch("tree: node " + std::to_string(i) + " is malformed");
    t.nodes_.push_back(n);
  }
  return t;
}

}  // namespace cavwatch
