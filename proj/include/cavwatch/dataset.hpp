#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavwatch/matrix.hpp"
#include "cavwatch/simulator.hpp"

namespace cavwatch {

/// Window shape: t1 past steps in, t2 future steps out, n vehicles per step.
struct WindowSpec {
  std::size_t t1 = 15;
  std::size_t t2 = 5;
  std::size_t n = 10;

  void validate() const;
  std::size_t feature_cols() const { return t1 * n; }
  std::size_t target_cols() const { return t2 * n; }
};

/// Supervised windows over one trajectory.
///
/// Columns are time-major: X(w, tau * n + car) is the position of `car` at step
/// origin + tau, and Y(w, tau * n + car) the position at step origin + t1 + tau.
struct WindowedDataset {
  Matrix X;
  Matrix Y;
  WindowSpec spec;
  std::vector<std::size_t> origin_times;

  std::size_t windows() const { return origin_times.size(); }
  /// Rows [begin, end) as a new dataset.
  WindowedDataset slice(std::size_t begin, std::size_t end) const;
};

/// Stride-1 windows; W = T - t1 - t2 + 1. Throws TrajectoryTooShort.
WindowedDataset build_windows(const Matrix &positions, std::size_t t1, std::size_t t2);
WindowedDataset build_windows(const Trajectory &traj, std::size_t t1, std::size_t t2);

struct DatasetSplit {
  WindowedDataset train;
  WindowedDataset test;
};

/// Chronological: the first floor(W * fraction) windows train. Throws EmptySide.
DatasetSplit split(const WindowedDataset &ds, double train_fraction);
/// Index of the first test window for a given W and fraction (no emptiness check).
std::size_t split_point(std::size_t windows, double train_fraction);

/// Per-column z-scoring with population standard deviation floored at 1e-12.
class Standardizer {
public:
  Standardizer() = default;
  static Standardizer fit(const Matrix &train);

  Matrix apply(const Matrix &m) const;
  Matrix invert(const Matrix &m) const;

  const Vector &mean() const { return mean_; }
  const Vector &stddev() const { return stddev_; }

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json &j);

private:
  Vector mean_;
  Vector stddev_;
};

/// Re-expresses windows relative to each car's last observed position.
///
/// Features become x - x_last and targets become the deviation from
/// constant-velocity extrapolation x_last + (tau + 1) * (x_last - x_prev).
/// Models trained in this frame see the same numbers at t = 100 s and at
/// t = 2900 s, which absolute positions (monotone in time) never allow.
/// With t1 == 1 the velocity estimate is zero.
class ConstantVelocityFrame {
public:
  explicit ConstantVelocityFrame(WindowSpec spec) : spec_(spec) {}

  Matrix features(const Matrix &X) const;
  Matrix baseline(const Matrix &X) const;
  Matrix targets(const Matrix &X, const Matrix &Y) const;
  Matrix positions(const Matrix &X, const Matrix &frame_targets) const;

  const WindowSpec &spec() const { return spec_; }

private:
  WindowSpec spec_;
};

/// `origin,x_t0_c1,...,y_t{t2-1}_c{n}` with 6-decimal values.
std::string dataset_csv(const WindowedDataset &ds);
void export_csv(const std::filesystem::path &path, const WindowedDataset &ds);
/// Throws MalformedCsv with the offending line number.
WindowedDataset import_csv(const std::filesystem::path &path);

struct DatasetMeta {
  std::size_t t1 = 0;
  std::size_t t2 = 0;
  std::size_t n = 0;
  std::size_t windows = 0;
  std::string source_trajectory;
  bool normalized = false;

  nlohmann::json to_json() const;
  static DatasetMeta from_json(const nlohmann::json &j);
};

}  // namespace cavwatch
