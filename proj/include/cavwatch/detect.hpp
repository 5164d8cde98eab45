#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavwatch/matrix.hpp"

namespace cavwatch {

/// D = |Y - Yhat| elementwise; S = row sums of D.
struct ResidualReport {
  Matrix D;
  std::vector<double> S;
  std::vector<std::size_t> origin_times;

  std::size_t windows() const { return S.size(); }
};

/// OpenMP over windows. `origin_times` may be empty (then 0..W-1 are used).
ResidualReport residuals(const Matrix &Y, const Matrix &Yhat, std::vector<std::size_t> origin_times = {});
ResidualReport residuals_serial(const Matrix &Y, const Matrix &Yhat, std::vector<std::size_t> origin_times = {});

struct ThresholdConfig {
  double percentile = 95.0;
  double theta = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
  static ThresholdConfig from_json(const nlohmann::json &j);
};

/// Linear-interpolation percentile: rank p/100 * (k - 1) into the sorted values.
/// Throws EmptyCalibrationSet.
double calibrate_threshold(std::vector<double> S, double percentile);

/// Strict: ties are not anomalous.
inline bool flag(double S, double theta) { return S > theta; }
std::vector<bool> flag_all(const std::vector<double> &S, double theta);

struct MetricsReport {
  double mape = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  double r2 = 0.0;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json &j);
};

/// Micro-averaged over all elements. Throws DimensionMismatch, ZeroVariance.
MetricsReport compute_metrics(const Matrix &Y, const Matrix &Yhat);

/// Per window, per vehicle: that vehicle's |d| summed over the horizon (W x n).
/// Row w sums to S[w].
Matrix localize(const ResidualReport &report, std::size_t n_vehicles);

/// `origin_time,S,flag` with S to 9 decimals and flag as 0/1.
std::string flags_csv(const ResidualReport &report, double theta);
void write_flags_csv(const std::filesystem::path &path, const ResidualReport &report, double theta);

}  // namespace cavwatch
