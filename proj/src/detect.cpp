#include "cavwatch/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cavwatch/csv.hpp"
#include "cavwatch/errors.hpp"

namespace cavwatch {

namespace {

constexpr double kMapeFloor = 1e-9;

ResidualReport prepare(const Matrix &Y, const Matrix &Yhat, std::vector<std::size_t> origins) {
  if (Y.rows() != Yhat.rows() || Y.cols() != Yhat.cols())
    throw DimensionMismatch("residuals: Y is " + std::to_string(Y.rows()) + "x" + std::to_string(Y.cols()) +
                            ", prediction is " + std::to_string(Yhat.rows()) + "x" + std::to_string(Yhat.cols()));
  const auto W = static_cast<std::size_t>(Y.rows());
  if (origins.empty()) {
    origins.resize(W);
    std::iota(origins.begin(), origins.end(), std::size_t{0});
  }
  if (origins.size() != W) throw DimensionMismatch("residuals: origin_times length differs from window count");
  ResidualReport r;
  r.D.resize(Y.rows(), Y.cols());
  r.S.assign(W, 0.0);
  r.origin_times = std::move(origins);
  return r;
}

void fill_row(const Matrix &Y, const Matrix &Yhat, Eigen::Index w, ResidualReport &r) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < Y.cols(); ++k) {
    const double d = std::abs(Y(w, k) - Yhat(w, k));
    r.D(w, k) = d;
    s += d;
  }
  r.S[static_cast<std::size_t>(w)] = s;
}

}  // namespace

ResidualReport residuals(const Matrix &Y, const Matrix &Yhat, std::vector<std::size_t> origin_times) {
  ResidualReport r = prepare(Y, Yhat, std::move(origin_times));
  const Eigen::Index W = Y.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index w = 0; w < W; ++w) fill_row(Y, Yhat, w, r);
  return r;
}

ResidualReport residuals_serial(const Matrix &Y, const Matrix &Yhat, std::vector<std::size_t> origin_times) {
  ResidualReport r = prepare(Y, Yhat, std::move(origin_times));
  for (Eigen::Index w = 0; w < Y.rows(); ++w) fill_row(Y, Yhat, w, r);
  return r;
}

void ThresholdConfig::validate() const {
  if (!(percentile > 0.0 && percentile < 100.0)) throw ValidationError("threshold: percentile must lie in (0, 100)");
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw ValidationError("threshold: theta must be finite and >= 0");
}

nlohmann::json ThresholdConfig::to_json() const { return {{"percentile", percentile}, {"theta", theta}}; }

ThresholdConfig ThresholdConfig::from_json(const nlohmann::json &j) {
  ThresholdConfig t;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "percentile") t.percentile = it->get<double>();
    else if (it.key() == "theta") t.theta = it->get<double>();
    else throw ValidationError("threshold: unknown key '" + it.key() + "'");
  }
  t.validate();
  return t;
}

double calibrate_threshold(std::vector<double> S, double percentile) {
  if (S.empty()) throw EmptyCalibrationSet("calibrate_threshold: no scores");
  if (!(percentile > 0.0 && percentile < 100.0))
    throw ValidationError("calibrate_threshold: percentile must lie in (0, 100)");
  std::sort(S.begin(), S.end());
  const double rank = percentile / 100.0 * static_cast<double>(S.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, S.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return S[lo] + frac * (S[hi] - S[lo]);
}

std::vector<bool> flag_all(const std::vector<double> &S, double theta) {
  std::vector<bool> out(S.size());
  for (std::size_t i = 0; i < S.size(); ++i) out[i] = flag(S[i], theta);
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"mape", mape}, {"mae", mae}, {"mse", mse}, {"r2", r2}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json &j) {
  return {j.at("mape").get<double>(), j.at("mae").get<double>(), j.at("mse").get<double>(), j.at("r2").get<double>()};
}

MetricsReport compute_metrics(const Matrix &Y, const Matrix &Yhat) {
  if (Y.rows() != Yhat.rows() || Y.cols() != Yhat.cols())
    throw DimensionMismatch("metrics: Y and prediction shapes differ");
  if (Y.size() == 0) throw ValidationError("metrics: empty input");
  const double count = static_cast<double>(Y.size());
  const double mean = Y.sum() / count;
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0, tot = 0.0;
  std::size_t pct_count = 0;
  for (Eigen::Index k = 0; k < Y.size(); ++k) {
    const double y = Y.data()[k];
    const double d = y - Yhat.data()[k];
    abs_sum += std::abs(d);
    sq_sum += d * d;
    tot += (y - mean) * (y - mean);
    if (std::abs(y) > kMapeFloor) {
      pct_sum += std::abs(d) / std::abs(y);
      ++pct_count;
    }
  }
  if (Y.maxCoeff() == Y.minCoeff()) throw ZeroVariance("metrics: all targets are equal, r2 undefined");
  MetricsReport m;
  m.mae = abs_sum / count;
  m.mse = sq_sum / count;
  m.mape = pct_count ? pct_sum / static_cast<double>(pct_count) : 0.0;
  m.r2 = 1.0 - sq_sum / tot;
  return m;
}

Matrix localize(const ResidualReport &report, std::size_t n_vehicles) {
  const auto n = static_cast<Eigen::Index>(n_vehicles);
  if (n == 0 || report.D.cols() % n != 0)
    throw DimensionMismatch("localize: residual width is not a multiple of the vehicle count");
  Matrix shares = Matrix::Zero(report.D.rows(), n);
  const Eigen::Index steps = report.D.cols() / n;
  for (Eigen::Index w = 0; w < report.D.rows(); ++w)
    for (Eigen::Index t = 0; t < steps; ++t) shares.row(w) += report.D.row(w).segment(t * n, n);
  return shares;
}

std::string flags_csv(const ResidualReport &report, double theta) {
  std::string out = "origin_time,S,flag\n";
  for (std::size_t w = 0; w < report.windows(); ++w) {
    out += std::to_string(report.origin_times[w]);
    out += ',';
    out += csv::fixed(report.S[w], 9);
    out += flag(report.S[w], theta) ? ",1\n" : ",0\n";
  }
  return out;
}

void write_flags_csv(const std::filesystem::path &path, const ResidualReport &report, double theta) {
  csv::write_text(path, flags_csv(report, theta));
}

}  // namespace cavwatch
