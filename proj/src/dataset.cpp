#include "cavwatch/dataset.hpp"

#include <cmath>
#include <string_view>

#include "cavwatch/csv.hpp"
#include "cavwatch/errors.hpp"

namespace cavwatch {

void WindowSpec::validate() const {
  if (t1 < 1) throw ValidationError("window: t1 must be >= 1");
  if (t2 < 1) throw ValidationError("window: t2 must be >= 1");
  if (n < 1) throw ValidationError("window: n must be >= 1");
}

WindowedDataset WindowedDataset::slice(std::size_t begin, std::size_t end) const {
  const auto b = static_cast<Eigen::Index>(begin);
  const auto len = static_cast<Eigen::Index>(end - begin);
  WindowedDataset out;
  out.spec = spec;
  out.X = X.middleRows(b, len);
  out.Y = Y.middleRows(b, len);
  out.origin_times.assign(origin_times.begin() + b, origin_times.begin() + b + len);
  return out;
}

WindowedDataset build_windows(const Matrix &positions, std::size_t t1, std::size_t t2) {
  WindowSpec spec{t1, t2, static_cast<std::size_t>(positions.cols())};
  spec.validate();
  const auto total = static_cast<std::size_t>(positions.rows());
  if (total < t1 + t2)
    throw TrajectoryTooShort("trajectory has " + std::to_string(total) + " steps, windows need " +
                             std::to_string(t1 + t2));
  const std::size_t W = total - t1 - t2 + 1;
  const auto n = static_cast<Eigen::Index>(spec.n);

  WindowedDataset ds;
  ds.spec = spec;
  ds.X.resize(static_cast<Eigen::Index>(W), static_cast<Eigen::Index>(spec.feature_cols()));
  ds.Y.resize(static_cast<Eigen::Index>(W), static_cast<Eigen::Index>(spec.target_cols()));
  ds.origin_times.resize(W);
  for (std::size_t w = 0; w < W; ++w) {
    const auto row = static_cast<Eigen::Index>(w);
    for (std::size_t tau = 0; tau < t1; ++tau)
      ds.X.row(row).segment(static_cast<Eigen::Index>(tau) * n, n) =
          positions.row(static_cast<Eigen::Index>(w + tau));
    for (std::size_t tau = 0; tau < t2; ++tau)
      ds.Y.row(row).segment(static_cast<Eigen::Index>(tau) * n, n) =
          positions.row(static_cast<Eigen::Index>(w + t1 + tau));
    ds.origin_times[w] = w;
  }
  return ds;
}

WindowedDataset build_windows(const Trajectory &traj, std::size_t t1, std::size_t t2) {
  return build_windows(traj.positions, t1, t2);
}

std::size_t split_point(std::size_t windows, double train_fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(windows) * train_fraction));
}

DatasetSplit split(const WindowedDataset &ds, double train_fraction) {
  if (!(train_fraction > 0 && train_fraction < 1))
    throw ValidationError("split: train_fraction must be in (0, 1)");
  const std::size_t W = ds.windows();
  const std::size_t cut = split_point(W, train_fraction);
  if (cut == 0 || cut == W)
    throw EmptySide("split of " + std::to_string(W) + " windows at fraction " +
                    std::to_string(train_fraction) + " leaves one side empty");
  return {ds.slice(0, cut), ds.slice(cut, W)};
}

Standardizer Standardizer::fit(const Matrix &train) {
  if (train.rows() == 0) throw ValidationError("standardizer: empty training matrix");
  Standardizer s;
  s.mean_ = train.colwise().mean().transpose();
  s.stddev_.resize(train.cols());
  for (Eigen::Index c = 0; c < train.cols(); ++c) {
    const double var = (train.col(c).array() - s.mean_(c)).square().mean();
    s.stddev_(c) = std::max(std::sqrt(var), 1e-12);
  }
  return s;
}

Matrix Standardizer::apply(const Matrix &m) const {
  if (m.cols() != mean_.size()) throw DimensionMismatch("standardizer: column count differs from fit");
  Matrix out = m;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    out.col(c) = (m.col(c).array() - mean_(c)) / stddev_(c);
  return out;
}

Matrix Standardizer::invert(const Matrix &m) const {
  if (m.cols() != mean_.size()) throw DimensionMismatch("standardizer: column count differs from fit");
  Matrix out = m;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    out.col(c) = m.col(c).array() * stddev_(c) + mean_(c);
  return out;
}

nlohmann::json Standardizer::to_json() const {
  return {{"mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
          {"stddev", std::vector<double>(stddev_.data(), stddev_.data() + stddev_.size())}};
}

Standardizer Standardizer::from_json(const nlohmann::json &j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("stddev").get<std::vector<double>>();
  if (mean.size() != sd.size()) throw DimensionMismatch("standardizer: mean/stddev length differ");
  Standardizer s;
  s.mean_ = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.stddev_ = Eigen::Map<const Vector>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  return s;
}

namespace {

void check_frame_shape(const WindowSpec &spec, const Matrix &X) {
  if (static_cast<std::size_t>(X.cols()) != spec.feature_cols())
    throw DimensionMismatch("frame: X has " + std::to_string(X.cols()) + " columns, expected " +
                            std::to_string(spec.feature_cols()));
}

}  // namespace

Matrix ConstantVelocityFrame::features(const Matrix &X) const {
  check_frame_shape(spec_, X);
  const auto n = static_cast<Eigen::Index>(spec_.n);
  const Eigen::Index last = static_cast<Eigen::Index>(spec_.t1 - 1) * n;
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    for (std::size_t tau = 0; tau < spec_.t1; ++tau) {
      const Eigen::Index off = static_cast<Eigen::Index>(tau) * n;
      out.row(r).segment(off, n) = X.row(r).segment(off, n) - X.row(r).segment(last, n);
    }
  return out;
}

Matrix ConstantVelocityFrame::baseline(const Matrix &X) const {
  check_frame_shape(spec_, X);
  const auto n = static_cast<Eigen::Index>(spec_.n);
  const Eigen::Index last = static_cast<Eigen::Index>(spec_.t1 - 1) * n;
  Matrix out(X.rows(), static_cast<Eigen::Index>(spec_.target_cols()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    Eigen::RowVectorXd anchor = X.row(r).segment(last, n);
    Eigen::RowVectorXd velocity = Eigen::RowVectorXd::Zero(n);
    if (spec_.t1 >= 2) velocity = anchor - X.row(r).segment(last - n, n);
    for (std::size_t tau = 0; tau < spec_.t2; ++tau)
      out.row(r).segment(static_cast<Eigen::Index>(tau) * n, n) =
          anchor + static_cast<double>(tau + 1) * velocity;
  }
  return out;
}

Matrix ConstantVelocityFrame::targets(const Matrix &X, const Matrix &Y) const {
  if (Y.rows() != X.rows() || static_cast<std::size_t>(Y.cols()) != spec_.target_cols())
    throw DimensionMismatch("frame: Y shape does not match X / window spec");
  return Y - baseline(X);
}

Matrix ConstantVelocityFrame::positions(const Matrix &X, const Matrix &frame_targets) const {
  if (frame_targets.rows() != X.rows() ||
      static_cast<std::size_t>(frame_targets.cols()) != spec_.target_cols())
    throw DimensionMismatch("frame: prediction shape does not match X / window spec");
  return frame_targets + baseline(X);
}

std::string dataset_csv(const WindowedDataset &ds) {
  const auto &s = ds.spec;
  std::string out = "origin";
  for (std::size_t tau = 0; tau < s.t1; ++tau)
    for (std::size_t c = 0; c < s.n; ++c)
      out += ",x_t" + std::to_string(tau) + "_c" + std::to_string(c + 1);
  for (std::size_t tau = 0; tau < s.t2; ++tau)
    for (std::size_t c = 0; c < s.n; ++c)
      out += ",y_t" + std::to_string(tau) + "_c" + std::to_string(c + 1);
  out += '\n';
  for (std::size_t w = 0; w < ds.windows(); ++w) {
    const auto r = static_cast<Eigen::Index>(w);
    out += std::to_string(ds.origin_times[w]);
    for (Eigen::Index c = 0; c < ds.X.cols(); ++c) out += ',' + csv::fixed(ds.X(r, c));
    for (Eigen::Index c = 0; c < ds.Y.cols(); ++c) out += ',' + csv::fixed(ds.Y(r, c));
    out += '\n';
  }
  return out;
}

void export_csv(const std::filesystem::path &path, const WindowedDataset &ds) {
  csv::write_text(path, dataset_csv(ds));
}

namespace {

// Parses "x_t{tau}_c{car}"; returns false if the name does not have that shape.
bool parse_column(std::string_view name, char prefix, std::size_t &tau, std::size_t &car) {
  if (name.size() < 6 || name[0] != prefix || name.substr(1, 2) != "_t") return false;
  const auto mid = name.find("_c", 3);
  if (mid == std::string_view::npos) return false;
  try {
    tau = csv::parse_index(name.substr(3, mid - 3), 1);
    car = csv::parse_index(name.substr(mid + 2), 1);
  } catch (const MalformedCsv &) {
    return false;
  }
  return car >= 1;
}

}  // namespace

WindowedDataset import_csv(const std::filesystem::path &path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw MalformedCsv(1, "missing header");
  const auto header = csv::split(lines[0]);
  if (header.empty() || header[0] != "origin") throw MalformedCsv(1, "first column must be 'origin'");

  std::size_t nx = 0, max_tau_x = 0, max_car = 0;
  std::size_t i = 1;
  std::size_t tau = 0, car = 0;
  for (; i < header.size() && parse_column(header[i], 'x', tau, car); ++i, ++nx) {
    max_tau_x = std::max(max_tau_x, tau);
    max_car = std::max(max_car, car);
  }
  std::size_t ny = 0, max_tau_y = 0;
  for (; i < header.size() && parse_column(header[i], 'y', tau, car); ++i, ++ny)
    max_tau_y = std::max(max_tau_y, tau);
  if (i != header.size()) throw MalformedCsv(1, "unexpected column '" + std::string(header[i]) + "'");
  if (nx == 0 || ny == 0) throw MalformedCsv(1, "header needs x_ and y_ columns");

  WindowSpec spec{max_tau_x + 1, max_tau_y + 1, max_car};
  if (spec.feature_cols() != nx || spec.target_cols() != ny)
    throw MalformedCsv(1, "header is not a complete time-major grid");
  // Verify the exact ordering.
  for (std::size_t k = 0; k < nx + ny; ++k) {
    const bool is_x = k < nx;
    const std::size_t idx = is_x ? k : k - nx;
    const std::string expected = std::string(is_x ? "x" : "y") + "_t" + std::to_string(idx / spec.n) +
                                 "_c" + std::to_string(idx % spec.n + 1);
    if (header[k + 1] != expected) throw MalformedCsv(1, "expected column '" + expected + "'");
  }

  std::vector<double> xs, ys;
  WindowedDataset ds;
  ds.spec = spec;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = csv::split(lines[ln]);
    if (fields.size() != 1 + nx + ny)
      throw MalformedCsv(ln + 1, "expected " + std::to_string(1 + nx + ny) + " fields, got " +
                                     std::to_string(fields.size()));
    ds.origin_times.push_back(csv::parse_index(fields[0], ln + 1));
    for (std::size_t k = 0; k < nx; ++k) xs.push_back(csv::parse_double(fields[1 + k], ln + 1));
    for (std::size_t k = 0; k < ny; ++k) ys.push_back(csv::parse_double(fields[1 + nx + k], ln + 1));
  }
  const auto W = static_cast<Eigen::Index>(ds.origin_times.size());
  ds.X = Eigen::Map<const Matrix>(xs.data(), W, static_cast<Eigen::Index>(nx));
  ds.Y = Eigen::Map<const Matrix>(ys.data(), W, static_cast<Eigen::Index>(ny));
  return ds;
}

nlohmann::json DatasetMeta::to_json() const {
  return {{"t1", t1},         {"t2", t2},
          {"n", n},           {"W", windows},
          {"source_trajectory", source_trajectory},
          {"normalized", normalized}};
}

DatasetMeta DatasetMeta::from_json(const nlohmann::json &j) {
  DatasetMeta m;
  m.t1 = j.at("t1").get<std::size_t>();
  m.t2 = j.at("t2").get<std::size_t>();
  m.n = j.at("n").get<std::size_t>();
  m.windows = j.at("W").get<std::size_t>();
  m.source_trajectory = j.at("source_trajectory").get<std::string>();
  m.normalized = j.at("normalized").get<bool>();
  return m;
}

}  // namespace cavwatch
