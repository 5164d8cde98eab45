#include "cavwatch/trajectory_io.hpp"

#include "cavwatch/csv.hpp"
#include "cavwatch/errors.hpp"

namespace cavwatch {

std::filesystem::path with_suffix(const std::filesystem::path &stem, const std::string &suffix) {
  auto p = stem;
  p += suffix;
  return p;
}

std::string trajectory_csv(const Matrix &values, double dt) {
  std::string out = "time";
  for (Eigen::Index c = 0; c < values.cols(); ++c) out += ",car_" + std::to_string(c + 1);
  out += '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out += csv::time_stamp(static_cast<double>(r) * dt);
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out += ',';
      out += csv::fixed(values(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_trajectory_csv(const std::filesystem::path &path, const Matrix &values, double dt) {
  csv::write_text(path, trajectory_csv(values, dt));
}

Matrix read_trajectory_csv(const std::filesystem::path &path, double *dt) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw MalformedCsv(1, "missing header");
  const auto header = csv::split(lines[0]);
  if (header.size() < 2 || header[0] != "time") throw MalformedCsv(1, "expected 'time,car_1,...'");
  const std::size_t n = header.size() - 1;
  for (std::size_t c = 0; c < n; ++c)
    if (header[c + 1] != "car_" + std::to_string(c + 1))
      throw MalformedCsv(1, "unexpected column '" + std::string(header[c + 1]) + "'");

  std::vector<double> times;
  std::vector<double> flat;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = csv::split(lines[i]);
    if (fields.size() != n + 1)
      throw MalformedCsv(i + 1, "expected " + std::to_string(n + 1) + " fields, got " +
                                    std::to_string(fields.size()));
    times.push_back(csv::parse_double(fields[0], i + 1));
    for (std::size_t c = 0; c < n; ++c) flat.push_back(csv::parse_double(fields[c + 1], i + 1));
  }
  if (dt) *dt = times.size() >= 2 ? times[1] - times[0] : 1.0;
  return Eigen::Map<const Matrix>(flat.data(), static_cast<Eigen::Index>(times.size()),
                                  static_cast<Eigen::Index>(n));
}

void write_trajectory(const std::filesystem::path &stem, const Trajectory &traj) {
  write_trajectory_csv(with_suffix(stem, ".csv"), traj.positions, traj.dt);
  write_trajectory_csv(with_suffix(stem, "_vel.csv"), traj.velocities, traj.dt);
  write_trajectory_csv(with_suffix(stem, "_acc.csv"), traj.accelerations, traj.dt);
}

Trajectory read_trajectory(const std::filesystem::path &stem) {
  Trajectory traj;
  traj.positions = read_trajectory_csv(with_suffix(stem, ".csv"), &traj.dt);
  traj.velocities = read_trajectory_csv(with_suffix(stem, "_vel.csv"));
  traj.accelerations = read_trajectory_csv(with_suffix(stem, "_acc.csv"));
  if (traj.velocities.rows() != traj.positions.rows() || traj.velocities.cols() != traj.positions.cols() ||
      traj.accelerations.rows() != traj.positions.rows() ||
      traj.accelerations.cols() != traj.positions.cols())
    throw DimensionMismatch("trajectory companion files disagree in shape: " + stem.string());
  return traj;
}

}  // namespace cavwatch
