#pragma once

#include <filesystem>
#include <string>

#include "cavwatch/matrix.hpp"
#include "cavwatch/simulator.hpp"

namespace cavwatch {

/// `time,car_1,...,car_n`, one row per step, integer seconds, values with 6 decimals.
std::string trajectory_csv(const Matrix &values, double dt);
void write_trajectory_csv(const std::filesystem::path &path, const Matrix &values, double dt);
/// Reads a table written by write_trajectory_csv. dt is recovered from the time column
/// (1.0 when only one row exists).
Matrix read_trajectory_csv(const std::filesystem::path &path, double *dt = nullptr);

/// Writes `<stem>.csv`, `<stem>_vel.csv` and `<stem>_acc.csv`.
void write_trajectory(const std::filesystem::path &stem, const Trajectory &traj);
Trajectory read_trajectory(const std::filesystem::path &stem);

std::filesystem::path with_suffix(const std::filesystem::path &stem, const std::string &suffix);

}  // namespace cavwatch
