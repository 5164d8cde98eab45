#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cavwatch {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid configuration or arguments. The CLI maps it to exit code 1.
class ValidationError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class NonPositiveSpacing : public Error {
public:
  explicit NonPositiveSpacing(double spacing)
      : Error("non-positive spacing " + std::to_string(spacing)), spacing_(spacing) {}
  double spacing() const { return spacing_; }

private:
  double spacing_;
};

class CollisionDetected : public Error {
public:
  CollisionDetected(std::size_t step, std::size_t follower, double gap)
      : Error("collision at step " + std::to_string(step) + ": vehicle " +
              std::to_string(follower) + " gap " + std::to_string(gap)),
        step_(step), follower_(follower), gap_(gap) {}
  std::size_t step() const { return step_; }
  std::size_t follower() const { return follower_; }
  double gap() const { return gap_; }

private:
  std::size_t step_;
  std::size_t follower_;
  double gap_;
};

class HistoryUnavailable : public Error {
public:
  using Error::Error;
};

class TrajectoryTooShort : public Error {
public:
  using Error::Error;
};

class EmptySide : public Error {
public:
  using Error::Error;
};

class MalformedCsv : public Error {
public:
  MalformedCsv(std::size_t line, const std::string &what)
      : Error("malformed csv at line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class NotFitted : public Error {
public:
  using Error::Error;
};

class DivergedLoss : public Error {
public:
  explicit DivergedLoss(std::size_t epoch)
      : Error("training loss became non-finite in epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

private:
  std::size_t epoch_;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class EmptyCalibrationSet : public Error {
public:
  using Error::Error;
};

class ZeroVariance : public Error {
public:
  using Error::Error;
};

}  // namespace cavwatch
