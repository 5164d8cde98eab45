#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavwatch/detect.hpp"
#include "cavwatch/errors.hpp"
#include "cavwatch/run_config.hpp"

namespace cavwatch {

/// A stage failed for a reason other than invalid input; the message starts with the stage name.
class StageFailed : public Error {
public:
  StageFailed(std::string stage, const std::string &what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string &stage() const { return stage_; }

private:
  std::string stage_;
};

/// File layout of one output directory. Every stage reads its inputs from here,
/// so any stage can be re-run on its own.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path runs() const { return root / "runs.json"; }
  std::filesystem::path trajectory(const std::string &run) const { return root / run; }
  std::filesystem::path train() const { return root / "train.csv"; }
  std::filesystem::path test() const { return root / "test.csv"; }
  std::filesystem::path dataset_meta() const { return root / "dataset.json"; }
  std::filesystem::path model() const { return root / "model"; }
  std::filesystem::path training() const { return root / "training.json"; }
  std::filesystem::path metrics() const { return root / "metrics.json"; }
  std::filesystem::path threshold() const { return root / "threshold.json"; }
  std::filesystem::path flags(const std::string &run) const { return root / (run + "_flags.csv"); }
  std::filesystem::path report() const { return root / "detection_report.json"; }
};

/// Steps covered by a window whose first input step is `origin`.
inline std::size_t window_end(std::size_t origin, const WindowSpec &spec) { return origin + spec.t1 + spec.t2 - 1; }

/// First step at which the attack is active (ceil(onset / dt)).
std::size_t onset_step(const AttackSpec &a, double dt);
/// One past the last active step, or nullopt when open-ended.
std::optional<std::size_t> end_step(const AttackSpec &a, double dt);

struct Detection {
  std::size_t origin_time = 0;
  std::size_t window_end = 0;
  double S = 0.0;
  std::size_t latency_steps = 0;  ///< window_end - onset_step
};

/// First window with S > theta that ends at or after onset_step and starts before end_step.
/// With `baseline` (S of the unattacked run at the same origins) the window must also be
/// clean in the baseline, i.e. the flag cannot be explained without the attack.
std::optional<Detection> first_detection(const ResidualReport &attacked, double theta, const WindowSpec &spec,
                                         std::size_t onset, std::optional<std::size_t> end,
                                         const ResidualReport *baseline = nullptr);

// Stages. Each validates the config, reads earlier artifacts from config.output_dir
// and writes its own.
nlohmann::json stage_simulate(const RunConfig &config);
nlohmann::json stage_windows(const RunConfig &config);
nlohmann::json stage_train(const RunConfig &config);
MetricsReport stage_metrics(const RunConfig &config);
ThresholdConfig stage_calibrate(const RunConfig &config);
nlohmann::json stage_detect(const RunConfig &config);

/// All stages in order; returns the detection report.
nlohmann::json run_pipeline(const RunConfig &config);

/// Long-format `series,time,value` exports.
std::string plot_trajectory(const std::filesystem::path &stem);
std::string plot_flags(const std::filesystem::path &flags_csv, double theta);
/// Actual and predicted positions of one car over the horizon of the window at `origin`.
std::string plot_prediction(const RunConfig &config, const std::string &run, std::size_t car, std::size_t origin);

}  // namespace cavwatch
