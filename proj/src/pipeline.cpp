#include "cavwatch/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "cavwatch/csv.hpp"
#include "cavwatch/dataset.hpp"
#include "cavwatch/forecaster.hpp"
#include "cavwatch/trajectory_io.hpp"

namespace cavwatch {

namespace {

template <class F>
auto in_stage(const std::string &stage, F &&body) {
  try {
    return body();
  } catch (const ValidationError &e) {
    throw ValidationError(stage + ": " + e.what());
  } catch (const StageFailed &) {
    throw;
  } catch (const std::exception &e) {
    throw StageFailed(stage, e.what());
  }
}

void write_json(const std::filesystem::path &path, const nlohmann::json &j) {
  csv::write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path &path) {
  try {
    return nlohmann::json::parse(csv::read_text(path));
  } catch (const nlohmann::json::parse_error &e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::size_t ceil_step(double t, double dt) {
  return static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
}

nlohmann::json failure_json(const std::optional<SimFailure> &f) {
  if (!f) return nullptr;
  return {{"kind", f->kind == SimFailure::Kind::Collision ? "collision" : "non_positive_perceived_gap"},
          {"step", f->step},
          {"vehicle", f->vehicle},
          {"gap", f->value},
          {"message", f->message}};
}

nlohmann::json detection_json(const std::optional<Detection> &d) {
  if (!d) return nullptr;
  return {{"origin_time", d->origin_time}, {"window_end", d->window_end}, {"S", d->S}, {"latency_steps", d->latency_steps}};
}

/// Windows over a recorded trajectory; empty when the run is shorter than one window.
WindowedDataset windows_of(const RunConfig &c, const std::string &run) {
  const Trajectory traj = read_trajectory(RunPaths{c.output_dir}.trajectory(run));
  if (traj.vehicles() != c.sim.n_vehicles)
    throw DimensionMismatch(run + ": trajectory has " + std::to_string(traj.vehicles()) + " vehicles");
  if (traj.steps() < c.t1 + c.t2) {
    WindowedDataset empty;
    empty.spec = c.window();
    empty.X.resize(0, static_cast<Eigen::Index>(empty.spec.feature_cols()));
    empty.Y.resize(0, static_cast<Eigen::Index>(empty.spec.target_cols()));
    return empty;
  }
  return build_windows(traj, c.t1, c.t2);
}

ResidualReport score(const Forecaster &model, const WindowedDataset &ds) {
  if (ds.windows() == 0) return residuals(ds.Y, ds.Y, {});
  return residuals(ds.Y, model.predict(ds.X), ds.origin_times);
}

double fraction(std::size_t k, std::size_t n) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; }

std::size_t count_flags(const std::vector<double> &S, double theta) {
  std::size_t k = 0;
  for (double s : S) k += flag(s, theta);
  return k;
}

void append_row(std::string &out, const std::string &series, const std::string &time, double value) {
  out += series;
  out += ',';
  out += time;
  out += ',';
  out += csv::fixed(value, 9);
  out += '\n';
}

}  // namespace

std::size_t onset_step(const AttackSpec &a, double dt) { return ceil_step(a.onset, dt); }

std::optional<std::size_t> end_step(const AttackSpec &a, double dt) {
  if (!a.duration) return std::nullopt;
  return ceil_step(a.onset + *a.duration, dt);
}

std::optional<Detection> first_detection(const ResidualReport &attacked, double theta, const WindowSpec &spec,
                                         std::size_t onset, std::optional<std::size_t> end,
                                         const ResidualReport *baseline) {
  const std::size_t stop = end.value_or(std::numeric_limits<std::size_t>::max());
  for (std::size_t w = 0; w < attacked.windows(); ++w) {
    const std::size_t origin = attacked.origin_times[w];
    const std::size_t last = window_end(origin, spec);
    if (last < onset || origin >= stop || !flag(attacked.S[w], theta)) continue;
    if (baseline) {
      const auto &o = baseline->origin_times;
      const auto it = std::lower_bound(o.begin(), o.end(), origin);
      if (it != o.end() && *it == origin && flag(baseline->S[static_cast<std::size_t>(it - o.begin())], theta))
        continue;
    }
    return Detection{origin, last, attacked.S[w], last - onset};
  }
  return std::nullopt;
}

nlohmann::json stage_simulate(const RunConfig &config) {
  return in_stage("simulate", [&] {
    config.validate();
    const RunPaths paths{config.output_dir};
    const SimConfig sim = config.effective_sim();
    nlohmann::json runs = nlohmann::json::array();
    auto record = [&](const std::string &name, const SimResult &r, const std::optional<AttackSpec> &attack) {
      write_trajectory(paths.trajectory(name), r.trajectory);
      runs.push_back({{"name", name},
                      {"attack", attack ? to_json(*attack) : nlohmann::json(nullptr)},
                      {"steps", r.trajectory.steps()},
                      {"failure", failure_json(r.failure)}});
    };
    const SimResult normal = run_simulation(sim, std::optional<AttackSpec>{});
    if (normal.failure) throw StageFailed("simulate", "normal run failed: " + normal.failure->message);
    record("normal", normal, std::nullopt);
    for (std::size_t i = 0; i < config.attacks.size(); ++i) {
      const AttackSpec a = config.effective_attack(i);
      record(config.attacks[i].name, run_simulation(sim, std::optional<AttackSpec>{a}), a);
    }
    nlohmann::json manifest = {{"dt", sim.dt}, {"n_vehicles", sim.n_vehicles}, {"runs", runs}};
    write_json(paths.config(), config.to_json());
    write_json(paths.runs(), manifest);
    return manifest;
  });
}

nlohmann::json stage_windows(const RunConfig &config) {
  return in_stage("windows", [&] {
    config.validate();
    const RunPaths paths{config.output_dir};
    const WindowedDataset all = windows_of(config, "normal");
    const DatasetSplit parts = split(all, config.split_fraction);
    export_csv(paths.train(), parts.train);
    export_csv(paths.test(), parts.test);
    auto meta = [&](const WindowedDataset &d) {
      DatasetMeta m{config.t1, config.t2, config.sim.n_vehicles, d.windows(),
                    with_suffix(paths.trajectory("normal"), ".csv").filename().string(),
                    config.model.type == ModelType::Lstm};
      return m.to_json();
    };
    nlohmann::json j = {{"split_fraction", config.split_fraction},
                        {"train", meta(parts.train)},
                        {"test", meta(parts.test)}};
    write_json(paths.dataset_meta(), j);
    return j;
  });
}

nlohmann::json stage_train(const RunConfig &config) {
  return in_stage("train", [&] {
    config.validate();
    const RunPaths paths{config.output_dir};
    const WindowedDataset train = import_csv(paths.train());
    Forecaster model(config.effective_model(), config.window());
    const std::vector<double> history = model.fit(train);
    model.save(paths.model());
    nlohmann::json j = {{"model", model_type_name(config.model.type)},
                        {"train_windows", train.windows()},
                        {"loss_history", history}};
    write_json(paths.training(), j);
    return j;
  });
}

MetricsReport stage_metrics(const RunConfig &config) {
  return in_stage("metrics", [&] {
    config.validate();
    const RunPaths paths{config.output_dir};
    const WindowedDataset test = import_csv(paths.test());
    const Forecaster model = Forecaster::load(paths.model());
    const MetricsReport m = compute_metrics(test.Y, model.predict(test.X));
    nlohmann::json j = m.to_json();
    j["windows"] = test.windows();
    j["split"] = "test";
    write_json(paths.metrics(), j);
    return m;
  });
}

ThresholdConfig stage_calibrate(const RunConfig &config) {
  return in_stage("calibrate", [&] {
    config.validate();
    const RunPaths paths{config.output_dir};
    const WindowedDataset test = import_csv(paths.test());
    const Forecaster model = Forecaster::load(paths.model());
    const ResidualReport r = score(model, test);
    ThresholdConfig t{config.percentile, calibrate_threshold(r.S, config.percentile)};
    t.validate();
    write_json(paths.threshold(), t.to_json());
    return t;
  });
}

nlohmann::json stage_detect(const RunConfig &config) {
  return in_stage("detect", [&] {
    config.validate();
    const RunPaths paths{config.output_dir};
    const ThresholdConfig threshold = ThresholdConfig::from_json(read_json(paths.threshold()));
    const double theta = threshold.theta;
    const Forecaster model = Forecaster::load(paths.model());
    const WindowSpec spec = config.window();
    const auto runs = read_json(paths.runs());
    const double dt = runs.at("dt").get<double>();

    const WindowedDataset test = import_csv(paths.test());
    const ResidualReport test_scores = score(model, test);
    const ResidualReport normal = score(model, windows_of(config, "normal"));
    write_flags_csv(paths.flags("normal"), normal, theta);

    nlohmann::json report;
    report["threshold"] = threshold.to_json();
    report["window"] = {{"t1", spec.t1}, {"t2", spec.t2}, {"n", spec.n}};
    report["normal"] = {{"test_windows", test_scores.windows()},
                        {"test_flagged", count_flags(test_scores.S, theta)},
                        {"false_positive_rate_test", fraction(count_flags(test_scores.S, theta), test_scores.windows())},
                        {"all_windows", normal.windows()},
                        {"all_flagged", count_flags(normal.S, theta)},
                        {"flagged_fraction_all", fraction(count_flags(normal.S, theta), normal.windows())}};
    nlohmann::json attacks = nlohmann::json::array();
    for (const auto &run : runs.at("runs")) {
      const auto name = run.at("name").get<std::string>();
      if (name == "normal") continue;
      const AttackSpec a = attack_from_json(run.at("attack"));
      const ResidualReport scores = score(model, windows_of(config, name));
      write_flags_csv(paths.flags(name), scores, theta);
      const std::size_t onset = onset_step(a, dt);
      const auto end = end_step(a, dt);
      std::size_t overlapping = 0, flagged = 0;
      for (std::size_t w = 0; w < scores.windows(); ++w) {
        const std::size_t origin = scores.origin_times[w];
        if (window_end(origin, spec) < onset || (end && origin >= *end)) continue;
        ++overlapping;
        flagged += flag(scores.S[w], theta);
      }
      const auto first = first_detection(scores, theta, spec, onset, end);
      const auto attributable = first_detection(scores, theta, spec, onset, end, &normal);
      attacks.push_back({{"name", name},
                         {"kind", kind_name(a.kind)},
                         {"victim", a.victim},
                         {"onset", a.onset},
                         {"onset_step", onset},
                         {"steps_simulated", run.at("steps")},
                         {"failure", run.at("failure")},
                         {"windows", scores.windows()},
                         {"overlapping_windows", overlapping},
                         {"flagged_overlapping", flagged},
                         {"first_flagged", detection_json(first)},
                         {"first_attributable", detection_json(attributable)},
                         {"detected_within_window", first && first->latency_steps <= spec.t1 + spec.t2}});
    }
    report["attacks"] = std::move(attacks);
    write_json(paths.report(), report);
    return report;
  });
}

nlohmann::json run_pipeline(const RunConfig &config) {
  config.validate();
  stage_simulate(config);
  stage_windows(config);
  stage_train(config);
  stage_metrics(config);
  stage_calibrate(config);
  return stage_detect(config);
}

std::string plot_trajectory(const std::filesystem::path &stem) {
  const Trajectory t = read_trajectory(stem);
  std::string out = "series,time,value\n";
  const std::pair<const char *, const Matrix *> groups[] = {
      {"position", &t.positions}, {"velocity", &t.velocities}, {"acceleration", &t.accelerations}};
  for (const auto &[label, m] : groups)
    for (Eigen::Index car = 0; car < m->cols(); ++car) {
      const std::string series = std::string(label) + "_car_" + std::to_string(car + 1);
      for (Eigen::Index r = 0; r < m->rows(); ++r)
        append_row(out, series, csv::time_stamp(static_cast<double>(r) * t.dt), (*m)(r, car));
    }
  return out;
}

std::string plot_flags(const std::filesystem::path &flags_csv, double theta) {
  const auto lines = csv::read_lines(flags_csv);
  if (lines.empty() || lines.front() != "origin_time,S,flag")
    throw MalformedCsv(1, flags_csv.string() + ": expected header origin_time,S,flag");
  std::string score, flags, thresholds;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv::split(lines[i]);
    if (f.size() != 3) throw MalformedCsv(i + 1, "expected 3 fields");
    const std::string time(f[0]);
    csv::parse_index(f[0], i + 1);
    append_row(score, "S", time, csv::parse_double(f[1], i + 1));
    append_row(thresholds, "theta", time, theta);
    append_row(flags, "flag", time, csv::parse_double(f[2], i + 1));
  }
  return "series,time,value\n" + score + thresholds + flags;
}

std::string plot_prediction(const RunConfig &config, const std::string &run, std::size_t car, std::size_t origin) {
  config.validate();
  if (car >= config.sim.n_vehicles) throw ValidationError("plotdata: car index outside the platoon");
  const RunPaths paths{config.output_dir};
  const WindowedDataset ds = windows_of(config, run);
  const Forecaster model = Forecaster::load(paths.model());
  std::string out = "series,time,value\n";
  if (origin >= ds.windows()) return out;
  const Matrix X = ds.X.row(static_cast<Eigen::Index>(origin));
  const Matrix pred = model.predict(X);
  const auto n = config.sim.n_vehicles;
  const std::string label = "_car_" + std::to_string(car + 1);
  std::string actual, predicted;
  for (std::size_t tau = 0; tau < config.t2; ++tau) {
    const auto col = static_cast<Eigen::Index>(tau * n + car);
    const std::string time = std::to_string(origin + config.t1 + tau);
    append_row(actual, "actual" + label, time, ds.Y(static_cast<Eigen::Index>(origin), col));
    append_row(predicted, "predicted" + label, time, pred(0, col));
  }
  return out + actual + predicted;
}

}  // namespace cavwatch
