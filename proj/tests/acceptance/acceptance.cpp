// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Usage: cavwatch_acceptance [work_dir]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cavwatch/csv.hpp"
#include "cavwatch/dataset.hpp"
#include "cavwatch/detect.hpp"
#include "cavwatch/errors.hpp"
#include "cavwatch/forecaster.hpp"
#include "cavwatch/idm.hpp"
#include "cavwatch/lstm.hpp"
#include "cavwatch/pipeline.hpp"
#include "cavwatch/run_config.hpp"
#include "cavwatch/simulator.hpp"

using namespace cavwatch;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string &name, bool ok, const std::string &detail) {
  std::printf("%s  criterion %d  %-22s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void info(const std::string &text) {
  std::printf("      %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char *f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

/// Runs a criterion body; an exception counts as a failure with its message.
void guarded(int id, const std::string &name, const std::function<void()> &body) {
  try {
    body();
  } catch (const std::exception &e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

std::map<std::string, std::string> snapshot(const fs::path &dir) {
  std::map<std::string, std::string> files;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files[e.path().filename().string()] = csv::read_text(e.path());
  return files;
}

nlohmann::json load_json(const fs::path &p) { return nlohmann::json::parse(csv::read_text(p)); }

}  // namespace

int main(int argc, char **argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "cavwatch_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  // 1. IDM baseline.
  guarded(1, "idm-baseline", [] {
    const auto t0 = Clock::now();
    const SimResult r = run_simulation(SimConfig{}, std::optional<AttackSpec>{});
    const double elapsed = seconds_since(t0);
    const Trajectory &t = r.trajectory;
    double worst_v = 0.0, worst_a = 0.0;
    for (Eigen::Index i = 0; i < t.velocities.cols(); ++i)
      worst_v = std::max(worst_v, std::abs(t.velocities(t.velocities.rows() - 1, i) - 10.0) / 10.0);
    for (Eigen::Index row = 2000; row < t.accelerations.rows(); ++row)
      worst_a = std::max(worst_a, t.accelerations.row(row).cwiseAbs().maxCoeff());
    const bool ok = !r.failure && t.steps() == 3000 && worst_v < 0.01 && worst_a < 0.01 && elapsed < 1.0;
    report(1, "idm-baseline", ok,
           std::string(r.failure ? "collision" : "no collisions") + fmt(", max final |v-10|/10 = %.5f (< 0.01)", worst_v) +
               fmt(", max |a| t>=2000 = %.2e (< 0.01)", worst_a) + fmt(", %.3f s (< 1 s)", elapsed));
  });

  // 2. Hand-derived IDM values.
  guarded(2, "oracle-arithmetic", [] {
    IdmParams p;
    p.time_gap = 1.5;
    const double got[] = {desired_spacing(0, 0, p), desired_spacing(10, 2, p), desired_spacing(10, 0, p),
                          idm_acceleration({0, 0, 2}, p), idm_acceleration({10, 0, 1e9}, p),
                          idm_acceleration({5, 0, 50}, p)};
    const double want[] = {2.0, 26.05691588628135, 17.0, 0.0, 0.0, 0.658022};
    double worst = 0.0;
    for (int k = 0; k < 6; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
    report(2, "oracle-arithmetic", worst < 1e-9, fmt("max abs error over 6 values = %.2e (< 1e-9)", worst));
  });

  // 3. Windowing counts.
  guarded(3, "windowing", [] {
    const auto ds = build_windows(simulate(SimConfig{}), 15, 5);
    const bool ok = ds.windows() == 2981 && ds.X.cols() == 150 && ds.Y.cols() == 50;
    report(3, "windowing", ok,
           "W = " + std::to_string(ds.windows()) + ", features = " + std::to_string(ds.X.cols()) +
               ", targets = " + std::to_string(ds.Y.cols()) + " (want 2981 / 150 / 50)");
  });

  // Full case-study pipeline (forest, defaults) shared by criteria 4, 6, 7, 8.
  const RunConfig config_a = [&] {
    RunConfig c = RunConfig::case_study();
    c.output_dir = work / "run_a";
    return c;
  }();
  bool pipeline_ok = false;
  double train_seconds = 0.0;
  try {
    stage_simulate(config_a);
    stage_windows(config_a);
    const auto t0 = Clock::now();
    stage_train(config_a);
    train_seconds = seconds_since(t0);
    stage_metrics(config_a);
    stage_calibrate(config_a);
    stage_detect(config_a);
    pipeline_ok = true;
  } catch (const std::exception &e) {
    info(std::string("case-study pipeline failed: ") + e.what());
  }
  const RunPaths paths{config_a.output_dir};

  // 4. Forest quality on held-out normal windows.
  guarded(4, "forest-quality", [&] {
    if (!pipeline_ok) throw Error("pipeline did not complete");
    const auto m = MetricsReport::from_json(load_json(paths.metrics()));
    const bool ok = m.r2 >= 0.95 && m.mape <= 0.01 && train_seconds < 300.0;
    report(4, "forest-quality", ok,
           fmt("R2 = %.6f (>= 0.95)", m.r2) + fmt(", MAPE = %.3e (<= 0.01)", m.mape) + fmt(", MAE = %.3e m", m.mae) +
               fmt(", fit %.1f s (< 300 s)", train_seconds));
  });

  // 5. LSTM: gradient check, loss trend, held-out R2 with defaults.
  guarded(5, "lstm-properties", [&] {
    LstmConfig small;
    small.hidden_size = 2;
    small.input_size = 3;
    small.output_size = 2;
    StackedLstm net(small);
    Engine rng(23);
    for (Eigen::Index k = 0; k < net.weights().params.size(); ++k)
      net.weights().params[k] = 0.8 * (2.0 * uniform01(rng) - 1.0);
    Matrix X(3, 6), Y(3, 2);
    for (Eigen::Index k = 0; k < X.size(); ++k) X.data()[k] = 2.0 * uniform01(rng) - 1.0;
    for (Eigen::Index k = 0; k < Y.size(); ++k) Y.data()[k] = 2.0 * uniform01(rng) - 1.0;
    const Vector analytic = net.gradient(X, Y);
    double worst_rel = 0.0;
    for (const auto &t : net.weights().tensors) {
      Vector numeric(t.size());
      for (Eigen::Index k = 0; k < t.size(); ++k) {
        double &p = net.weights().params[t.offset + k];
        const double keep = p;
        p = keep + 1e-6;
        const double up = net.loss(X, Y);
        p = keep - 1e-6;
        const double down = net.loss(X, Y);
        p = keep;
        numeric[k] = (up - down) / 2e-6;
      }
      const Vector a = analytic.segment(t.offset, t.size());
      worst_rel = std::max(worst_rel, (a - numeric).norm() / std::max(a.norm() + numeric.norm(), 1e-12));
    }

    const auto parts = split(build_windows(simulate(SimConfig{}), 15, 5), 0.8);
    ModelConfig mc;
    mc.type = ModelType::Lstm;
    mc.lstm.seed = config_a.effective_model().lstm.seed;
    Forecaster model(mc, parts.train.spec);
    const auto t0 = Clock::now();
    const std::vector<double> history = model.fit(parts.train);
    const double fit_seconds = seconds_since(t0);
    const std::size_t tenth = std::max<std::size_t>(1, history.size() / 10);
    auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    };
    const double head = median({history.begin(), history.begin() + static_cast<std::ptrdiff_t>(tenth)});
    const double tail = median({history.end() - static_cast<std::ptrdiff_t>(tenth), history.end()});
    const auto m = compute_metrics(parts.test.Y, model.predict(parts.test.X));
    const bool ok = worst_rel < 1e-4 && tail <= head && m.r2 >= 0.95;
    report(5, "lstm-properties", ok,
           fmt("grad rel err = %.2e (< 1e-4)", worst_rel) + fmt(", loss median first 10%% = %.4e", head) +
               fmt(" >= last 10%% = %.4e", tail) + fmt(", held-out R2 = %.6f (>= 0.95)", m.r2));
    info(fmt("lstm defaults: %.1f s to fit", fit_seconds) + fmt(", MAE %.3e m", m.mae) + fmt(", MAPE %.3e", m.mape));
  });

  // 6. Calibration coverage on a fresh normal run.
  guarded(6, "calibration-coverage", [&] {
    if (!pipeline_ok) throw Error("pipeline did not complete");
    const double theta = ThresholdConfig::from_json(load_json(paths.threshold())).theta;
    SimConfig fresh = config_a.effective_sim();
    fresh.seed ^= 0x5eedull;
    const auto ds = build_windows(simulate(fresh), config_a.t1, config_a.t2);
    const Forecaster model = Forecaster::load(paths.model());
    const auto r = residuals(ds.Y, model.predict(ds.X), ds.origin_times);
    std::size_t flagged = 0;
    for (double s : r.S) flagged += flag(s, theta);
    const double frac = static_cast<double>(flagged) / static_cast<double>(r.windows());
    report(6, "calibration-coverage", std::abs(frac - 0.05) <= 0.03,
           fmt("theta = %.6f m", theta) + ", flagged " + std::to_string(flagged) + "/" + std::to_string(r.windows()) +
               fmt(" = %.4f (0.05 +- 0.03)", frac));
  });

  // 7. Attack detection within T1 + T2 steps of onset.
  guarded(7, "attack-detection", [&] {
    if (!pipeline_ok) throw Error("pipeline did not complete");
    const auto rep = load_json(paths.report());
    bool ok = rep.at("attacks").size() == 3;
    std::string detail;
    for (const auto &a : rep.at("attacks")) {
      const auto &first = a.at("first_flagged");
      const bool hit = a.at("detected_within_window").get<bool>();
      ok &= hit;
      detail += a.at("name").get<std::string>() + ": ";
      detail += first.is_null() ? std::string("none") : "latency " + first.at("latency_steps").dump();
      detail += "; ";
      const auto &attr = a.at("first_attributable");
      info(a.at("name").get<std::string>() + " (victim " + a.at("victim").dump() + ", onset " + a.at("onset").dump() +
           "): first flagged overlapping window " + (first.is_null() ? "none" : first.at("origin_time").dump()) +
           ", first window not flagged in the normal run " + (attr.is_null() ? "none" : attr.at("origin_time").dump()) +
           " (latency " + (attr.is_null() ? "-" : attr.at("latency_steps").dump()) + "), flagged " +
           a.at("flagged_overlapping").dump() + "/" + a.at("overlapping_windows").dump() + " overlapping windows" +
           (a.at("failure").is_null() ? "" : ", " + a.at("failure").at("message").get<std::string>()));
    }
    report(7, "attack-detection", ok, detail + "(each <= 20 steps)");
  });

  // 8. Determinism: a second run from the same config reproduces every artifact byte for byte.
  guarded(8, "determinism", [&] {
    if (!pipeline_ok) throw Error("pipeline did not complete");
    RunConfig config_b = config_a;
    config_b.output_dir = work / "run_b";
    run_pipeline(config_b);
    auto a = snapshot(config_a.output_dir), b = snapshot(config_b.output_dir);
    // config.json records output_dir; compare it with that field normalised.
    for (auto *files : {&a, &b}) {
      auto j = nlohmann::json::parse(files->at("config.json"));
      j["output_dir"] = "";
      (*files)["config.json"] = j.dump();
    }
    std::size_t differing = 0;
    for (const auto &[name, text] : a)
      if (!b.count(name) || b.at(name) != text) ++differing;
    report(8, "determinism", a.size() == b.size() && differing == 0,
           std::to_string(a.size()) + " artifacts compared, " + std::to_string(differing) + " differ (want 0)");
  });

  // 9. Round-trips.
  guarded(9, "round-trips", [&] {
    const auto ds = build_windows(simulate(SimConfig{}), 15, 5);
    export_csv(work / "rt.csv", ds);
    const auto back = import_csv(work / "rt.csv");
    const double csv_err = std::max((back.X - ds.X).cwiseAbs().maxCoeff(), (back.Y - ds.Y).cwiseAbs().maxCoeff());
    const bool csv_ok = back.windows() == ds.windows() && back.origin_times == ds.origin_times && csv_err <= 1e-6;

    bool forest_ok = false;
    if (pipeline_ok) {
      const auto forest = RandomForest::load(work / "run_a" / "model_forest.json");
      forest.save(work / "rt_forest.json");
      forest_ok = RandomForest::load(work / "rt_forest.json") == forest &&
                  csv::read_text(work / "rt_forest.json") == csv::read_text(work / "run_a" / "model_forest.json");
    }

    LstmConfig lc;
    lc.input_size = 10;
    lc.output_size = 50;
    lc.hidden_size = 16;
    lc.epochs = 1;
    StackedLstm net(lc);
    const auto sub = ds.slice(0, 256);
    const ConstantVelocityFrame frame(ds.spec);
    net.fit(frame.features(sub.X), frame.targets(sub.X, sub.Y));
    net.save(work / "rt_lstm");
    const auto loaded = StackedLstm::load(work / "rt_lstm");
    const bool lstm_ok = loaded.weights().params == net.weights().params &&
                         loaded.weights().moments.first == net.weights().moments.first &&
                         loaded.weights().moments.second == net.weights().moments.second;
    report(9, "round-trips", csv_ok && forest_ok && lstm_ok,
           fmt("dataset csv max err = %.1e (<= 1e-6)", csv_err) + ", forest json " + (forest_ok ? "exact" : "MISMATCH") +
               ", lstm binary " + (lstm_ok ? "exact" : "MISMATCH"));
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
