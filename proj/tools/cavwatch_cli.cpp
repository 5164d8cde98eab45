#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cavwatch/csv.hpp"
#include "cavwatch/errors.hpp"
#include "cavwatch/pipeline.hpp"
#include "cavwatch/run_config.hpp"

namespace {

using namespace cavwatch;

struct GlobalOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

RunConfig resolve(const GlobalOptions &g) {
  RunConfig c = g.config.empty() ? RunConfig::case_study() : RunConfig::load(g.config);
  if (!g.out.empty()) c.output_dir = g.out;
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

void emit(const std::string &text, const std::string &output) {
  if (output.empty() || output == "-") {
    std::cout << text;
    return;
  }
  csv::write_text(output, text);
}

void print_report(const nlohmann::json &report) {
  const auto &normal = report.at("normal");
  std::cout << "theta " << report.at("threshold").at("theta").get<double>() << " m, false-positive rate (test) "
            << normal.at("false_positive_rate_test").get<double>() << ", flagged fraction (all normal windows) "
            << normal.at("flagged_fraction_all").get<double>() << "\n";
  for (const auto &a : report.at("attacks")) {
    std::cout << a.at("name").get<std::string>() << ": ";
    const auto &first = a.at("first_flagged");
    if (first.is_null()) std::cout << "not detected";
    else
      std::cout << "first flagged window origin " << first.at("origin_time") << ", latency "
                << first.at("latency_steps") << " steps";
    if (!a.at("failure").is_null()) std::cout << " (" << a.at("failure").at("message").get<std::string>() << ")";
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Platoon simulation, attack injection and residual-based anomaly detection"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration JSON (default: built-in case study)");
  app.add_option("--out", g.out, "Output directory (overrides output_dir)");
  app.add_option("--seed", g.seed, "Master seed (overrides seed)");

  auto *simulate = app.add_subcommand("simulate", "Simulate the normal run and every configured attack");
  auto *windows = app.add_subcommand("windows", "Build and split sliding windows from the normal run");
  auto *train = app.add_subcommand("train", "Fit the configured predictor on the training windows");
  auto *metrics = app.add_subcommand("metrics", "Score the predictor on the held-out windows");
  auto *calibrate = app.add_subcommand("calibrate", "Calibrate the anomaly threshold on held-out normal windows");
  auto *detect = app.add_subcommand("detect", "Score every run, write flags and the detection report");
  auto *pipeline = app.add_subcommand("pipeline", "Run all stages in order");
  auto *config_cmd = app.add_subcommand("config", "Print the resolved run configuration as JSON");

  auto *plot = app.add_subcommand("plotdata", "Export long-format series,time,value CSV");
  std::string plot_kind, plot_run = "normal", plot_output;
  std::size_t plot_car = 0, plot_origin = 0;
  plot->add_option("kind", plot_kind, "trajectory | flags | prediction")
      ->required()
      ->check(CLI::IsMember({"trajectory", "flags", "prediction"}));
  plot->add_option("--run", plot_run, "Run name (normal or an attack name)");
  plot->add_option("--car", plot_car, "Vehicle index for prediction (0 = lead)");
  plot->add_option("--origin", plot_origin, "Window origin step for prediction");
  plot->add_option("-o,--output", plot_output, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 1;
  }

  try {
    const RunConfig config = resolve(g);
    if (*simulate) {
      const auto manifest = stage_simulate(config);
      for (const auto &r : manifest.at("runs")) {
        std::cout << r.at("name").get<std::string>() << ": " << r.at("steps") << " steps";
        if (!r.at("failure").is_null()) std::cout << ", " << r.at("failure").at("message").get<std::string>();
        std::cout << "\n";
      }
    } else if (*windows) {
      const auto j = stage_windows(config);
      std::cout << "train " << j.at("train").at("W") << " windows, test " << j.at("test").at("W") << " windows\n";
    } else if (*train) {
      const auto j = stage_train(config);
      std::cout << "trained " << j.at("model").get<std::string>() << " on " << j.at("train_windows") << " windows\n";
    } else if (*metrics) {
      std::cout << stage_metrics(config).to_json().dump(2) << "\n";
    } else if (*calibrate) {
      std::cout << stage_calibrate(config).to_json().dump(2) << "\n";
    } else if (*detect) {
      print_report(stage_detect(config));
    } else if (*pipeline) {
      print_report(run_pipeline(config));
    } else if (*config_cmd) {
      std::cout << config.to_json().dump(2) << "\n";
    } else if (*plot) {
      const RunPaths paths{config.output_dir};
      std::string text;
      if (plot_kind == "trajectory") {
        text = plot_trajectory(paths.trajectory(plot_run));
      } else if (plot_kind == "flags") {
        const auto t = ThresholdConfig::from_json(nlohmann::json::parse(csv::read_text(paths.threshold())));
        text = plot_flags(paths.flags(plot_run), t.theta);
      } else {
        text = plot_prediction(config, plot_run, plot_car, plot_origin);
      }
      emit(text, plot_output);
    }
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
