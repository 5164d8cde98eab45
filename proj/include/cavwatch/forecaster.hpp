#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavwatch/dataset.hpp"
#include "cavwatch/forest.hpp"
#include "cavwatch/lstm.hpp"

namespace cavwatch {

enum class ModelType { Forest, Lstm };

std::string model_type_name(ModelType t);
ModelType model_type_from(const std::string &name);

/// Model selector plus both model configs; only the selected one is used.
/// For the LSTM, input_size and output_size are overwritten from the window spec.
struct ModelConfig {
  ModelType type = ModelType::Forest;
  ForestConfig forest;
  LstmConfig lstm;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json &j);
};

/// Position predictor with the shared contract: windows in, metres out.
///
/// Both models work in the ConstantVelocityFrame. The LSTM path additionally
/// z-scores features and frame targets with Standardizers fitted on the
/// training rows.
class Forecaster {
public:
  Forecaster(ModelConfig config, WindowSpec spec);

  /// Returns the per-epoch training loss (empty for the forest).
  std::vector<double> fit(const WindowedDataset &train);
  /// Predicted Y in metres. Throws NotFitted / DimensionMismatch.
  Matrix predict(const Matrix &X) const;

  bool fitted() const { return fitted_; }
  const ModelConfig &config() const { return config_; }
  const WindowSpec &spec() const { return frame_.spec(); }
  const RandomForest *forest() const { return forest_ ? &*forest_ : nullptr; }
  const StackedLstm *lstm() const { return lstm_ ? &*lstm_ : nullptr; }

  /// Writes `<stem>.json` plus `<stem>_forest.json` or `<stem>_lstm.{json,bin}`.
  void save(const std::filesystem::path &stem) const;
  static Forecaster load(const std::filesystem::path &stem);

private:
  ModelConfig config_;
  ConstantVelocityFrame frame_;
  std::optional<RandomForest> forest_;
  std::optional<StackedLstm> lstm_;
  Standardizer x_scale_;
  Standardizer y_scale_;
  bool fitted_ = false;
};

inline constexpr const char *kForecasterFormat = "cavwatch.forecaster.v1";

}  // namespace cavwatch
