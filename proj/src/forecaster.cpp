#include "cavwatch/forecaster.hpp"

#include "cavwatch/csv.hpp"
#include "cavwatch/errors.hpp"
#include "cavwatch/trajectory_io.hpp"

namespace cavwatch {

namespace {

std::filesystem::path sibling(const std::filesystem::path &stem, const std::string &tail) {
  return stem.parent_path() / (stem.filename().string() + tail);
}

nlohmann::json spec_json(const WindowSpec &s) { return {{"t1", s.t1}, {"t2", s.t2}, {"n", s.n}}; }

}  // namespace

std::string model_type_name(ModelType t) { return t == ModelType::Forest ? "forest" : "lstm"; }

ModelType model_type_from(const std::string &name) {
  if (name == "forest") return ModelType::Forest;
  if (name == "lstm") return ModelType::Lstm;
  throw ValidationError("model: type must be 'forest' or 'lstm', got '" + name + "'");
}

void ModelConfig::validate() const {
  forest.validate();
  lstm.validate();
}

nlohmann::json ModelConfig::to_json() const {
  return {{"type", model_type_name(type)}, {"forest", forest.to_json()}, {"lstm", lstm.to_json()}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json &j) {
  ModelConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto &k = it.key();
    if (k == "type") c.type = model_type_from(it->get<std::string>());
    else if (k == "forest") c.forest = ForestConfig::from_json(*it);
    else if (k == "lstm") c.lstm = LstmConfig::from_json(*it);
    else throw ValidationError("model: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

Forecaster::Forecaster(ModelConfig config, WindowSpec spec) : config_(std::move(config)), frame_(spec) {
  spec.validate();
  config_.lstm.input_size = spec.n;
  config_.lstm.output_size = spec.target_cols();
  config_.validate();
}

std::vector<double> Forecaster::fit(const WindowedDataset &train) {
  const auto &s = spec();
  if (static_cast<std::size_t>(train.X.cols()) != s.feature_cols() ||
      static_cast<std::size_t>(train.Y.cols()) != s.target_cols())
    throw DimensionMismatch("forecaster: training data does not match the window spec");
  const Matrix features = frame_.features(train.X);
  const Matrix targets = frame_.targets(train.X, train.Y);
  std::vector<double> history;
  if (config_.type == ModelType::Forest) {
    RandomForest forest(config_.forest);
    forest.fit(features, targets);
    forest_ = std::move(forest);
    lstm_.reset();
  } else {
    if (train.windows() == 0) throw ValidationError("forecaster: empty training set");
    x_scale_ = Standardizer::fit(features);
    y_scale_ = Standardizer::fit(targets);
    StackedLstm net(config_.lstm);
    history = net.fit(x_scale_.apply(features), y_scale_.apply(targets));
    lstm_ = std::move(net);
    forest_.reset();
  }
  fitted_ = true;
  return history;
}

Matrix Forecaster::predict(const Matrix &X) const {
  if (!fitted_) throw NotFitted("forecaster: predict called before fit");
  if (static_cast<std::size_t>(X.cols()) != spec().feature_cols())
    throw DimensionMismatch("forecaster: expected " + std::to_string(spec().feature_cols()) +
                            " feature columns, got " + std::to_string(X.cols()));
  const Matrix features = frame_.features(X);
  Matrix frame_pred;
  if (forest_) frame_pred = forest_->predict(features);
  else frame_pred = y_scale_.invert(lstm_->predict(x_scale_.apply(features)));
  return frame_.positions(X, frame_pred);
}

void Forecaster::save(const std::filesystem::path &stem) const {
  if (!fitted_) throw NotFitted("forecaster: nothing to save");
  nlohmann::json j;
  j["format"] = kForecasterFormat;
  j["type"] = model_type_name(config_.type);
  j["window"] = spec_json(spec());
  j["frame"] = "constant_velocity";
  j["model"] = config_.to_json();
  if (lstm_) {
    j["x_scale"] = x_scale_.to_json();
    j["y_scale"] = y_scale_.to_json();
    lstm_->save(sibling(stem, "_lstm"));
  } else {
    forest_->save(sibling(stem, "_forest.json"));
  }
  csv::write_text(with_suffix(stem, ".json"), j.dump(2) + "\n");
}

Forecaster Forecaster::load(const std::filesystem::path &stem) {
  const auto path = with_suffix(stem, ".json");
  const auto j = nlohmann::json::parse(csv::read_text(path));
  if (j.value("format", std::string{}) != kForecasterFormat)
    throw ValidationError("forecaster: unsupported format tag in " + path.string());
  WindowSpec spec;
  const auto &w = j.at("window");
  spec.t1 = w.at("t1").get<std::size_t>();
  spec.t2 = w.at("t2").get<std::size_t>();
  spec.n = w.at("n").get<std::size_t>();
  Forecaster f(ModelConfig::from_json(j.at("model")), spec);
  if (f.config_.type == ModelType::Lstm) {
    f.x_scale_ = Standardizer::from_json(j.at("x_scale"));
    f.y_scale_ = Standardizer::from_json(j.at("y_scale"));
    f.lstm_ = StackedLstm::load(sibling(stem, "_lstm"));
  } else {
    f.forest_ = RandomForest::load(sibling(stem, "_forest.json"));
    if (f.forest_->n_features() != spec.feature_cols() || f.forest_->n_outputs() != spec.target_cols())
      throw DimensionMismatch("forecaster: stored forest does not match the window spec");
  }
  f.fitted_ = true;
  return f;
}

}  // namespace cavwatch
