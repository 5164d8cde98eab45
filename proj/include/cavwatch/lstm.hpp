#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavwatch/adam.hpp"
#include "cavwatch/matrix.hpp"

namespace cavwatch {

/// Candidate and cell-output nonlinearity. Gates are always logistic.
enum class Activation { Relu, Tanh };

struct LstmConfig {
  std::size_t layers = 3;
  std::size_t hidden_size = 64;
  std::size_t input_size = 10;   ///< features per time step
  std::size_t output_size = 50;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  Activation activation = Activation::Relu;

  void validate() const;
  AdamHyper adam() const { return {learning_rate, beta1, beta2, epsilon}; }

  nlohmann::json to_json() const;
  static LstmConfig from_json(const nlohmann::json &j);
};

using ColMatrix = Eigen::MatrixXd;

/// Borrowed weights of one LSTM layer. Rows of W and b are stacked as
/// input, forget, candidate, output gates; columns of W are [x ; h_prev].
struct LstmLayerView {
  Eigen::Map<const ColMatrix> W;
  Eigen::Map<const Vector> b;
};

struct CellOutput {
  ColMatrix h;
  ColMatrix c;
};

/// Single time step for a batch (one column per sample).
///   i, f, o = sigmoid(.), g = act(.), c = f*c_prev + i*g, h = o*act(c)
CellOutput lstm_cell_forward(const ColMatrix &x, const ColMatrix &h_prev, const ColMatrix &c_prev,
                             const LstmLayerView &layer, Activation act);

/// Named slice of the flat parameter vector.
struct TensorInfo {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;
  Eigen::Index size() const { return rows * cols; }
};

/// Parameters of the stacked network plus the Adam state that trains them.
///
/// All tensors live in one flat vector (column-major per tensor), so the
/// optimizer, the gradient and the on-disk format share one layout.
struct LstmWeights {
  std::vector<TensorInfo> tensors;
  Vector params;
  AdamMoments moments;
  std::size_t adam_steps = 0;

  const TensorInfo &tensor(const std::string &name) const;
};

/// Stacked LSTM regressor: `layers` LSTM layers, then a dense map from the
/// last top-layer hidden state to `output_size` values.
///
/// Inputs are W x (T * input_size) matrices, time-major per row, i.e. the
/// layout WindowedDataset::X already uses.
class StackedLstm {
public:
  StackedLstm() = default;
  /// Initialises weights uniform in +-1/sqrt(fan_in) with forget-gate bias 1.
  explicit StackedLstm(LstmConfig config);

  /// Mini-batch Adam on MSE. Returns the per-epoch mean training loss.
  /// Throws DivergedLoss on a non-finite loss.
  std::vector<double> fit(const Matrix &X, const Matrix &Y);
  Matrix predict(const Matrix &X) const;

  /// Mean squared error over all elements.
  double loss(const Matrix &X, const Matrix &Y) const;
  /// Gradient of loss() with respect to params, by backpropagation through time.
  Vector gradient(const Matrix &X, const Matrix &Y, double *loss_out = nullptr) const;

  const LstmConfig &config() const { return config_; }
  const LstmWeights &weights() const { return weights_; }
  LstmWeights &weights() { return weights_; }
  LstmLayerView layer(std::size_t l) const;

  /// Writes `<stem>.json` (format tag, config, tensor shapes) and `<stem>.bin`
  /// (little-endian float64: params, Adam first moments, Adam second moments).
  void save(const std::filesystem::path &stem) const;
  static StackedLstm load(const std::filesystem::path &stem);

private:
  struct Trace;
  Trace forward(const Matrix &X) const;
  std::size_t steps_of(const Matrix &X) const;

  LstmConfig config_;
  LstmWeights weights_;
};

inline constexpr const char *kLstmFormat = "cavwatch.lstm.v1";

}  // namespace cavwatch
