#include "cavwatch/lstm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cavwatch/csv.hpp"
#include "cavwatch/errors.hpp"
#include "cavwatch/rng.hpp"
#include "cavwatch/trajectory_io.hpp"

namespace cavwatch {

namespace {

constexpr Eigen::Index kPredictChunk = 256;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ColMatrix activate(const ColMatrix &x, Activation act) {
  if (act == Activation::Relu) return x.cwiseMax(0.0);
  return x.array().tanh().matrix();
}

/// Derivative of the activation expressed through its output y = act(x).
ColMatrix activation_slope(const ColMatrix &y, Activation act) {
  if (act == Activation::Relu) return (y.array() > 0.0).cast<double>().matrix();
  return (1.0 - y.array().square()).matrix();
}

std::string activation_name(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation activation_from(const std::string &s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ValidationError("lstm: unknown activation '" + s + "'");
}

LstmWeights layout(const LstmConfig &c) {
  LstmWeights w;
  const auto H = static_cast<Eigen::Index>(c.hidden_size);
  Eigen::Index offset = 0;
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    w.tensors.push_back({std::move(name), rows, cols, offset});
    offset += rows * cols;
  };
  for (std::size_t l = 0; l < c.layers; ++l) {
    const auto in = static_cast<Eigen::Index>(l == 0 ? c.input_size : c.hidden_size);
    add("layer" + std::to_string(l) + ".W", 4 * H, in + H);
    add("layer" + std::to_string(l) + ".b", 4 * H, 1);
  }
  add("dense.W", static_cast<Eigen::Index>(c.output_size), H);
  add("dense.b", static_cast<Eigen::Index>(c.output_size), 1);
  w.params = Vector::Zero(offset);
  w.moments = AdamMoments(offset);
  return w;
}

/// Time step t of every row in X as an (input_size x rows) block.
ColMatrix step_inputs(const Matrix &X, Eigen::Index t, Eigen::Index n) {
  return X.middleCols(t * n, n).transpose();
}

}  // namespace

void LstmConfig::validate() const {
  if (layers != 3) throw ValidationError("lstm: layers must be 3");
  if (hidden_size == 0) throw ValidationError("lstm: hidden_size must be positive");
  if (input_size == 0 || output_size == 0) throw ValidationError("lstm: input and output sizes must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("lstm: learning_rate must be positive");
  if (batch_size == 0) throw ValidationError("lstm: batch_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("lstm: Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("lstm: epsilon must be positive");
}

nlohmann::json LstmConfig::to_json() const {
  return {{"layers", layers},
          {"hidden_size", hidden_size},
          {"input_size", input_size},
          {"output_size", output_size},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"seed", seed},
          {"activation", activation_name(activation)}};
}

LstmConfig LstmConfig::from_json(const nlohmann::json &j) {
  LstmConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto &k = it.key();
    if (k == "layers") c.layers = it->get<std::size_t>();
    else if (k == "hidden_size") c.hidden_size = it->get<std::size_t>();
    else if (k == "input_size") c.input_size = it->get<std::size_t>();
    else if (k == "output_size") c.output_size = it->get<std::size_t>();
    else if (k == "learning_rate") c.learning_rate = it->get<double>();
    else if (k == "batch_size") c.batch_size = it->get<std::size_t>();
    else if (k == "epochs") c.epochs = it->get<std::size_t>();
    else if (k == "beta1") c.beta1 = it->get<double>();
    else if (k == "beta2") c.beta2 = it->get<double>();
    else if (k == "epsilon") c.epsilon = it->get<double>();
    else if (k == "seed") c.seed = it->get<std::uint64_t>();
    else if (k == "activation") c.activation = activation_from(it->get<std::string>());
    else throw ValidationError("lstm: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

CellOutput lstm_cell_forward(const ColMatrix &x, const ColMatrix &h_prev, const ColMatrix &c_prev,
                             const LstmLayerView &layer, Activation act) {
  const Eigen::Index H = h_prev.rows();
  const Eigen::Index in = x.rows();
  if (layer.W.rows() != 4 * H || layer.W.cols() != in + H || layer.b.size() != 4 * H ||
      c_prev.rows() != H || x.cols() != h_prev.cols() || x.cols() != c_prev.cols())
    throw DimensionMismatch("lstm: cell input shapes do not match the layer weights");
  ColMatrix pre = layer.W.leftCols(in) * x + layer.W.rightCols(H) * h_prev;
  pre.colwise() += layer.b;
  const ColMatrix i = pre.topRows(H).unaryExpr(&sigmoid);
  const ColMatrix f = pre.middleRows(H, H).unaryExpr(&sigmoid);
  const ColMatrix g = activate(pre.middleRows(2 * H, H), act);
  const ColMatrix o = pre.bottomRows(H).unaryExpr(&sigmoid);
  CellOutput out;
  out.c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  out.h = o.cwiseProduct(activate(out.c, act));
  return out;
}

const TensorInfo &LstmWeights::tensor(const std::string &name) const {
  for (const auto &t : tensors)
    if (t.name == name) return t;
  throw ValidationError("lstm: no tensor named '" + name + "'");
}

StackedLstm::StackedLstm(LstmConfig config) : config_(config) {
  config_.validate();
  weights_ = layout(config_);
  Engine rng(derive_seed(config_.seed, "lstm.init"));
  const auto H = static_cast<Eigen::Index>(config_.hidden_size);
  for (const auto &t : weights_.tensors) {
    auto block = weights_.params.segment(t.offset, t.size());
    const bool bias = t.cols == 1;
    if (bias) {
      // Forget-gate slice of each LSTM bias starts at 1.
      if (t.name != "dense.b") block.segment(H, H).setOnes();
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols));
    for (Eigen::Index k = 0; k < block.size(); ++k) block[k] = bound * (2.0 * uniform01(rng) - 1.0);
  }
}

LstmLayerView StackedLstm::layer(std::size_t l) const {
  const auto &W = weights_.tensors.at(2 * l);
  const auto &b = weights_.tensors.at(2 * l + 1);
  return {Eigen::Map<const ColMatrix>(weights_.params.data() + W.offset, W.rows, W.cols),
          Eigen::Map<const Vector>(weights_.params.data() + b.offset, b.rows)};
}

std::size_t StackedLstm::steps_of(const Matrix &X) const {
  const auto n = config_.input_size;
  if (weights_.params.size() == 0) throw NotFitted("lstm: model has no weights");
  if (X.cols() == 0 || static_cast<std::size_t>(X.cols()) % n != 0)
    throw DimensionMismatch("lstm: input width " + std::to_string(X.cols()) +
                            " is not a multiple of input_size " + std::to_string(n));
  return static_cast<std::size_t>(X.cols()) / n;
}

struct StackedLstm::Trace {
  // Indexed [layer][step]; each entry is one column per sample.
  std::vector<std::vector<ColMatrix>> z, i, f, g, o, c, a;
  ColMatrix top;   ///< final top-layer hidden state
  ColMatrix yhat;  ///< outputs x rows
};

StackedLstm::Trace StackedLstm::forward(const Matrix &X) const {
  const std::size_t T = steps_of(X);
  const std::size_t L = config_.layers;
  const Eigen::Index H = static_cast<Eigen::Index>(config_.hidden_size);
  const Eigen::Index B = X.rows();
  const Eigen::Index n = static_cast<Eigen::Index>(config_.input_size);
  Trace tr;
  for (auto *v : {&tr.z, &tr.i, &tr.f, &tr.g, &tr.o, &tr.c, &tr.a}) v->assign(L, std::vector<ColMatrix>(T));

  std::vector<ColMatrix> below(T);
  for (std::size_t t = 0; t < T; ++t) below[t] = step_inputs(X, static_cast<Eigen::Index>(t), n);

  for (std::size_t l = 0; l < L; ++l) {
    const auto view = layer(l);
    const Eigen::Index in = view.W.cols() - H;
    ColMatrix h = ColMatrix::Zero(H, B);
    ColMatrix c = ColMatrix::Zero(H, B);
    for (std::size_t t = 0; t < T; ++t) {
      ColMatrix z(in + H, B);
      z.topRows(in) = below[t];
      z.bottomRows(H) = h;
      ColMatrix pre = view.W * z;
      pre.colwise() += view.b;
      tr.i[l][t] = pre.topRows(H).unaryExpr(&sigmoid);
      tr.f[l][t] = pre.middleRows(H, H).unaryExpr(&sigmoid);
      tr.g[l][t] = activate(pre.middleRows(2 * H, H), config_.activation);
      tr.o[l][t] = pre.bottomRows(H).unaryExpr(&sigmoid);
      c = tr.f[l][t].cwiseProduct(c) + tr.i[l][t].cwiseProduct(tr.g[l][t]);
      tr.a[l][t] = activate(c, config_.activation);
      h = tr.o[l][t].cwiseProduct(tr.a[l][t]);
      tr.c[l][t] = c;
      tr.z[l][t] = std::move(z);
      below[t] = h;
    }
  }
  tr.top = below[T - 1];
  const auto &Wd = weights_.tensors[2 * L];
  const auto &bd = weights_.tensors[2 * L + 1];
  tr.yhat = Eigen::Map<const ColMatrix>(weights_.params.data() + Wd.offset, Wd.rows, Wd.cols) * tr.top;
  tr.yhat.colwise() += Eigen::Map<const Vector>(weights_.params.data() + bd.offset, bd.rows);
  return tr;
}

Matrix StackedLstm::predict(const Matrix &X) const {
  steps_of(X);
  const Eigen::Index O = static_cast<Eigen::Index>(config_.output_size);
  Matrix out(X.rows(), O);
  const auto L = config_.layers;
  const auto &Wd = weights_.tensors[2 * L];
  const auto &bd = weights_.tensors[2 * L + 1];
  const Eigen::Map<const ColMatrix> dense(weights_.params.data() + Wd.offset, Wd.rows, Wd.cols);
  const Eigen::Map<const Vector> dense_b(weights_.params.data() + bd.offset, bd.rows);
  const Eigen::Index n = static_cast<Eigen::Index>(config_.input_size);
  const Eigen::Index H = static_cast<Eigen::Index>(config_.hidden_size);
  const Eigen::Index T = X.cols() / n;
  for (Eigen::Index r0 = 0; r0 < X.rows(); r0 += kPredictChunk) {
    const Eigen::Index B = std::min(kPredictChunk, X.rows() - r0);
    const Matrix chunk = X.middleRows(r0, B);
    std::vector<ColMatrix> below(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) below[static_cast<std::size_t>(t)] = step_inputs(chunk, t, n);
    for (std::size_t l = 0; l < L; ++l) {
      const auto view = layer(l);
      CellOutput state{ColMatrix::Zero(H, B), ColMatrix::Zero(H, B)};
      for (auto &x : below) {
        state = lstm_cell_forward(x, state.h, state.c, view, config_.activation);
        x = state.h;
      }
    }
    ColMatrix y = dense * below.back();
    y.colwise() += dense_b;
    out.middleRows(r0, B) = y.transpose();
  }
  return out;
}

double StackedLstm::loss(const Matrix &X, const Matrix &Y) const {
  if (X.rows() != Y.rows() || static_cast<std::size_t>(Y.cols()) != config_.output_size)
    throw DimensionMismatch("lstm: target shape does not match");
  if (Y.size() == 0) throw ValidationError("lstm: empty training set");
  return (predict(X) - Y).squaredNorm() / static_cast<double>(Y.size());
}

Vector StackedLstm::gradient(const Matrix &X, const Matrix &Y, double *loss_out) const {
  if (X.rows() != Y.rows() || static_cast<std::size_t>(Y.cols()) != config_.output_size)
    throw DimensionMismatch("lstm: target shape does not match");
  if (Y.size() == 0) throw ValidationError("lstm: empty training set");
  const Trace tr = forward(X);
  const std::size_t L = config_.layers;
  const std::size_t T = tr.z.front().size();
  const Eigen::Index H = static_cast<Eigen::Index>(config_.hidden_size);
  const Eigen::Index B = X.rows();
  const Activation act = config_.activation;

  const ColMatrix err = tr.yhat - ColMatrix(Y.transpose());
  if (loss_out) *loss_out = err.squaredNorm() / static_cast<double>(Y.size());
  const ColMatrix dy = err * (2.0 / static_cast<double>(Y.size()));

  Vector grad = Vector::Zero(weights_.params.size());
  auto gmap = [&](const TensorInfo &t) { return Eigen::Map<ColMatrix>(grad.data() + t.offset, t.rows, t.cols); };
  const auto &Wd = weights_.tensors[2 * L];
  gmap(Wd) = dy * tr.top.transpose();
  gmap(weights_.tensors[2 * L + 1]) = dy.rowwise().sum();

  // Gradient arriving at each step's hidden output from the layer above.
  std::vector<ColMatrix> from_above(T, ColMatrix::Zero(H, B));
  from_above[T - 1] = Eigen::Map<const ColMatrix>(weights_.params.data() + Wd.offset, Wd.rows, Wd.cols).transpose() * dy;

  for (std::size_t l = L; l-- > 0;) {
    const auto view = layer(l);
    const Eigen::Index in = view.W.cols() - H;
    auto dW = gmap(weights_.tensors[2 * l]);
    auto db = gmap(weights_.tensors[2 * l + 1]);
    ColMatrix dh_next = ColMatrix::Zero(H, B);
    ColMatrix dc_next = ColMatrix::Zero(H, B);
    std::vector<ColMatrix> to_below(T);
    ColMatrix dpre(4 * H, B);
    for (std::size_t t = T; t-- > 0;) {
      const ColMatrix dh = from_above[t] + dh_next;
      const ColMatrix &i = tr.i[l][t], &f = tr.f[l][t], &g = tr.g[l][t], &o = tr.o[l][t];
      const ColMatrix &a = tr.a[l][t];
      const ColMatrix dc = dc_next + dh.cwiseProduct(o).cwiseProduct(activation_slope(a, act));
      const ColMatrix c_prev = t > 0 ? tr.c[l][t - 1] : ColMatrix::Zero(H, B);
      dpre.topRows(H) = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
      dpre.middleRows(H, H) = dc.cwiseProduct(c_prev).cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
      dpre.middleRows(2 * H, H) = dc.cwiseProduct(i).cwiseProduct(activation_slope(g, act));
      dpre.bottomRows(H) = dh.cwiseProduct(a).cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));
      dW.noalias() += dpre * tr.z[l][t].transpose();
      db += dpre.rowwise().sum();
      const ColMatrix dz = view.W.transpose() * dpre;
      to_below[t] = dz.topRows(in);
      dh_next = dz.bottomRows(H);
      dc_next = dc.cwiseProduct(f);
    }
    from_above = std::move(to_below);
  }
  return grad;
}

std::vector<double> StackedLstm::fit(const Matrix &X, const Matrix &Y) {
  if (X.rows() != Y.rows()) throw DimensionMismatch("lstm: X and Y row counts differ");
  if (X.rows() == 0) throw ValidationError("lstm: empty training set");
  steps_of(X);
  const auto W = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> order(W);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Engine rng(derive_seed(config_.seed, "lstm.shuffle"));
  const AdamHyper hyper = config_.adam();
  std::vector<double> history;
  history.reserve(config_.epochs);
  Matrix xb, yb;
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    for (std::size_t k = W; k > 1; --k) std::swap(order[k - 1], order[uniform_index(rng, k)]);
    double total = 0.0;
    for (std::size_t s = 0; s < W; s += config_.batch_size) {
      const std::size_t B = std::min(config_.batch_size, W - s);
      xb.resize(static_cast<Eigen::Index>(B), X.cols());
      yb.resize(static_cast<Eigen::Index>(B), Y.cols());
      for (std::size_t r = 0; r < B; ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(order[s + r]));
        yb.row(static_cast<Eigen::Index>(r)) = Y.row(static_cast<Eigen::Index>(order[s + r]));
      }
      double batch_loss = 0.0;
      const Vector g = gradient(xb, yb, &batch_loss);
      if (!std::isfinite(batch_loss) || !g.allFinite()) throw DivergedLoss(epoch);
      total += batch_loss * static_cast<double>(B);
      adam_step({weights_.params.data(), static_cast<std::size_t>(weights_.params.size())},
                {g.data(), static_cast<std::size_t>(g.size())}, weights_.moments, hyper, ++weights_.adam_steps);
    }
    if (!weights_.params.allFinite()) throw DivergedLoss(epoch);
    history.push_back(total / static_cast<double>(W));
  }
  return history;
}

void StackedLstm::save(const std::filesystem::path &stem) const {
  static_assert(std::endian::native == std::endian::little, "binary weight format is little-endian");
  nlohmann::json manifest;
  manifest["format"] = kLstmFormat;
  manifest["config"] = config_.to_json();
  manifest["param_count"] = weights_.params.size();
  manifest["adam_steps"] = weights_.adam_steps;
  manifest["blocks"] = {"params", "adam_first", "adam_second"};
  auto &tensors = manifest["tensors"] = nlohmann::json::array();
  for (const auto &t : weights_.tensors)
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"offset", t.offset}});
  csv::write_text(with_suffix(stem, ".json"), manifest.dump(2) + "\n");

  const auto bin = with_suffix(stem, ".bin");
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw IoError("cannot open " + bin.string() + " for writing");
  for (const Vector *v : {&weights_.params, &weights_.moments.first, &weights_.moments.second})
    out.write(reinterpret_cast<const char *>(v->data()), static_cast<std::streamsize>(v->size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + bin.string());
}

StackedLstm StackedLstm::load(const std::filesystem::path &stem) {
  const auto manifest = nlohmann::json::parse(csv::read_text(with_suffix(stem, ".json")));
  if (manifest.value("format", std::string{}) != kLstmFormat)
    throw ValidationError("lstm: unsupported format tag in " + with_suffix(stem, ".json").string());
  StackedLstm m(LstmConfig::from_json(manifest.at("config")));
  const auto count = manifest.at("param_count").get<Eigen::Index>();
  if (count != m.weights_.params.size())
    throw DimensionMismatch("lstm: manifest parameter count does not match config");
  const auto &tensors = manifest.at("tensors");
  if (tensors.size() != m.weights_.tensors.size()) throw DimensionMismatch("lstm: tensor table size mismatch");
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto &t = m.weights_.tensors[k];
    const auto &j = tensors[k];
    if (j.at("name").get<std::string>() != t.name || j.at("rows").get<Eigen::Index>() != t.rows ||
        j.at("cols").get<Eigen::Index>() != t.cols || j.at("offset").get<Eigen::Index>() != t.offset)
      throw DimensionMismatch("lstm: tensor '" + t.name + "' does not match config");
  }
  m.weights_.adam_steps = manifest.at("adam_steps").get<std::size_t>();

  const auto bin = with_suffix(stem, ".bin");
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw IoError("cannot open " + bin.string());
  const auto expected = static_cast<std::uintmax_t>(3 * count) * sizeof(double);
  if (std::filesystem::file_size(bin) != expected)
    throw DimensionMismatch("lstm: " + bin.string() + " has the wrong size");
  for (Vector *v : {&m.weights_.params, &m.weights_.moments.first, &m.weights_.moments.second})
    in.read(reinterpret_cast<char *>(v->data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw IoError("failed reading " + bin.string());
  return m;
}

}  // namespace cavwatch
