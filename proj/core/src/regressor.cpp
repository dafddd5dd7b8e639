#include "histocell/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "histocell/errors.hpp"

namespace histocell {
namespace {

// Cached pre-activations (z) and activations (a) of one forward pass.
// acts[0] is the input; pres[k] belongs to layer k.
struct ForwardCache {
  std::vector<Matrix> pres;
  std::vector<Matrix> acts;
};

Matrix affine(const Layer& layer, const Matrix& in) {
  Matrix out = in * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
  return out;
}

double sigmoid(double z) {
  // Split on sign so exp never overflows.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double silu_derivative(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

Matrix run_forward(const MlpModel& model, const Matrix& x, ForwardCache* cache) {
  if (static_cast<std::size_t>(x.cols()) != model.input_dim())
    throw Error("forward: input has " + std::to_string(x.cols()) + " columns, model expects " +
                std::to_string(model.input_dim()));
  Matrix a = x;
  if (cache) {
    cache->pres.clear();
    cache->acts.clear();
    cache->acts.push_back(x);
  }
  const std::size_t last = model.layers.size() - 1;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    Matrix z = affine(model.layers[k], a);
    if (!z.allFinite()) throw Error("forward: non-finite value at layer " + std::to_string(k + 1));
    if (k == last) return z;
    a = z.unaryExpr([](double v) { return silu(v); });
    if (cache) {
      cache->pres.push_back(std::move(z));
      cache->acts.push_back(a);
    }
  }
  return a;
}

struct AdamState {
  std::vector<Layer> m;
  std::vector<Layer> v;
  std::uint64_t step = 0;
};

std::vector<Layer> zeros_like(const std::vector<Layer>& layers) {
  std::vector<Layer> out;
  for (const auto& l : layers)
    out.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  return out;
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double step_size = cfg.learning_rate / c1;
  const double sqrt_c2 = std::sqrt(c2);
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    // theta -= lr * m_hat / (sqrt(v_hat) + eps)
    param.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_c2 + cfg.adam_epsilon);
  };
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    update(model.layers[k].weight, grads.layers[k].weight, state.m[k].weight, state.v[k].weight);
    update(model.layers[k].bias, grads.layers[k].bias, state.m[k].bias, state.v[k].bias);
  }
}

// Batch boundaries over `n` shuffled rows; a trailing batch of one row is
// merged into its predecessor so every batch has a defined correlation.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t start = 0; start < n; start += batch_size) ranges.emplace_back(start, std::min(n, start + batch_size));
  if (ranges.size() > 1 && ranges.back().second - ranges.back().first < 2) {
    ranges[ranges.size() - 2].second = ranges.back().second;
    ranges.pop_back();
  }
  return ranges;
}

TrainResult train_rows(const SpotTable& spots, const AbundanceMatrix& abundances, std::span<const std::size_t> rows,
                       const TrainConfig& cfg) {
  validate(cfg);
  if (abundances.spot_ids != spots.spot_ids) throw Error("train: abundances are not aligned with spots");
  if (rows.size() < 2) throw TrainingError("train: need at least 2 training spots, got " + std::to_string(rows.size()));

  Matrix x(static_cast<Eigen::Index>(rows.size()), spots.embeddings.cols());
  Matrix y(static_cast<Eigen::Index>(rows.size()), abundances.values.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = spots.embeddings.row(static_cast<Eigen::Index>(rows[k]));
    y.row(static_cast<Eigen::Index>(k)) = abundances.values.row(static_cast<Eigen::Index>(rows[k]));
  }

  std::vector<std::size_t> dims{spots.dim()};
  dims.insert(dims.end(), kHiddenLayers, cfg.hidden_width);
  dims.push_back(abundances.cell_types.size());

  TrainResult result;
  auto& model = result.model;
  model = init_model(dims, cfg.seed);
  model.cell_types = abundances.cell_types;
  model.standardizer = fit_standardizer(x);
  x = transform(model.standardizer, x);

  // Shuffling draws from its own stream so that changing the epoch count
  // never perturbs initialization.
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(rows.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto ranges = batch_ranges(rows.size(), cfg.batch_size);

  AdamState adam{zeros_like(model.layers), zeros_like(model.layers), 0};
  Gradients grads;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double weighted_loss = 0.0;
    for (std::size_t b = 0; b < ranges.size(); ++b) {
      const auto [begin, end] = ranges[b];
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      const Matrix xb = x(idx, Eigen::all);
      const Matrix yb = y(idx, Eigen::all);
      LossBreakdown loss;
      try {
        loss = loss_and_gradients(model, xb, yb, cfg.loss, grads);
      } catch (const Error& e) {
        throw TrainingError("train: epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.what());
      }
      if (!std::isfinite(loss.total))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(b));
      weighted_loss += loss.total * static_cast<double>(end - begin);
      adam_step(model, grads, adam, cfg);
    }
    result.history.push_back(weighted_loss / static_cast<double>(rows.size()));
    spdlog::debug("epoch {} loss {:.6f}", epoch, result.history.back());
  }
  return result;
}

}  // namespace

Standardizer fit_standardizer(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) throw Error("fit_standardizer: empty input");
  Standardizer s;
  s.means = x.colwise().mean();
  const Matrix centered = x.rowwise() - s.means;
  s.stds = (centered.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt();
  for (Eigen::Index c = 0; c < s.stds.size(); ++c)
    if (!(s.stds(c) > 0.0)) s.stds(c) = 1.0;
  return s;
}

Matrix transform(const Standardizer& s, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != s.dim())
    throw Error("transform: input has " + std::to_string(x.cols()) + " columns, standardizer has " +
                std::to_string(s.dim()));
  return (x.rowwise() - s.means).array().rowwise() / s.stds.array();
}

void validate(const TrainConfig& cfg) {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (!(cfg.loss.lambda1 >= 0.0) || !(cfg.loss.lambda2 >= 0.0)) fail("lambda1 and lambda2 must be >= 0");
  if (!(cfg.loss.epsilon > 0.0)) fail("epsilon must be > 0");
  if (!(cfg.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) fail("betas must be in [0,1)");
  if (!(cfg.adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
  if (cfg.batch_size < 2) fail("batch_size must be >= 2");
  if (cfg.hidden_width < 1) fail("hidden_width must be >= 1");
}

std::size_t MlpModel::parameter_count() const {
  std::size_t count = 0;
  for (const auto& l : layers) count += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return count;
}

MlpModel init_model(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() != kHiddenLayers + 2)
    throw Error("init_model: expected " + std::to_string(kHiddenLayers + 2) + " layer dims, got " +
                std::to_string(layer_dims.size()));
  if (std::any_of(layer_dims.begin(), layer_dims.end(), [](std::size_t d) { return d == 0; }))
    throw Error("init_model: layer dims must be positive");
  MlpModel model;
  model.layer_dims = layer_dims;
  model.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const auto fan_in = static_cast<Eigen::Index>(layer_dims[k]);
    const auto fan_out = static_cast<Eigen::Index>(layer_dims[k + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer{Matrix(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
    model.layers.push_back(std::move(layer));
  }
  model.standardizer.means = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(layer_dims.front()));
  model.standardizer.stds = Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(layer_dims.front()));
  for (std::size_t c = 0; c < layer_dims.back(); ++c) model.cell_types.push_back("type" + std::to_string(c));
  return model;
}

double silu(double z) { return z * sigmoid(z); }

Matrix forward(const MlpModel& model, const Matrix& x) { return run_forward(model, x, nullptr); }

LossBreakdown loss_and_gradients(const MlpModel& model, const Matrix& x, const Matrix& y, const LossWeights& weights,
                                 Gradients& grads) {
  ForwardCache cache;
  const Matrix out = run_forward(model, x, &cache);
  LossBreakdown loss = composite_loss(out, y, weights);

  const std::size_t n_layers = model.layers.size();
  grads.layers.resize(n_layers);
  Matrix delta = loss.grad;  // d loss / d z_k, starting at the linear head
  for (std::size_t k = n_layers; k-- > 0;) {
    grads.layers[k].weight = delta.transpose() * cache.acts[k];
    grads.layers[k].bias = delta.colwise().sum().transpose();
    if (k == 0) break;
    delta = (delta * model.layers[k].weight).cwiseProduct(cache.pres[k - 1].unaryExpr(&silu_derivative));
  }
  return loss;
}

TrainResult train(const SpotTable& spots, const AbundanceMatrix& abundances, const TrainConfig& cfg) {
  std::vector<std::size_t> rows(spots.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return train_rows(spots, abundances, rows, cfg);
}

TrainResult train(const SpotTable& spots, const AbundanceMatrix& abundances, const SampleSplit& split,
                  const TrainConfig& cfg) {
  if (split.train_spot_ids.empty()) throw TrainingError("train: split '" + split.name + "' has no training spots");
  const auto rows = index_rows(spots.spot_ids, split.train_spot_ids);
  return train_rows(spots, abundances, rows, cfg);
}

AbundanceMatrix predict(const MlpModel& model, const SpotTable& spots, bool clamp_nonnegative) {
  if (spots.dim() != model.input_dim())
    throw Error("predict: embeddings have dimension " + std::to_string(spots.dim()) + ", model expects " +
                std::to_string(model.input_dim()));
  AbundanceMatrix out;
  out.spot_ids = spots.spot_ids;
  out.cell_types = model.cell_types;
  out.values = forward(model, transform(model.standardizer, spots.embeddings));
  if (clamp_nonnegative) out.values = out.values.cwiseMax(0.0);
  return out;
}

}  // namespace histocell
