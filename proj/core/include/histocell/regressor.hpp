#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "histocell/dataset.hpp"
#include "histocell/objective.hpp"

namespace histocell {

/// Number of SiLU hidden layers; the network has kHiddenLayers + 1 affine layers.
inline constexpr std::size_t kHiddenLayers = 7;

/// Per-column affine map to zero mean and unit variance. Zero-variance
/// columns keep std = 1.
struct Standardizer {
  Eigen::RowVectorXd means;
  Eigen::RowVectorXd stds;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(means.size()); }
};

Standardizer fit_standardizer(const Matrix& x);
Matrix transform(const Standardizer& s, const Matrix& x);

struct TrainConfig {
  LossWeights loss;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 256;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  std::size_t hidden_width = 512;
};

/// Throws ConfigError when a field is out of range.
void validate(const TrainConfig& cfg);

/// One affine layer: out = in * weight^T + bias^T. `weight` is out x in.
struct Layer {
  Matrix weight;
  Eigen::VectorXd bias;
};

struct MlpModel {
  std::vector<std::size_t> layer_dims;  // D, h1..h7, C
  std::vector<Layer> layers;            // layer_dims.size() - 1 entries
  Standardizer standardizer;
  std::uint64_t seed = 0;
  std::vector<std::string> cell_types;  // output column names

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t parameter_count() const;
};

/// Seeded Glorot-uniform weights, zero biases, identity standardizer.
/// `layer_dims` must hold kHiddenLayers + 2 positive entries.
MlpModel init_model(const std::vector<std::size_t>& layer_dims, std::uint64_t seed);

double silu(double z);

/// Network output for already-standardized inputs (rows are samples).
/// Throws Error naming the layer when an activation becomes non-finite.
Matrix forward(const MlpModel& model, const Matrix& x);

/// Gradient of the composite loss w.r.t. every layer parameter, with the
/// same shapes as `model.layers`.
struct Gradients {
  std::vector<Layer> layers;
};

/// Runs forward and backward on one batch of standardized inputs.
LossBreakdown loss_and_gradients(const MlpModel& model, const Matrix& x, const Matrix& y, const LossWeights& weights,
                                 Gradients& grads);

struct TrainResult {
  MlpModel model;
  std::vector<double> history;  // mean training loss per epoch
};

/// Trains on every spot of `spots`.
TrainResult train(const SpotTable& spots, const AbundanceMatrix& abundances, const TrainConfig& cfg);

/// Trains on the split's training spots. The standardizer is fit on those
/// spots only.
TrainResult train(const SpotTable& spots, const AbundanceMatrix& abundances, const SampleSplit& split,
                  const TrainConfig& cfg);

/// Standardizes, runs the network, and optionally clamps outputs at zero.
AbundanceMatrix predict(const MlpModel& model, const SpotTable& spots, bool clamp_nonnegative = false);

/// Checkpoint text format (first line `histocell-mlp v1`).
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace histocell
