#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bpad/encoding.hpp"
#include "bpad/threshold.hpp"
#include "bpad/util.hpp"

namespace bpad {

enum class Activation { Linear, Relu };

struct Layer {
  /// out x in
  Matrix weights;
  Vector bias;
  Activation activation = Activation::Linear;
};

/// Fully connected network: linear output, rectifier hidden layers.
struct Network {
  std::vector<Layer> layers;

  /// Zero weights for layer sizes [d, h1, ..., hk, d].
  static Network zeros(const std::vector<std::size_t>& sizes);
  /// Glorot-uniform weights, zero biases.
  static Network glorot(const std::vector<std::size_t>& sizes, Rng& rng);

  std::vector<std::size_t> sizes() const;
  std::size_t input_width() const { return static_cast<std::size_t>(layers.front().weights.cols()); }
  std::size_t parameter_count() const;

  bool operator==(const Network& other) const;
};

enum class Mode { Train, Infer };

struct Regularization {
  double noise_sigma = 0.0;
  double dropout_rate = 0.0;
};

/// Activations kept from a forward pass for backpropagation.
struct ForwardCache {
  /// inputs[l] is the input of layer l (noised input for l = 0, dropped-out
  /// hidden activation otherwise).
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
  /// Inverted-dropout masks (0 or 1/(1-p)) per hidden layer; empty when unused.
  std::vector<Matrix> dropout_masks;
  Matrix output;
};

/// Forward pass over a batch (one row per example). Train mode adds Gaussian
/// input noise and inverted dropout after every hidden activation.
ForwardCache forward(const Network& net, const Matrix& input, Mode mode, const Regularization& reg, Rng& rng);
Matrix infer(const Network& net, const Matrix& input);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
};

/// Mean over rows of the per-row mean squared error.
double mse_loss(const Matrix& output, const Matrix& target);

/// Gradients of mse_loss(output, target) for the cached pass.
Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& target);

struct AdamParams {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

/// One Adam update with bias correction; `t` is the 1-based step count.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 std::uint64_t t, const AdamParams& p);

struct AdamState {
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;
  std::uint64_t t = 0;

  static AdamState for_network(const Network& net);
};

/// Increments state.t and applies adam_update to every parameter block.
void adam_step(Network& net, const Gradients& grads, AdamState& state, const AdamParams& p);

struct TrainConfig {
  std::size_t batch_size = 50;
  std::size_t max_epochs = 200;
  std::size_t early_stop_patience = 10;
  double lr = 0.001;
  std::size_t lr_plateau_patience = 5;
  double lr_factor = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  double dropout_rate = 0.5;
  double noise_mu = 0.0;
  double noise_sigma = 0.1;
  double hidden_size_ratio = 0.5;
  std::size_t n_hidden_layers = 2;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Hidden layer widths for an input width.
std::vector<std::size_t> hidden_sizes(std::size_t input_width, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

/// Per-trace reconstruction errors split by resolution.
struct TraceErrors {
  double trace = 0.0;
  /// Mean of the event's slot errors, real events only.
  std::vector<double> events;
  /// slots[event][slot], real events only.
  std::vector<std::vector<double>> slots;
};

std::vector<TraceErrors> reconstruction_errors(const Network& net, const EncodedBatch& batch,
                                               const EncodingLayout& layout);

/// Mean error per resolution over all traces, events and real slots.
ResolutionMeans mean_errors(const std::vector<TraceErrors>& errors);

struct TrainedNetwork {
  Network net;
  EncodingLayout layout;
  TrainConfig cfg;
  ResolutionMeans train_errors;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Trains a denoising autoencoder on the batch (input = target) with a seeded
/// holdout split, per-epoch shuffling, learning-rate decay on plateau, early
/// stopping and best-weight restore. Deterministic in (batch, cfg).
TrainedNetwork train(const EncodedBatch& batch, const EncodingLayout& layout, const TrainConfig& cfg);

inline constexpr int kArtifactVersion = 1;

std::string serialize_artifact(const TrainedNetwork& model, double alpha);
TrainedNetwork parse_artifact(std::string_view bytes, double* alpha = nullptr);
void save_artifact(const TrainedNetwork& model, double alpha, const std::filesystem::path& path);
TrainedNetwork load_artifact(const std::filesystem::path& path, double* alpha = nullptr);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace bpad
