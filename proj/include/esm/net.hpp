#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "esm/expfam.hpp"
#include "esm/rng.hpp"

namespace esm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class InitScheme { he_uniform };

struct NetworkConfig {
  // widths = (p0, h1, ..., hL, 1); at least one hidden layer.
  std::vector<int> widths;
  double learning_rate = 0.1;
  int epochs = 500;
  int batch_size = 0;  // 0: resolved to min(32, n) at training time
  double dropout_rate = 0.1;
  double weight_decay = 0.02;
  double clamp_F = 3.0;
  InitScheme init_scheme = InitScheme::he_uniform;
  uint64_t seed = 0;

  int input_dim() const { return widths.empty() ? 0 : widths.front(); }
  int hidden_layers() const { return static_cast<int>(widths.size()) - 2; }
  void validate() const;  // throws ConfigError-style ValidationError
};

// Inverted dropout masks for one batch, one matrix per hidden layer with a
// row per batch sample: every sample drops units independently. Kept entries
// carry 1/(1-rate), dropped entries 0.
struct DropoutMask {
  std::vector<Matrix> layer;
};

// A trained feed-forward ReLU network. Immutable after training; forward
// evaluation is safe from any number of threads.
struct Network {
  NetworkConfig config;
  std::vector<Matrix> weights;  // weights[l]: widths[l+1] x widths[l]
  std::vector<Vector> biases;   // biases[l]: widths[l+1]
  double final_train_loss = 0.0;

  int input_dim() const { return config.input_dim(); }

  // Eval mode: no dropout, output hard-clamped to [-F, F].
  double forward_eval(std::span<const double> x) const;

  // Train mode on a single input: applies row 0 of the supplied masks to
  // hidden activations and clamps the output (straight-through, so no
  // gradient handling here; exposed for tests and symmetry with eval).
  double forward_train(std::span<const double> x, const DropoutMask& mask) const;

  bool parameters_finite() const;
};

// He-uniform initialization: weights uniform on [-sqrt(6/fan_in),
// +sqrt(6/fan_in)], biases zero. Deterministic given the stream state.
Network init_network(const NetworkConfig& config, RngStream& rng);

// Draws fresh masks for a batch of `rows` samples: per hidden layer, row by
// row, unit by unit, one uniform draw per entry.
DropoutMask draw_dropout_mask(const NetworkConfig& config, int rows,
                              RngStream& rng);

// Minimizes the empirical GNRM risk (1/m) sum(-y f + psi(f)) by mini-batch
// SGD with L2 weight decay on the weights (not biases), inverted dropout and
// straight-through output clamping. Deterministic given (data, config, rng).
// Throws TrainingError with the epoch index if parameters go non-finite.
Network train_network(const Matrix& X, const Vector& y, const FamilySpec& spec,
                      const NetworkConfig& config, RngStream& rng);

}  // namespace esm
