#include "esm/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "esm/errors.hpp"

namespace esm {

namespace {

double clamp_output(double f, double F) { return std::clamp(f, -F, F); }

// Hidden-layer forward for a single input, shared by both modes. The mask is
// null in eval mode.
double forward_single(const Network& net, std::span<const double> x,
                      const DropoutMask* mask) {
  const auto& widths = net.config.widths;
  if (static_cast<int>(x.size()) != widths.front()) {
    throw ValidationError("input dimension " + std::to_string(x.size()) +
                          " does not match network width " +
                          std::to_string(widths.front()));
  }
  Vector h = Eigen::Map<const Vector>(x.data(), static_cast<long>(x.size()));
  const int n_layers = static_cast<int>(net.weights.size());
  for (int l = 0; l < n_layers - 1; ++l) {
    h = (net.weights[l] * h + net.biases[l]).cwiseMax(0.0);
    if (mask != nullptr) h.array() *= mask->layer[l].row(0).transpose().array();
  }
  const double raw = (net.weights[n_layers - 1] * h + net.biases[n_layers - 1])(0);
  return clamp_output(raw, net.config.clamp_F);
}

}  // namespace

void NetworkConfig::validate() const {
  if (widths.size() < 3) {
    throw ValidationError("net.widths needs at least one hidden layer (got " +
                          std::to_string(widths.size()) + " entries)");
  }
  if (widths.back() != 1) {
    throw ValidationError("net.widths must end in 1 (scalar output)");
  }
  for (int w : widths) {
    if (w < 1) throw ValidationError("net.widths entries must be positive");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("net.learning_rate must be positive");
  if (epochs < 1) throw ValidationError("net.epochs must be positive");
  if (batch_size < 0) throw ValidationError("net.batch_size must be nonnegative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("net.dropout_rate must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw ValidationError("net.weight_decay must be nonnegative");
  if (!(clamp_F > 0.0)) throw ValidationError("net.clamp_F must be positive");
}

double Network::forward_eval(std::span<const double> x) const {
  return forward_single(*this, x, nullptr);
}

double Network::forward_train(std::span<const double> x,
                              const DropoutMask& mask) const {
  return forward_single(*this, x, &mask);
}

bool Network::parameters_finite() const {
  for (const auto& W : weights) {
    if (!W.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

Network init_network(const NetworkConfig& config, RngStream& rng) {
  config.validate();
  Network net;
  net.config = config;
  const auto& w = config.widths;
  const int n_layers = static_cast<int>(w.size()) - 1;
  net.weights.reserve(n_layers);
  net.biases.reserve(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    const int fan_in = w[l];
    const int fan_out = w[l + 1];
    const double bound = std::sqrt(6.0 / fan_in);
    Matrix W(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) {
        W(i, j) = bound * (2.0 * rng.uniform01() - 1.0);
      }
    }
    net.weights.push_back(std::move(W));
    net.biases.push_back(Vector::Zero(fan_out));
  }
  net.final_train_loss = std::numeric_limits<double>::quiet_NaN();
  return net;
}

DropoutMask draw_dropout_mask(const NetworkConfig& config, int rows,
                              RngStream& rng) {
  DropoutMask mask;
  const double q = config.dropout_rate;
  const double keep_scale = 1.0 / (1.0 - q);
  const int hidden = config.hidden_layers();
  mask.layer.resize(hidden);
  for (int l = 0; l < hidden; ++l) {
    Matrix m(rows, config.widths[l + 1]);
    for (long i = 0; i < m.rows(); ++i) {
      for (long u = 0; u < m.cols(); ++u) {
        m(i, u) = (rng.uniform01() > q) ? keep_scale : 0.0;
      }
    }
    mask.layer[l] = std::move(m);
  }
  return mask;
}

namespace {

// Preallocated batch workspaces; layer activations sized for the largest
// batch and shrunk by block views for the tail batch.
struct TrainScratch {
  std::vector<Matrix> Z;    // pre-activations per hidden layer, m x h
  std::vector<Matrix> A;    // post-ReLU (and dropout) activations, m x h
  std::vector<Matrix> dZ;   // gradients wrt Z, m x h
  Matrix Xb;                // gathered batch inputs, m x p
  Vector out, dout, yb;     // batch outputs, loss grads, targets
  std::vector<Matrix> gW;   // weight gradients
  std::vector<Vector> gb;   // bias gradients

  TrainScratch(const std::vector<int>& widths, int max_batch) {
    const int hidden = static_cast<int>(widths.size()) - 2;
    Z.resize(hidden);
    A.resize(hidden);
    dZ.resize(hidden);
    for (int l = 0; l < hidden; ++l) {
      Z[l].resize(max_batch, widths[l + 1]);
      A[l].resize(max_batch, widths[l + 1]);
      dZ[l].resize(max_batch, widths[l + 1]);
    }
    Xb.resize(max_batch, widths.front());
    out.resize(max_batch);
    dout.resize(max_batch);
    yb.resize(max_batch);
    gW.resize(hidden + 1);
    gb.resize(hidden + 1);
    for (int l = 0; l <= hidden; ++l) {
      gW[l].resize(widths[l + 1], widths[l]);
      gb[l].resize(widths[l + 1]);
    }
  }
};

// One SGD step on rows [begin, begin+m) of the shuffled order. Returns false
// without updating when the batch forward overflows, so the caller can report
// the divergence with its epoch instead of feeding non-finite values onward.
bool sgd_step(Network& net, const Matrix& X, const Vector& y,
              const FamilySpec& spec, const std::vector<uint32_t>& order,
              int begin, int m, const DropoutMask& mask, TrainScratch& ws) {
  const auto& cfg = net.config;
  const int hidden = cfg.hidden_layers();
  const double F = cfg.clamp_F;

  for (int i = 0; i < m; ++i) {
    ws.Xb.row(i) = X.row(order[begin + i]);
    ws.yb(i) = y(order[begin + i]);
  }
  auto Xb = ws.Xb.topRows(m);

  // forward
  for (int l = 0; l < hidden; ++l) {
    auto Z = ws.Z[l].topRows(m);
    auto A = ws.A[l].topRows(m);
    if (l == 0) {
      Z.noalias() = Xb * net.weights[0].transpose();
    } else {
      Z.noalias() = ws.A[l - 1].topRows(m) * net.weights[l].transpose();
    }
    Z.rowwise() += net.biases[l].transpose();
    A = Z.cwiseMax(0.0);
    A.array() *= mask.layer[l].array();
  }
  auto out = ws.out.head(m);
  out.noalias() = ws.A[hidden - 1].topRows(m) * net.weights[hidden].row(0).transpose();
  out.array() += net.biases[hidden](0);
  if (!out.allFinite()) return false;

  // d(batch mean loss)/d f at the clamped output; the clamp itself passes
  // gradient straight through.
  auto dout = ws.dout.head(m);
  for (int i = 0; i < m; ++i) {
    const double f = clamp_output(out(i), F);
    dout(i) = (psi_prime(spec, f) - ws.yb(i)) / m;
  }

  // backward
  ws.gW[hidden].row(0).noalias() = dout.transpose() * ws.A[hidden - 1].topRows(m);
  ws.gb[hidden](0) = dout.sum();
  for (int l = hidden - 1; l >= 0; --l) {
    auto dZ = ws.dZ[l].topRows(m);
    if (l == hidden - 1) {
      dZ.noalias() = dout * net.weights[hidden].row(0);
    } else {
      dZ.noalias() = ws.dZ[l + 1].topRows(m) * net.weights[l + 1];
    }
    dZ.array() *= mask.layer[l].array();
    dZ = (ws.Z[l].topRows(m).array() > 0.0).select(dZ, 0.0);
    if (l == 0) {
      ws.gW[0].noalias() = dZ.transpose() * Xb;
    } else {
      ws.gW[l].noalias() = dZ.transpose() * ws.A[l - 1].topRows(m);
    }
    ws.gb[l] = dZ.colwise().sum();
  }

  // update: theta <- theta - lr * (grad + wd * theta); decay skips biases
  const double lr = cfg.learning_rate;
  const double wd = cfg.weight_decay;
  for (int l = 0; l <= hidden; ++l) {
    net.weights[l] -= lr * (ws.gW[l] + wd * net.weights[l]);
    net.biases[l] -= lr * ws.gb[l];
  }
  return true;
}

double full_data_loss(const Network& net, const Matrix& X, const Vector& y,
                      const FamilySpec& spec) {
  double total = 0.0;
  std::vector<double> row(X.cols());
  for (long i = 0; i < X.rows(); ++i) {
    for (long j = 0; j < X.cols(); ++j) row[j] = X(i, j);
    total += nll_loss(spec, y(i), net.forward_eval(row));
  }
  return total / static_cast<double>(X.rows());
}

}  // namespace

Network train_network(const Matrix& X, const Vector& y, const FamilySpec& spec,
                      const NetworkConfig& config, RngStream& rng) {
  config.validate();
  spec.validate();
  const int n = static_cast<int>(X.rows());
  if (n < 1) throw ValidationError("training set is empty");
  if (y.size() != n) throw ValidationError("X and y row counts differ");
  if (X.cols() != config.widths.front()) {
    throw ValidationError("X has " + std::to_string(X.cols()) +
                          " columns, network expects " +
                          std::to_string(config.widths.front()));
  }
  for (int i = 0; i < n; ++i) {
    if (!in_support(spec, y(i))) {
      throw ValidationError("row " + std::to_string(i + 1) + ": response " +
                            std::to_string(y(i)) + " outside " + spec.name() +
                            " support");
    }
  }

  const int batch = config.batch_size > 0 ? std::min(config.batch_size, n)
                                          : std::min(32, n);
  Network net = init_network(config, rng);
  TrainScratch ws(config.widths, batch);

  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates shuffle of the row order.
    for (int k = n - 1; k > 0; --k) {
      const uint32_t j = rng.uniform_below(static_cast<uint32_t>(k + 1));
      std::swap(order[k], order[j]);
    }
    for (int begin = 0; begin < n; begin += batch) {
      const int m = std::min(batch, n - begin);
      DropoutMask mask = draw_dropout_mask(config, m, rng);
      if (!sgd_step(net, X, y, spec, order, begin, m, mask, ws)) {
        throw TrainingError("training diverged: non-finite batch output",
                            epoch);
      }
    }
    if (!net.parameters_finite()) {
      throw TrainingError("training diverged: non-finite parameters", epoch);
    }
  }

  net.final_train_loss = full_data_loss(net, X, y, spec);
  if (!std::isfinite(net.final_train_loss)) {
    throw TrainingError("training diverged: non-finite loss", config.epochs - 1);
  }
  return net;
}

}  // namespace esm
