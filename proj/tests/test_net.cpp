#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "esm/errors.hpp"
#include "esm/expfam.hpp"
#include "esm/net.hpp"
#include "esm/rng.hpp"

using namespace esm;

namespace {

// Independent plain-loop reference for a (p, h1, h2, ..., 1) ReLU net. Used
// to cross-check the production trainer; deliberately shares no code with it.
struct RefNet {
  std::vector<std::vector<std::vector<double>>> W;  // [layer][out][in]
  std::vector<std::vector<double>> b;               // [layer][out]

  static RefNet from(const Network& net) {
    RefNet ref;
    ref.W.resize(net.weights.size());
    ref.b.resize(net.biases.size());
    for (size_t l = 0; l < net.weights.size(); ++l) {
      const Matrix& M = net.weights[l];
      ref.W[l].assign(M.rows(), std::vector<double>(M.cols()));
      for (long i = 0; i < M.rows(); ++i) {
        for (long j = 0; j < M.cols(); ++j) ref.W[l][i][j] = M(i, j);
      }
      ref.b[l].assign(net.biases[l].size(), 0.0);
      for (long i = 0; i < net.biases[l].size(); ++i) {
        ref.b[l][i] = net.biases[l](i);
      }
    }
    return ref;
  }

  double forward(const std::vector<double>& x, double F,
                 std::vector<std::vector<double>>* acts = nullptr) const {
    std::vector<double> h = x;
    if (acts) acts->clear();
    for (size_t l = 0; l + 1 < W.size(); ++l) {
      std::vector<double> next(W[l].size());
      for (size_t i = 0; i < W[l].size(); ++i) {
        double z = b[l][i];
        for (size_t j = 0; j < h.size(); ++j) z += W[l][i][j] * h[j];
        next[i] = z > 0.0 ? z : 0.0;
      }
      h = std::move(next);
      if (acts) acts->push_back(h);
    }
    double out = b.back()[0];
    for (size_t j = 0; j < h.size(); ++j) out += W.back()[0][j] * h[j];
    return std::fmin(std::fmax(out, -F), F);
  }

  double batch_loss(const std::vector<std::vector<double>>& X,
                    const std::vector<double>& y, const FamilySpec& spec,
                    double F) const {
    double total = 0.0;
    for (size_t i = 0; i < X.size(); ++i) {
      total += nll_loss(spec, y[i], forward(X[i], F));
    }
    return total / X.size();
  }

  // Gradient of the batch-mean loss, straight-through clamp, no dropout.
  void batch_grad(const std::vector<std::vector<double>>& X,
                  const std::vector<double>& y, const FamilySpec& spec,
                  double F, std::vector<std::vector<std::vector<double>>>& gW,
                  std::vector<std::vector<double>>& gb) const {
    gW.assign(W.size(), {});
    gb.assign(b.size(), {});
    for (size_t l = 0; l < W.size(); ++l) {
      gW[l].assign(W[l].size(), std::vector<double>(W[l][0].size(), 0.0));
      gb[l].assign(b[l].size(), 0.0);
    }
    const size_t m = X.size();
    for (size_t s = 0; s < m; ++s) {
      std::vector<std::vector<double>> acts;
      const double f = forward(X[s], F, &acts);
      const double dout = (psi_prime(spec, f) - y[s]) / m;

      const size_t L = W.size() - 1;  // output layer index
      const auto& last_h = acts.back();
      for (size_t j = 0; j < last_h.size(); ++j) {
        gW[L][0][j] += dout * last_h[j];
      }
      gb[L][0] += dout;

      std::vector<double> delta(last_h.size());
      for (size_t j = 0; j < last_h.size(); ++j) {
        delta[j] = dout * W[L][0][j] * (last_h[j] > 0.0 ? 1.0 : 0.0);
      }
      for (size_t l = L; l-- > 0;) {
        const auto& input = l == 0 ? X[s] : acts[l - 1];
        for (size_t i = 0; i < delta.size(); ++i) {
          for (size_t j = 0; j < input.size(); ++j) {
            gW[l][i][j] += delta[i] * input[j];
          }
          gb[l][i] += delta[i];
        }
        if (l == 0) break;
        std::vector<double> prev(acts[l - 1].size(), 0.0);
        for (size_t j = 0; j < prev.size(); ++j) {
          double acc = 0.0;
          for (size_t i = 0; i < delta.size(); ++i) {
            acc += delta[i] * W[l][i][j];
          }
          prev[j] = acc * (acts[l - 1][j] > 0.0 ? 1.0 : 0.0);
        }
        delta = std::move(prev);
      }
    }
  }
};

NetworkConfig tiny_config() {
  NetworkConfig config;
  config.widths = {3, 4, 1};
  config.learning_rate = 0.1;
  config.epochs = 1;
  config.batch_size = 64;  // one batch for the small datasets below
  config.dropout_rate = 0.0;
  config.weight_decay = 0.02;
  config.clamp_F = 50.0;  // inactive, so finite differences see no kink
  return config;
}

struct TinyData {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
};

TinyData tiny_data(const FamilySpec& spec, int n, uint64_t seed) {
  RngStream rng(seed, 77);
  TinyData data;
  data.X.resize(n, std::vector<double>(3));
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (double& v : data.X[i]) v = rng.normal();
    switch (spec.family) {
      case Family::gaussian: data.y[i] = rng.normal(); break;
      case Family::bernoulli: data.y[i] = rng.uniform_below(2); break;
      case Family::poisson: data.y[i] = rng.uniform_below(5); break;
      case Family::binomial: data.y[i] = rng.uniform_below(spec.n_trial + 1); break;
    }
  }
  return data;
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix X(static_cast<long>(rows.size()), static_cast<long>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      X(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
    }
  }
  return X;
}

// Mirrors train_network's stream consumption for one epoch, one batch:
// init draws, then the epoch shuffle, then the batch's dropout masks.
Network mirror_initial_state(const NetworkConfig& config, int n,
                             RngStream& rng) {
  Network before = init_network(config, rng);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int k = n - 1; k > 0; --k) {
    const uint32_t j = rng.uniform_below(static_cast<uint32_t>(k + 1));
    std::swap(order[k], order[j]);
  }
  (void)draw_dropout_mask(config, n, rng);
  return before;
}

const std::vector<FamilySpec> kFamilies = {
    FamilySpec::gaussian(), FamilySpec::bernoulli(), FamilySpec::poisson(),
    FamilySpec::binomial(5)};

}  // namespace

TEST_CASE("init_network shapes, bounds, determinism") {
  NetworkConfig config;
  config.widths = {2, 3, 1};
  RngStream rng(5, 0);
  Network net = init_network(config, rng);
  REQUIRE(net.weights.size() == 2);
  CHECK(net.weights[0].rows() == 3);
  CHECK(net.weights[0].cols() == 2);
  CHECK(net.weights[1].rows() == 1);
  CHECK(net.weights[1].cols() == 3);
  CHECK(net.biases[0].size() == 3);
  CHECK(net.biases[1].size() == 1);
  CHECK(net.biases[0].isZero());
  CHECK(net.biases[1].isZero());

  RngStream rng2(5, 0);
  Network net2 = init_network(config, rng2);
  CHECK((net.weights[0].array() == net2.weights[0].array()).all());
  CHECK((net.weights[1].array() == net2.weights[1].array()).all());

  NetworkConfig six;
  six.widths = {6, 8, 1};
  RngStream rng3(6, 0);
  Network net3 = init_network(six, rng3);
  CHECK(net3.weights[0].cwiseAbs().maxCoeff() <= 1.0);  // sqrt(6/6)
  const double bound1 = std::sqrt(6.0 / 8.0);
  CHECK(net3.weights[1].cwiseAbs().maxCoeff() <= bound1);
}

TEST_CASE("forward spot checks") {
  NetworkConfig config;
  config.widths = {2, 2, 1};
  config.clamp_F = 3.0;
  Network net;
  net.config = config;
  net.weights = {Matrix::Zero(2, 2), Matrix::Zero(1, 2)};
  net.biases = {Vector::Zero(2), Vector::Zero(1)};

  const std::vector<double> x{1.5, -0.7};
  CHECK(net.forward_eval(x) == 0.0);

  // identity-like path: first hidden unit passes x1, output passes that unit
  net.weights[0](0, 0) = 1.0;
  net.weights[1](0, 0) = 1.0;
  CHECK(net.forward_eval(std::vector<double>{2.0, 0.0}) == 2.0);
  CHECK(net.forward_eval(std::vector<double>{7.4, 0.0}) == 3.0);   // clamp
  CHECK(net.forward_eval(std::vector<double>{-9.0, 0.0}) == 0.0);  // ReLU

  net.biases[1](0) = -8.0;
  CHECK(net.forward_eval(std::vector<double>{0.0, 0.0}) == -3.0);  // clamp low

  CHECK_THROWS_AS(net.forward_eval(std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("eval output always obeys the clamp") {
  NetworkConfig config;
  config.widths = {4, 16, 8, 1};
  config.clamp_F = 3.0;
  RngStream rng(9, 0);
  Network net = init_network(config, rng);
  // inflate weights so raw outputs roam far outside [-F, F]
  for (auto& W : net.weights) W *= 4.0;
  RngStream xs(10, 0);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> x(4);
    for (double& v : x) v = 3.0 * xs.normal();
    const double f = net.forward_eval(x);
    CHECK(std::abs(f) <= 3.0 + 1e-12);
  }
}

TEST_CASE("forward_train applies the supplied dropout mask") {
  NetworkConfig config;
  config.widths = {1, 2, 1};
  config.dropout_rate = 0.5;
  config.clamp_F = 10.0;
  Network net;
  net.config = config;
  net.weights = {Matrix::Ones(2, 1), Matrix::Ones(1, 2)};
  net.biases = {Vector::Zero(2), Vector::Zero(1)};

  DropoutMask keep_all, drop_all, keep_first;
  keep_all.layer = {Matrix::Constant(1, 2, 2.0)};   // 1/(1-0.5)
  drop_all.layer = {Matrix::Zero(1, 2)};
  keep_first.layer = {Matrix::Zero(1, 2)};
  keep_first.layer[0](0, 0) = 2.0;

  const std::vector<double> x{1.0};
  CHECK(net.forward_train(x, keep_all) == 4.0);
  CHECK(net.forward_train(x, drop_all) == 0.0);
  CHECK(net.forward_train(x, keep_first) == 2.0);
  CHECK(net.forward_eval(x) == 2.0);
}

TEST_CASE("draw_dropout_mask statistics, per-row draws, determinism") {
  NetworkConfig config;
  config.widths = {3, 100, 1};
  config.dropout_rate = 0.1;
  RngStream rng(21, 0);
  int kept = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    DropoutMask mask = draw_dropout_mask(config, 1, rng);
    REQUIRE(mask.layer.size() == 1);
    REQUIRE(mask.layer[0].rows() == 1);
    for (long u = 0; u < mask.layer[0].cols(); ++u) {
      const double v = mask.layer[0](0, u);
      REQUIRE((v == 0.0 || v == doctest::Approx(1.0 / 0.9).epsilon(1e-15)));
      if (v != 0.0) ++kept;
    }
  }
  const double rate = static_cast<double>(kept) / (trials * 100);
  CHECK(rate == doctest::Approx(0.9).epsilon(0.02));

  // every batch row gets its own mask
  RngStream rows_rng(23, 0);
  DropoutMask batch = draw_dropout_mask(config, 40, rows_rng);
  REQUIRE(batch.layer[0].rows() == 40);
  bool any_row_differs = false;
  for (long i = 1; i < batch.layer[0].rows() && !any_row_differs; ++i) {
    any_row_differs = (batch.layer[0].row(i).array() !=
                       batch.layer[0].row(0).array()).any();
  }
  CHECK(any_row_differs);

  RngStream r1(22, 0), r2(22, 0);
  DropoutMask m1 = draw_dropout_mask(config, 5, r1);
  DropoutMask m2 = draw_dropout_mask(config, 5, r2);
  CHECK((m1.layer[0].array() == m2.layer[0].array()).all());
}

TEST_CASE("one SGD step matches the hand-stepped oracle to 1e-12") {
  for (const auto& spec : kFamilies) {
    CAPTURE(spec.name());
    NetworkConfig config = tiny_config();
    const TinyData data = tiny_data(spec, 8, 314);

    RngStream mirror(55, 9);
    Network before = mirror_initial_state(config, 8, mirror);
    RefNet ref = RefNet::from(before);

    std::vector<std::vector<std::vector<double>>> gW;
    std::vector<std::vector<double>> gb;
    ref.batch_grad(data.X, data.y, spec, config.clamp_F, gW, gb);

    RngStream train_rng(55, 9);
    Network after =
        train_network(to_matrix(data.X), Vector::Map(data.y.data(), 8), spec,
                      config, train_rng);

    const double lr = config.learning_rate;
    const double wd = config.weight_decay;
    for (size_t l = 0; l < ref.W.size(); ++l) {
      for (size_t i = 0; i < ref.W[l].size(); ++i) {
        for (size_t j = 0; j < ref.W[l][i].size(); ++j) {
          const double expect =
              ref.W[l][i][j] - lr * (gW[l][i][j] + wd * ref.W[l][i][j]);
          const double got = after.weights[l](static_cast<long>(i),
                                              static_cast<long>(j));
          CHECK(got == doctest::Approx(expect).epsilon(1e-12));
        }
        const double expect_b = ref.b[l][i] - lr * gb[l][i];
        CHECK(after.biases[l](static_cast<long>(i)) ==
              doctest::Approx(expect_b).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("backprop gradient matches central finite differences") {
  for (const auto& spec : kFamilies) {
    CAPTURE(spec.name());
    NetworkConfig config = tiny_config();
    config.weight_decay = 0.0;  // so the step recovers the pure loss gradient
    const TinyData data = tiny_data(spec, 6, 2718);

    RngStream mirror(91, 4);
    Network before = mirror_initial_state(config, 6, mirror);

    RngStream train_rng(91, 4);
    Network after =
        train_network(to_matrix(data.X), Vector::Map(data.y.data(), 6), spec,
                      config, train_rng);

    RefNet ref = RefNet::from(before);
    const double h = 1e-5;
    const double lr = config.learning_rate;
    for (size_t l = 0; l < ref.W.size(); ++l) {
      for (size_t i = 0; i < ref.W[l].size(); ++i) {
        for (size_t j = 0; j < ref.W[l][i].size(); ++j) {
          const double analytic = (ref.W[l][i][j] -
                                   after.weights[l](static_cast<long>(i),
                                                    static_cast<long>(j))) /
                                  lr;
          RefNet plus = ref, minus = ref;
          plus.W[l][i][j] += h;
          minus.W[l][i][j] -= h;
          const double fd =
              (plus.batch_loss(data.X, data.y, spec, config.clamp_F) -
               minus.batch_loss(data.X, data.y, spec, config.clamp_F)) /
              (2.0 * h);
          if (std::abs(analytic) > 1e-8) {
            CHECK(std::abs(analytic - fd) / std::abs(analytic) < 1e-4);
          }
        }
        const double analytic_b =
            (ref.b[l][i] - after.biases[l](static_cast<long>(i))) / lr;
        RefNet plus = ref, minus = ref;
        plus.b[l][i] += h;
        minus.b[l][i] -= h;
        const double fd =
            (plus.batch_loss(data.X, data.y, spec, config.clamp_F) -
             minus.batch_loss(data.X, data.y, spec, config.clamp_F)) /
            (2.0 * h);
        if (std::abs(analytic_b) > 1e-8) {
          CHECK(std::abs(analytic_b - fd) / std::abs(analytic_b) < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("training is deterministic given config and seed") {
  NetworkConfig config;
  config.widths = {3, 16, 8, 1};
  config.epochs = 30;
  const TinyData data = tiny_data(FamilySpec::bernoulli(), 20, 99);
  RngStream r1(33, 0), r2(33, 0);
  Network a = train_network(to_matrix(data.X), Vector::Map(data.y.data(), 20),
                            FamilySpec::bernoulli(), config, r1);
  Network b = train_network(to_matrix(data.X), Vector::Map(data.y.data(), 20),
                            FamilySpec::bernoulli(), config, r2);
  CHECK(a.final_train_loss == b.final_train_loss);
  for (size_t l = 0; l < a.weights.size(); ++l) {
    CHECK((a.weights[l].array() == b.weights[l].array()).all());
    CHECK((a.biases[l].array() == b.biases[l].array()).all());
  }
}

TEST_CASE("gaussian constant target trains to the closed-form optimum") {
  NetworkConfig config;
  config.widths = {2, 16, 8, 1};
  config.epochs = 200;
  config.learning_rate = 0.05;
  config.dropout_rate = 0.0;
  const int n = 30;
  RngStream xs(44, 0);
  std::vector<std::vector<double>> X(n, std::vector<double>(2));
  for (auto& row : X) {
    for (double& v : row) v = xs.normal();
  }
  Vector y = Vector::Zero(n);
  RngStream train_rng(45, 0);
  Network net = train_network(to_matrix(X), y, FamilySpec::gaussian(), config,
                              train_rng);
  CHECK(net.final_train_loss >= 0.0);  // gaussian loss with y=0 is f^2/2
  CHECK(net.final_train_loss < 1e-3);
  for (const auto& row : X) {
    CHECK(std::abs(net.forward_eval(row)) < 0.1);
  }
}

TEST_CASE("separable bernoulli beats the constant-predictor baseline") {
  NetworkConfig config;
  config.widths = {1, 8, 1};
  config.epochs = 300;
  config.dropout_rate = 0.0;
  config.weight_decay = 0.0;
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  for (int k = 1; k <= 10; ++k) {
    X.push_back({-1.0 - 0.2 * k});
    y.push_back(0.0);
    X.push_back({1.0 + 0.2 * k});
    y.push_back(1.0);
  }
  RngStream rng(46, 0);
  Network net = train_network(to_matrix(X), Vector::Map(y.data(), 20),
                              FamilySpec::bernoulli(), config, rng);
  CHECK(net.final_train_loss < 0.6931471805599453);  // log 2
}

TEST_CASE("divergence raises TrainingError carrying the epoch") {
  NetworkConfig config;
  config.widths = {3, 8, 1};
  config.epochs = 50;
  config.learning_rate = 1e18;
  config.dropout_rate = 0.0;
  const TinyData data = tiny_data(FamilySpec::gaussian(), 10, 7);
  RngStream rng(48, 0);
  try {
    train_network(to_matrix(data.X), Vector::Map(data.y.data(), 10),
                  FamilySpec::gaussian(), config, rng);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() >= 0);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("config validation rejects malformed settings") {
  NetworkConfig config;
  config.widths = {3, 4, 1};
  CHECK_NOTHROW(config.validate());

  NetworkConfig bad = config;
  bad.widths = {3, 1};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.widths = {3, 4, 2};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.widths = {3, 0, 1};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.weight_decay = -0.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.clamp_F = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("train_network validates inputs") {
  NetworkConfig config;
  config.widths = {3, 4, 1};
  config.epochs = 1;
  const TinyData data = tiny_data(FamilySpec::bernoulli(), 5, 3);
  RngStream rng(50, 0);

  Matrix X = to_matrix(data.X);
  Vector bad_y = Vector::Constant(5, 2.0);  // outside bernoulli support
  CHECK_THROWS_WITH_AS(
      train_network(X, bad_y, FamilySpec::bernoulli(), config, rng),
      doctest::Contains("row 1"), ValidationError);

  Vector short_y = Vector::Zero(4);
  CHECK_THROWS_AS(
      train_network(X, short_y, FamilySpec::bernoulli(), config, rng),
      ValidationError);

  NetworkConfig wrong_dim = config;
  wrong_dim.widths = {4, 4, 1};
  Vector y = Vector::Zero(5);
  CHECK_THROWS_AS(
      train_network(X, y, FamilySpec::bernoulli(), wrong_dim, rng),
      ValidationError);
}
