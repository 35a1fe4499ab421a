#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "esm/expfam.hpp"
#include "esm/net.hpp"
#include "esm/subsample.hpp"

namespace esm {

// B x n inclusion matrix J, stored column-major (at(j, i) = col[i*B + j])
// because the variance estimator scans every j for each data index i.
struct Membership {
  int B = 0;
  int n = 0;
  std::vector<uint8_t> col;

  uint8_t at(int j, int i) const {
    return col[static_cast<size_t>(i) * B + j];
  }
  std::span<const uint8_t> column(int i) const {
    return {col.data() + static_cast<size_t>(i) * B, static_cast<size_t>(B)};
  }
  std::vector<int> row_sums() const;
};

Membership membership_from_design(const SubsampleDesign& design);

// Optional z-score transform fitted on the training features. Disabled by
// default; constant features keep scale 1.
struct Standardizer {
  bool enabled = false;
  std::vector<double> mean;
  std::vector<double> scale;

  void apply(std::span<const double> x, std::vector<double>& out) const;
};

struct EnsembleModel {
  FamilySpec spec;
  SubsampleDesign design;
  std::vector<Network> networks;
  Membership membership;
  uint64_t master_seed = 0;
  NetworkConfig config;
  Standardizer standardizer;

  int input_dim() const { return config.input_dim(); }
};

// Trains one network per subsample. The design comes from stream
// (master_seed, 0) and network j from stream (master_seed, j+1); results land
// in pre-assigned slots, so any thread schedule yields the same model.
// threads <= 0 means hardware count. A member whose training diverges is
// retrained a bounded number of times on derived streams (deterministic, so
// the model is still a pure function of the inputs and master_seed); only a
// member that keeps diverging aborts the whole fit, with the failing index in
// the message.
EnsembleModel fit_ensemble(const Matrix& X, const Vector& y,
                           const FamilySpec& spec, const NetworkConfig& config,
                           int r, int B, uint64_t master_seed, int threads = 1,
                           bool standardize = false);

struct EnsemblePrediction {
  double fhatB = 0.0;
  std::vector<double> per_model;
};

// per_model[j] = networks[j] eval output; fhatB = arithmetic mean.
EnsemblePrediction ensemble_predict(const EnsembleModel& model,
                                    std::span<const double> x);

// psi_prime(spec, fhatB): the estimated E(y | x).
double mean_estimate(const EnsembleModel& model, std::span<const double> x);

}  // namespace esm
