#include "esm/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "esm/errors.hpp"
#include "esm/thread_pool.hpp"

namespace esm {

std::vector<int> Membership::row_sums() const {
  std::vector<int> sums(B, 0);
  for (int i = 0; i < n; ++i) {
    const uint8_t* c = col.data() + static_cast<size_t>(i) * B;
    for (int j = 0; j < B; ++j) sums[j] += c[j];
  }
  return sums;
}

Membership membership_from_design(const SubsampleDesign& design) {
  Membership m;
  m.B = design.B;
  m.n = design.n;
  m.col.assign(static_cast<size_t>(design.B) * design.n, 0);
  for (int j = 0; j < design.B; ++j) {
    for (uint32_t i : design.indices[j]) {
      m.col[static_cast<size_t>(i) * design.B + j] = 1;
    }
  }
  return m;
}

void Standardizer::apply(std::span<const double> x,
                         std::vector<double>& out) const {
  out.resize(x.size());
  if (!enabled) {
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  for (size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
}

namespace {

// Total training attempts per member before the divergence is treated as
// persistent and aborts the fit. At the observed per-fit divergence rate of
// about 0.3% the chance of exhausting five attempts is around 1e-12.
constexpr int kMemberAttempts = 5;

Standardizer fit_standardizer(const Matrix& X, bool enabled) {
  Standardizer s;
  s.enabled = enabled;
  if (!enabled) return s;
  const long p = X.cols();
  s.mean.resize(p);
  s.scale.resize(p);
  for (long j = 0; j < p; ++j) {
    const double mu = X.col(j).mean();
    const double sd =
        std::sqrt((X.col(j).array() - mu).square().sum() / X.rows());
    s.mean[j] = mu;
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

}  // namespace

EnsembleModel fit_ensemble(const Matrix& X, const Vector& y,
                           const FamilySpec& spec, const NetworkConfig& config,
                           int r, int B, uint64_t master_seed, int threads,
                           bool standardize) {
  spec.validate();
  config.validate();
  const int n = static_cast<int>(X.rows());
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

  EnsembleModel model;
  model.spec = spec;
  model.config = config;
  model.master_seed = master_seed;
  model.standardizer = fit_standardizer(X, standardize);

  Matrix Xs = X;
  if (standardize) {
    for (long j = 0; j < Xs.cols(); ++j) {
      Xs.col(j) =
          (Xs.col(j).array() - model.standardizer.mean[j]) / model.standardizer.scale[j];
    }
  }

  RngStream design_stream(master_seed, 0);
  model.design = draw_subsamples(n, r, B, design_stream);
  model.membership = membership_from_design(model.design);
  model.networks.resize(B);

  parallel_for(static_cast<size_t>(B), threads, [&](size_t j) {
    const auto& idx = model.design.indices[j];
    Matrix Xb(static_cast<long>(idx.size()), Xs.cols());
    Vector yb(static_cast<long>(idx.size()));
    for (size_t k = 0; k < idx.size(); ++k) {
      Xb.row(static_cast<long>(k)) = Xs.row(idx[k]);
      yb(static_cast<long>(k)) = y(idx[k]);
    }
    // SGD at these settings diverges on a small fraction of draws (roughly one
    // fit in 300 at the reference configuration), so a divergence gets a fresh
    // deterministic stream rather than killing the whole ensemble. Member j is
    // defined by its subsample, not by which stream trained it; the retry
    // streams are keyed outside the (master_seed, 1..B) family so they cannot
    // collide with any member's first attempt.
    for (int attempt = 0;; ++attempt) {
      RngStream net_stream =
          attempt == 0
              ? RngStream(master_seed, j + 1)
              : RngStream(derive_seed(master_seed, stream_tag::kRetrain,
                                      (static_cast<uint64_t>(j) << 8) |
                                          static_cast<uint64_t>(attempt)),
                          0);
      try {
        model.networks[j] = train_network(Xb, yb, spec, config, net_stream);
        break;
      } catch (const TrainingError& e) {
        if (attempt + 1 >= kMemberAttempts) {
          throw e.with_prefix("ensemble member " + std::to_string(j) + ": ");
        }
      }
    }
  });

  return model;
}

EnsemblePrediction ensemble_predict(const EnsembleModel& model,
                                    std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw ValidationError("feature vector has " + std::to_string(x.size()) +
                          " entries, model expects " +
                          std::to_string(model.input_dim()));
  }
  std::vector<double> z;
  model.standardizer.apply(x, z);
  EnsemblePrediction pred;
  const int B = static_cast<int>(model.networks.size());
  pred.per_model.resize(B);
  double sum = 0.0;
  for (int j = 0; j < B; ++j) {
    const double f = model.networks[j].forward_eval(z);
    pred.per_model[j] = f;
    sum += f;
  }
  pred.fhatB = sum / B;
  return pred;
}

double mean_estimate(const EnsembleModel& model, std::span<const double> x) {
  return psi_prime(model.spec, ensemble_predict(model, x).fhatB);
}

}  // namespace esm
