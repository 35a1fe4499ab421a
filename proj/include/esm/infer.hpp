#pragma once

#include <span>

#include "esm/ensemble.hpp"

namespace esm {

struct VarianceEstimate {
  double var_uncorrected = 0.0;
  double correction = 0.0;  // the finite-B Monte Carlo bias term, always >= 0
  double var_corrected_raw = 0.0;
  double var_corrected = 0.0;  // raw floored at 0
  bool clamped_negative = false;
};

// Infinitesimal-jackknife variance of the ensemble prediction with Monte
// Carlo bias correction:
//   Z[j][i] = (J[j][i] - Jbar_i) * (f_j - fbar),  V_i = mean_j Z[j][i]
//   var_uncorrected = n(n-1)/(n-r)^2 * sum_i V_i^2
//   correction      = n(n-1)/(n-r)^2 * 1/(B(B-1)) * sum_{i,j} (Z[j][i]-V_i)^2
// Sums over i use compensated accumulation. Throws InferenceError for B < 2.
VarianceEstimate ij_variance(std::span<const double> per_model,
                             const Membership& membership, int n, int r);

// Inverse standard-normal CDF: rational approximation refined by one Newton
// step against the erfc-based CDF. Throws DomainError outside (0, 1).
double normal_quantile(double p);

struct InferenceResult {
  double fhatB = 0.0;  // canonical scale
  double se_uncorrected = 0.0;
  double se_corrected = 0.0;
  bool clamped_negative = false;
  double ci_lower_mean = 0.0;
  double ci_upper_mean = 0.0;
  double alpha = 0.0;
  double z_value = 0.0;
};

// Mean-scale interval [psi'(fhatB - z se_c), psi'(fhatB + z se_c)] with
// z = normal_quantile(1 - alpha/2).
InferenceResult confidence_interval(const EnsembleModel& model,
                                    std::span<const double> x, double alpha);

}  // namespace esm
