#include "esm/infer.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "esm/errors.hpp"

namespace esm {

namespace {

// Neumaier-compensated accumulator.
struct KahanSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      c += (sum - t) + v;
    } else {
      c += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + c; }
};

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

}  // namespace

VarianceEstimate ij_variance(std::span<const double> per_model,
                             const Membership& membership, int n, int r) {
  const int B = static_cast<int>(per_model.size());
  if (B < 2) {
    throw InferenceError("variance correction needs B >= 2, got B = " +
                         std::to_string(B));
  }
  if (membership.B != B) {
    throw ValidationError("membership has " + std::to_string(membership.B) +
                          " rows, per_model has " + std::to_string(B));
  }
  if (membership.n != n) {
    throw ValidationError("membership covers n = " +
                          std::to_string(membership.n) + ", caller passed " +
                          std::to_string(n));
  }
  if (r < 1 || r >= n) {
    throw ValidationError("need 1 <= r < n, got r = " + std::to_string(r) +
                          ", n = " + std::to_string(n));
  }

  double fbar = 0.0;
  for (double f : per_model) fbar += f;
  fbar /= B;

  // Identical member outputs make every Z exactly zero; return that without
  // routing the constant through the rounded mean.
  bool all_equal = true;
  for (double f : per_model) {
    if (f != per_model[0]) {
      all_equal = false;
      break;
    }
  }
  if (all_equal) return VarianceEstimate{};

  std::vector<double> centered(B);
  for (int j = 0; j < B; ++j) centered[j] = per_model[j] - fbar;

  std::vector<double> z(B);
  KahanSum sum_v2;
  KahanSum sum_dev2;
  for (int i = 0; i < n; ++i) {
    const auto colJ = membership.column(i);
    int count = 0;
    for (int j = 0; j < B; ++j) count += colJ[j];
    const double jbar = static_cast<double>(count) / B;

    double sum_z = 0.0;
    for (int j = 0; j < B; ++j) {
      z[j] = (colJ[j] - jbar) * centered[j];
      sum_z += z[j];
    }
    const double v = sum_z / B;

    double dev2 = 0.0;
    for (int j = 0; j < B; ++j) {
      const double d = z[j] - v;
      dev2 += d * d;
    }
    sum_v2.add(v * v);
    sum_dev2.add(dev2);
  }

  const double gap = static_cast<double>(n - r);
  const double scale = static_cast<double>(n) * (n - 1) / (gap * gap);

  VarianceEstimate est;
  est.var_uncorrected = scale * sum_v2.value();
  est.correction = scale * sum_dev2.value() /
                   (static_cast<double>(B) * (B - 1));
  est.var_corrected_raw = est.var_uncorrected - est.correction;
  est.clamped_negative = est.var_corrected_raw < 0.0;
  est.var_corrected = est.clamped_negative ? 0.0 : est.var_corrected_raw;
  return est;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile requires p in (0, 1), got " +
                      std::to_string(p));
  }

  // Acklam's rational approximation (|relative error| < 1.15e-9).
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double s = q * q;
    x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) *
        q /
        (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // One Newton step against the erfc-based CDF.
  const double err = normal_cdf(x) - p;
  x -= err / normal_pdf(x);
  return x;
}

InferenceResult confidence_interval(const EnsembleModel& model,
                                    std::span<const double> x, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1), got " +
                          std::to_string(alpha));
  }
  const EnsemblePrediction pred = ensemble_predict(model, x);
  const VarianceEstimate ve = ij_variance(
      pred.per_model, model.membership, model.design.n, model.design.r);

  InferenceResult res;
  res.fhatB = pred.fhatB;
  res.se_uncorrected = std::sqrt(ve.var_uncorrected);
  res.se_corrected = std::sqrt(ve.var_corrected);
  res.clamped_negative = ve.clamped_negative;
  res.alpha = alpha;
  res.z_value = normal_quantile(1.0 - alpha / 2.0);
  res.ci_lower_mean =
      psi_prime(model.spec, res.fhatB - res.z_value * res.se_corrected);
  res.ci_upper_mean =
      psi_prime(model.spec, res.fhatB + res.z_value * res.se_corrected);
  return res;
}

}  // namespace esm
