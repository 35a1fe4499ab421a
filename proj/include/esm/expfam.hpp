#pragma once

#include <string>

namespace esm {

enum class Family { gaussian, bernoulli, poisson, binomial };

// One exponential-family kernel in canonical form. psi is the log-partition
// function, psi' the mean map (inverse link), psi'' the conditional variance.
struct FamilySpec {
  Family family = Family::gaussian;
  int n_trial = 1;  // binomial only; ignored elsewhere

  static FamilySpec gaussian() { return {Family::gaussian, 1}; }
  static FamilySpec bernoulli() { return {Family::bernoulli, 1}; }
  static FamilySpec poisson() { return {Family::poisson, 1}; }
  static FamilySpec binomial(int n_trial) { return {Family::binomial, n_trial}; }

  const char* name() const;
  void validate() const;  // throws ValidationError on binomial n_trial < 1
};

// Parse "gaussian" / "bernoulli" / "poisson" / "binomial"; throws
// ValidationError naming the `family` key otherwise.
Family parse_family(const std::string& text);

double psi(const FamilySpec& spec, double theta);
double psi_prime(const FamilySpec& spec, double theta);
double psi_second(const FamilySpec& spec, double theta);

// Per-observation negative log likelihood -y*f + psi(f). The h(y) constant is
// dropped; it never affects minimizers or gradients.
double nll_loss(const FamilySpec& spec, double y, double f);

// d/df of nll_loss: psi'(f) - y.
double nll_grad(const FamilySpec& spec, double y, double f);

// Pointwise Bregman divergence -psi'(f0)(f - f0) + psi(f) - psi(f0).
// Nonnegative, zero iff f == f0.
double bregman_loss(const FamilySpec& spec, double f, double f0);

// True iff y is a valid response for the family (bernoulli {0,1}, poisson
// nonnegative integers, binomial {0..n_trial}, gaussian any finite real).
bool in_support(const FamilySpec& spec, double y);

// Returns y, possibly snapped to the nearest integer when `coerce` is set and
// the distance is at most 1e-9 (discrete families only). Throws
// ValidationError naming `row` (1-based) if the value ends up out of support.
double validate_response(const FamilySpec& spec, double y, long row,
                         bool coerce = false);

// Numerically stable log(1 + e^t); returns the asymptote for |t| > 35.
double softplus(double t);

// Numerically stable 1 / (1 + e^-t).
double sigmoid(double t);

}  // namespace esm
