#include "esm/expfam.hpp"

#include <cmath>
#include <sstream>

#include "esm/errors.hpp"

namespace esm {

namespace {

void require_finite(double theta) {
  if (!std::isfinite(theta)) {
    throw DomainError("canonical parameter must be finite");
  }
}

// exp(-|t|) / (1 + exp(-|t|))^2, symmetric in t. Strictly positive until
// exp(-|t|) underflows.
double logistic_variance(double t) {
  const double e = std::exp(-std::fabs(t));
  const double denom = 1.0 + e;
  return e / (denom * denom);
}

}  // namespace

const char* FamilySpec::name() const {
  switch (family) {
    case Family::gaussian: return "gaussian";
    case Family::bernoulli: return "bernoulli";
    case Family::poisson: return "poisson";
    case Family::binomial: return "binomial";
  }
  return "unknown";
}

void FamilySpec::validate() const {
  if (family == Family::binomial && n_trial < 1) {
    throw ValidationError("binomial family requires n_trial >= 1");
  }
}

Family parse_family(const std::string& text) {
  if (text == "gaussian") return Family::gaussian;
  if (text == "bernoulli") return Family::bernoulli;
  if (text == "poisson") return Family::poisson;
  if (text == "binomial") return Family::binomial;
  throw ValidationError("family: unsupported value \"" + text +
                        "\" (expected gaussian, bernoulli, poisson or binomial)");
}

double softplus(double t) {
  if (t > 35.0) return t;
  if (t < -35.0) return 0.0;
  return std::log1p(std::exp(-std::fabs(t))) + std::fmax(t, 0.0);
}

double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double psi(const FamilySpec& spec, double theta) {
  require_finite(theta);
  switch (spec.family) {
    case Family::gaussian: return 0.5 * theta * theta;
    case Family::bernoulli: return softplus(theta);
    case Family::poisson: return std::exp(theta);
    case Family::binomial: return spec.n_trial * softplus(theta);
  }
  return 0.0;
}

double psi_prime(const FamilySpec& spec, double theta) {
  require_finite(theta);
  switch (spec.family) {
    case Family::gaussian: return theta;
    case Family::bernoulli: return sigmoid(theta);
    case Family::poisson: return std::exp(theta);
    case Family::binomial: return spec.n_trial * sigmoid(theta);
  }
  return 0.0;
}

double psi_second(const FamilySpec& spec, double theta) {
  require_finite(theta);
  switch (spec.family) {
    case Family::gaussian: return 1.0;
    case Family::bernoulli: return logistic_variance(theta);
    case Family::poisson: return std::exp(theta);
    case Family::binomial: return spec.n_trial * logistic_variance(theta);
  }
  return 0.0;
}

double nll_loss(const FamilySpec& spec, double y, double f) {
  require_finite(f);
  if (!in_support(spec, y)) {
    std::ostringstream msg;
    msg << "response " << y << " outside " << spec.name() << " support";
    throw ValidationError(msg.str());
  }
  return -y * f + psi(spec, f);
}

double nll_grad(const FamilySpec& spec, double y, double f) {
  require_finite(f);
  if (!in_support(spec, y)) {
    std::ostringstream msg;
    msg << "response " << y << " outside " << spec.name() << " support";
    throw ValidationError(msg.str());
  }
  return psi_prime(spec, f) - y;
}

double bregman_loss(const FamilySpec& spec, double f, double f0) {
  require_finite(f);
  require_finite(f0);
  return -psi_prime(spec, f0) * (f - f0) + psi(spec, f) - psi(spec, f0);
}

bool in_support(const FamilySpec& spec, double y) {
  if (!std::isfinite(y)) return false;
  switch (spec.family) {
    case Family::gaussian:
      return true;
    case Family::bernoulli:
      return y == 0.0 || y == 1.0;
    case Family::poisson:
      return y >= 0.0 && y == std::floor(y);
    case Family::binomial:
      return y >= 0.0 && y <= spec.n_trial && y == std::floor(y);
  }
  return false;
}

double validate_response(const FamilySpec& spec, double y, long row,
                         bool coerce) {
  double value = y;
  if (coerce && spec.family != Family::gaussian && std::isfinite(y)) {
    const double rounded = std::nearbyint(y);
    if (std::fabs(y - rounded) <= 1e-9) value = rounded;
  }
  if (!in_support(spec, value)) {
    std::ostringstream msg;
    msg << "row " << row << ": response " << y << " outside " << spec.name()
        << " support";
    throw ValidationError(msg.str());
  }
  return value;
}

}  // namespace esm
