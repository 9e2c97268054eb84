#include "seqbayes/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "seqbayes/errors.hpp"
#include "seqbayes/volterra.hpp"

namespace seqbayes {

PriorSpec::PriorSpec(double alpha, double tau, std::size_t trunc)
    : alpha_(alpha), tau_(tau), trunc_(trunc) {
  if (!(alpha > 0.0)) throw std::invalid_argument("PriorSpec: alpha must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("PriorSpec: tau must be positive");
  if (trunc < 1) throw std::invalid_argument("PriorSpec: trunc must be at least 1");
}

double PriorSpec::eigenvalue(std::size_t i) const {
  if (i < 1 || i > trunc_) throw std::out_of_range("PriorSpec::eigenvalue: index out of range");
  return tau_ * tau_ * std::pow(static_cast<double>(i), -1.0 - 2.0 * alpha_);
}

Sequence PriorSpec::eigenvalues() const {
  Sequence out(trunc_);
  for (std::size_t i = 1; i <= trunc_; ++i) out[i - 1] = eigenvalue(i);
  return out;
}

const char* to_string(KappaKind kind) noexcept {
  switch (kind) {
    case KappaKind::ExactPolynomial: return "polynomial";
    case KappaKind::Volterra: return "volterra";
    case KappaKind::Custom: return "custom";
  }
  return "unknown";
}

KappaKind kappa_kind_from_string(const std::string& name) {
  if (name == "polynomial") return KappaKind::ExactPolynomial;
  if (name == "volterra") return KappaKind::Volterra;
  if (name == "custom") return KappaKind::Custom;
  throw std::invalid_argument("unknown kappa kind '" + name + "'");
}

ForwardSpec::ForwardSpec(KappaKind kind, double p, Sequence kappa)
    : kind_(kind), p_(p), kappa_(std::move(kappa)) {
  if (!(p >= 0.0)) throw std::invalid_argument("ForwardSpec: p must be nonnegative");
  if (kappa_.empty()) throw std::invalid_argument("ForwardSpec: trunc must be at least 1");
  for (double k : kappa_) {
    if (!(k > 0.0) || !std::isfinite(k)) {
      throw std::invalid_argument("ForwardSpec: singular values must be positive and finite");
    }
  }
}

ForwardSpec ForwardSpec::polynomial(double p, std::size_t trunc) {
  Sequence kappa(trunc);
  for (std::size_t i = 1; i <= trunc; ++i) kappa[i - 1] = std::pow(static_cast<double>(i), -p);
  return ForwardSpec(KappaKind::ExactPolynomial, p, std::move(kappa));
}

ForwardSpec ForwardSpec::volterra(std::size_t trunc) {
  Sequence kappa(trunc);
  for (std::size_t i = 1; i <= trunc; ++i) kappa[i - 1] = volterra_kappa(i);
  return ForwardSpec(KappaKind::Volterra, 1.0, std::move(kappa));
}

ForwardSpec ForwardSpec::custom(Sequence kappa, double p) {
  return ForwardSpec(KappaKind::Custom, p, std::move(kappa));
}

double ForwardSpec::singular_value(std::size_t i) const {
  if (i < 1 || i > kappa_.size()) {
    throw std::out_of_range("ForwardSpec::singular_value: index out of range");
  }
  return kappa_[i - 1];
}

double ForwardSpec::bound_constant() const {
  double c = 1.0;
  for (std::size_t i = 1; i <= kappa_.size(); ++i) {
    const double scaled = kappa_[i - 1] * std::pow(static_cast<double>(i), p_);
    c = std::max({c, scaled, 1.0 / scaled});
  }
  return c;
}

double sobolev_norm(std::span<const double> coeffs, double s) {
  CompensatedSum acc;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const double i = static_cast<double>(k + 1);
    acc.add(coeffs[k] * coeffs[k] * std::pow(i, 2.0 * s));
  }
  return std::sqrt(acc.value());
}

Observation generate_observation(Seed seed, const Truth& truth, const ForwardSpec& fwd,
                                 double n) {
  if (truth.trunc() != fwd.trunc()) {
    throw DimensionError("generate_observation: truth and forward operator truncations differ");
  }
  if (!(n > 0.0)) throw std::invalid_argument("generate_observation: n must be positive");
  Observation obs;
  obs.n = n;
  obs.y.resize(truth.trunc());
  NormalStream normal(seed);
  const double noise_sd = 1.0 / std::sqrt(n);
  const Sequence& kappa = fwd.singular_values();
  for (std::size_t k = 0; k < obs.y.size(); ++k) {
    obs.y[k] = kappa[k] * truth.coeffs[k] + noise_sd * normal();
  }
  return obs;
}

namespace {

struct TruthBuilder {
  std::size_t trunc;

  Truth operator()(const truth_pattern::PaperDemo&) const {
    Truth t;
    t.beta = 1.0;
    t.coeffs.resize(trunc);
    for (std::size_t i = 1; i <= trunc; ++i) {
      const double x = static_cast<double>(i);
      t.coeffs[i - 1] = std::pow(x, -1.5) * std::sin(x);
    }
    return t;
  }

  Truth operator()(const truth_pattern::PolynomialSmooth& p) const {
    if (!(p.eps > 0.0)) throw std::invalid_argument("PolynomialSmooth: eps must be positive");
    if (!(p.beta > 0.0)) throw std::invalid_argument("PolynomialSmooth: beta must be positive");
    Truth t;
    t.beta = p.beta;
    t.coeffs.resize(trunc);
    for (std::size_t i = 1; i <= trunc; ++i) {
      t.coeffs[i - 1] = std::pow(static_cast<double>(i), -0.5 - p.beta - p.eps);
    }
    return t;
  }

  Truth operator()(const truth_pattern::Custom& c) const {
    Truth t;
    t.beta = c.beta;
    t.coeffs = c.coeffs;
    t.coeffs.resize(trunc, 0.0);
    return t;
  }
};

void check_same_trunc(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": truncation lengths differ");
}

}  // namespace

Truth make_truth(const TruthPattern& pattern, std::size_t trunc) {
  if (trunc < 1) throw std::invalid_argument("make_truth: trunc must be at least 1");
  return std::visit(TruthBuilder{trunc}, pattern);
}

Truth extremal_truth_functional(std::span<const double> l, double beta, const PriorSpec& prior,
                                const ForwardSpec& fwd, double n) {
  check_same_trunc(l.size(), prior.trunc(), "extremal_truth_functional");
  check_same_trunc(l.size(), fwd.trunc(), "extremal_truth_functional");
  Truth t;
  t.beta = beta;
  t.coeffs.resize(l.size());
  const Sequence& kappa = fwd.singular_values();
  for (std::size_t k = 0; k < l.size(); ++k) {
    const double i = static_cast<double>(k + 1);
    const double signal = n * prior.eigenvalue(k + 1) * kappa[k] * kappa[k];
    t.coeffs[k] = std::pow(i, -2.0 * beta) * l[k] / (1.0 + signal);
  }
  const double norm = sobolev_norm(t.coeffs, beta);
  if (!(norm > 0.0)) {
    throw DegenerateInputError("extremal_truth_functional: representer is identically zero");
  }
  for (double& c : t.coeffs) c /= norm;
  return t;
}

double effective_frequency(double n, double tau, double alpha, double p) {
  return std::pow(n * tau * tau, 1.0 / (1.0 + 2.0 * alpha + 2.0 * p));
}

std::size_t default_trunc(double n, double tau, double alpha, double p) {
  const double rho = effective_frequency(n, tau, alpha, p);
  return std::max<std::size_t>(1000, static_cast<std::size_t>(std::ceil(10.0 * rho)));
}

std::size_t spike_index(const PriorSpec& prior, double p, double n, double beta) {
  const double alpha = prior.alpha();
  if (beta >= 1.0 + 2.0 * alpha + 2.0 * p) return 1;
  const double rho = effective_frequency(n, prior.tau(), alpha, p);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rho)));
}

Truth spike_truth_ball(const PriorSpec& prior, const ForwardSpec& fwd, double n, double beta,
                       double target_bias_sq) {
  check_same_trunc(prior.trunc(), fwd.trunc(), "spike_truth_ball");
  if (!(target_bias_sq > 0.0)) {
    throw std::invalid_argument("spike_truth_ball: target_bias_sq must be positive");
  }
  const std::size_t index = spike_index(prior, fwd.p(), n, beta);
  if (index > prior.trunc()) {
    throw TruncationError("spike_truth_ball: spike index " + std::to_string(index) +
                              " exceeds truncation " + std::to_string(prior.trunc()),
                          index);
  }
  const double kappa = fwd.singular_value(index);
  const double shrink = 1.0 + n * prior.eigenvalue(index) * kappa * kappa;
  Truth t;
  t.beta = beta;
  t.coeffs.assign(prior.trunc(), 0.0);
  t.coeffs[index - 1] = std::sqrt(target_bias_sq) * shrink;
  return t;
}

}  // namespace seqbayes
