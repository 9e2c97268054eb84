#include "seqbayes/posterior.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "seqbayes/errors.hpp"

namespace seqbayes {
namespace {

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace

Spectrum Spectrum::make(const PriorSpec& prior, const ForwardSpec& fwd, double n) {
  require_length(fwd.trunc(), prior.trunc(), "Spectrum::make");
  return from_sequences(prior.eigenvalues(), fwd.singular_values(), n);
}

Spectrum Spectrum::from_sequences(Sequence lambda, Sequence kappa, double n) {
  require_length(kappa.size(), lambda.size(), "Spectrum::from_sequences");
  if (!(n >= 0.0)) throw std::invalid_argument("Spectrum: n must be nonnegative");
  Spectrum s;
  s.n = n;
  s.signal.resize(lambda.size());
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    if (lambda[k] < 0.0) throw std::invalid_argument("Spectrum: negative prior eigenvalue");
    s.signal[k] = n * lambda[k] * kappa[k] * kappa[k];
  }
  s.lambda = std::move(lambda);
  s.kappa = std::move(kappa);
  return s;
}

double Functional::prior_variance(std::span<const double> lambda) const {
  require_length(lambda.size(), coeffs.size(), "Functional::prior_variance");
  CompensatedSum acc;
  for (std::size_t k = 0; k < coeffs.size(); ++k) acc += coeffs[k] * coeffs[k] * lambda[k];
  return acc.value();
}

PosteriorSummary coordinate_posterior(const PriorSpec& prior, const ForwardSpec& fwd,
                                      const Observation& obs) {
  return coordinate_posterior(Spectrum::make(prior, fwd, obs.n), obs.y);
}

PosteriorSummary coordinate_posterior(const Spectrum& spec, std::span<const double> y) {
  require_length(y.size(), spec.size(), "coordinate_posterior");
  PosteriorSummary post;
  post.n = spec.n;
  post.trunc = spec.size();
  post.mean.resize(spec.size());
  post.var.resize(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double denom = 1.0 + spec.signal[k];
    post.mean[k] = spec.n * spec.lambda[k] * spec.kappa[k] * y[k] / denom;
    post.var[k] = spec.lambda[k] / denom;
  }
  return post;
}

RiskDecomposition risk_decomposition(const PriorSpec& prior, const ForwardSpec& fwd,
                                     const Truth& truth, double n) {
  return risk_decomposition(Spectrum::make(prior, fwd, n), truth.coeffs);
}

RiskDecomposition risk_decomposition(const Spectrum& spec, std::span<const double> truth) {
  require_length(truth.size(), spec.size(), "risk_decomposition");
  CompensatedSum bias, variance, spread;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double denom = 1.0 + spec.signal[k];
    const double spread_k = spec.lambda[k] / denom;
    bias += truth[k] * truth[k] / (denom * denom);
    // n lambda^2 kappa^2 / (1+s)^2 written as (s/(1+s)) * spread term, so the
    // variance term never exceeds the spread term in floating point.
    variance += (spec.signal[k] / denom) * spread_k;
    spread += spread_k;
  }
  return {bias.value(), variance.value(), spread.value()};
}

Sequence posterior_mean_bias(const Spectrum& spec, std::span<const double> truth) {
  require_length(truth.size(), spec.size(), "posterior_mean_bias");
  Sequence b(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) b[k] = -truth[k] / (1.0 + spec.signal[k]);
  return b;
}

FunctionalMarginal functional_marginal(const PosteriorSummary& summary, const Functional& l) {
  require_length(l.coeffs.size(), summary.trunc, "functional_marginal");
  CompensatedSum mean, var;
  for (std::size_t k = 0; k < summary.trunc; ++k) {
    mean += l.coeffs[k] * summary.mean[k];
    var += l.coeffs[k] * l.coeffs[k] * summary.var[k];
  }
  return {mean.value(), var.value()};
}

FunctionalBiasVar functional_bias_var(const PriorSpec& prior, const ForwardSpec& fwd,
                                      const Truth& truth, const Functional& l, double n) {
  return functional_bias_var(Spectrum::make(prior, fwd, n), truth.coeffs, l.coeffs);
}

FunctionalBiasVar functional_bias_var(const Spectrum& spec, std::span<const double> truth,
                                      std::span<const double> l) {
  require_length(truth.size(), spec.size(), "functional_bias_var");
  require_length(l.size(), spec.size(), "functional_bias_var");
  CompensatedSum bias, var;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double denom = 1.0 + spec.signal[k];
    bias += -l[k] * truth[k] / denom;
    var += (spec.signal[k] / denom) * (l[k] * l[k] * spec.lambda[k] / denom);
  }
  return {bias.value(), var.value()};
}

double functional_spread(const Spectrum& spec, std::span<const double> l) {
  require_length(l.size(), spec.size(), "functional_spread");
  CompensatedSum acc;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    acc += l[k] * l[k] * spec.lambda[k] / (1.0 + spec.signal[k]);
  }
  return acc.value();
}

std::vector<Sequence> posterior_draws(Seed seed, const PosteriorSummary& summary, std::size_t k) {
  if (k < 1) throw std::invalid_argument("posterior_draws: k must be at least 1");
  std::vector<Sequence> draws(k, Sequence(summary.trunc));
  for (std::size_t d = 0; d < k; ++d) {
    NormalStream normal(derive_seed(seed, d));
    for (std::size_t j = 0; j < summary.trunc; ++j) {
      draws[d][j] = summary.mean[j] + std::sqrt(summary.var[j]) * normal();
    }
  }
  return draws;
}

}  // namespace seqbayes
