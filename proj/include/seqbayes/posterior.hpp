#pragma once

// Exact conjugate posterior in eigen-coordinates.
//
// With prior mu_i ~ N(0, lambda_i) and data Y_i ~ N(kappa_i mu_i, 1/n) the
// posterior factorises into independent normals
//
//   mu_i | Y ~ N( n lambda_i kappa_i Y_i / (1 + n lambda_i kappa_i^2),
//                 lambda_i / (1 + n lambda_i kappa_i^2) ).
//
// All series below share the per-coordinate signal factor
// n lambda_i kappa_i^2, computed once in Spectrum.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqbayes/model.hpp"
#include "seqbayes/numerics.hpp"
#include "seqbayes/random.hpp"

namespace seqbayes {

/// Prior eigenvalues, singular values and signal factors n lambda_i kappa_i^2.
struct Spectrum {
  Sequence lambda;
  Sequence kappa;
  Sequence signal;
  double n = 0.0;

  static Spectrum make(const PriorSpec& prior, const ForwardSpec& fwd, double n);
  /// Raw form. Zero lambda or zero kappa are allowed here.
  static Spectrum from_sequences(Sequence lambda, Sequence kappa, double n);

  std::size_t size() const noexcept { return lambda.size(); }
};

struct PosteriorSummary {
  Sequence mean;
  Sequence var;
  double n = 0.0;
  std::size_t trunc = 0;
};

/// Representer of a linear functional L mu = sum_i l_i mu_i.
struct Functional {
  Sequence coeffs;
  /// Declared decay: |l_i| ~ i^(-q-1/2).
  double q = 0.0;
  std::optional<std::string> sv_note;

  /// sum_i l_i^2 lambda_i, finite iff L is measurable under the prior.
  double prior_variance(std::span<const double> lambda) const;
};

/// Mean squared error of the posterior mean split into squared bias and
/// variance, plus the posterior spread (trace of the posterior covariance).
struct RiskDecomposition {
  double sq_bias = 0.0;
  double variance = 0.0;
  double spread = 0.0;

  double risk() const noexcept { return sq_bias + variance; }
};

struct FunctionalMarginal {
  double mean = 0.0;
  double s_n_sq = 0.0;
};

struct FunctionalBiasVar {
  /// L A K mu_0 - L mu_0 (signed).
  double bias = 0.0;
  /// Variance of L A Y under the truth.
  double t_n_sq = 0.0;
};

PosteriorSummary coordinate_posterior(const PriorSpec& prior, const ForwardSpec& fwd,
                                      const Observation& obs);
PosteriorSummary coordinate_posterior(const Spectrum& spec, std::span<const double> y);

RiskDecomposition risk_decomposition(const PriorSpec& prior, const ForwardSpec& fwd,
                                     const Truth& truth, double n);
RiskDecomposition risk_decomposition(const Spectrum& spec, std::span<const double> truth);

/// Bias vector of the posterior mean, b_i = -mu_{0,i} / (1 + n lambda_i kappa_i^2).
Sequence posterior_mean_bias(const Spectrum& spec, std::span<const double> truth);

FunctionalMarginal functional_marginal(const PosteriorSummary& summary, const Functional& l);

FunctionalBiasVar functional_bias_var(const PriorSpec& prior, const ForwardSpec& fwd,
                                      const Truth& truth, const Functional& l, double n);
FunctionalBiasVar functional_bias_var(const Spectrum& spec, std::span<const double> truth,
                                      std::span<const double> l);

/// s_n^2 = sum_i l_i^2 lambda_i / (1 + n lambda_i kappa_i^2), data-free.
double functional_spread(const Spectrum& spec, std::span<const double> l);

/// k independent draws from the posterior; deterministic in seed.
std::vector<Sequence> posterior_draws(Seed seed, const PosteriorSummary& summary, std::size_t k);

}  // namespace seqbayes
