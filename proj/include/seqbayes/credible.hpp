#pragma once

// Credible balls and intervals centred at the posterior mean, and their
// frequentist coverage.
//
// Under the posterior, ||mu - AY||^2 is distributed as U = sum_i s_i Z_i^2;
// under the truth, AY - A K mu_0 is Gaussian with covariance eigenvalues t_i,
// so the ball covers mu_0 iff sum_i (sqrt(t_i) Z_i + b_i)^2 <= r^2 with b the
// bias vector of the posterior mean.

#include <cstddef>
#include <optional>
#include <span>

#include "seqbayes/model.hpp"
#include "seqbayes/posterior.hpp"
#include "seqbayes/random.hpp"

namespace seqbayes {

/// Eigenvalues of the posterior covariance (s) and of the covariance of the
/// posterior mean under the truth (t).
struct EigenWeights {
  Sequence s_w;
  Sequence t_w;
  double n = 0.0;
};

EigenWeights credible_weights(const PriorSpec& prior, const ForwardSpec& fwd, double n);
EigenWeights credible_weights(const Spectrum& spec);

enum class QuantileMethod { MonteCarlo, Satterthwaite };

struct McOptions {
  std::size_t samples = 200000;
  Seed seed = 0;
  unsigned workers = 0;
};

struct BallRadius {
  double radius = 0.0;
  /// Set when every weight is zero; radius is then 0.
  bool degenerate = false;
};

/// r with P(sum_i w_i Z_i^2 <= r^2) = 1 - gamma.
BallRadius ball_radius(std::span<const double> weights, double gamma, QuantileMethod method,
                       const McOptions& mc = {});
BallRadius ball_radius(const EigenWeights& w, double gamma, QuantileMethod method,
                       const McOptions& mc = {});

/// Draws of sum_i (sqrt(w_i) Z_i + offset_i)^2, in a fixed order for a given
/// seed regardless of worker count. offset may be empty (all zero).
Sequence weighted_chi_square_draws(std::span<const double> weights,
                                   std::span<const double> offset, const McOptions& mc);

enum class CoverageMethod { ExactNormal, MonteCarlo };

const char* to_string(CoverageMethod m) noexcept;

struct CoverageReport {
  double radius_or_halfwidth = 0.0;
  double coverage = 0.0;
  CoverageMethod method = CoverageMethod::ExactNormal;
  std::size_t mc_samples = 0;
  Seed mc_seed = 0;
  /// Present iff method is MonteCarlo.
  std::optional<double> mc_stderr;
};

/// Monte-Carlo estimate of P(sum_i (sqrt(t_i) Z_i + b_i)^2 <= r^2); empty bias means zero.
CoverageReport ball_coverage(std::span<const double> t_w, std::span<const double> bias, double r,
                             const McOptions& mc);

/// Exact coverage of LAY +- |z_{gamma/2}| s_n when LAY - L mu_0 ~ N(bias, t_n^2).
double interval_coverage(double bias, double s_n, double t_n, double gamma);
CoverageReport interval_coverage_report(double bias, double s_n, double t_n, double gamma);

struct BvmDiagnostics {
  double ratio = 1.0;
  double sup_bias = 0.0;
  double tv = 0.0;
  double s_n = 0.0;
  double t_n = 0.0;
};

/// sup over the unit S^beta ball of |L A K mu_0 - L mu_0|, attained by the
/// Cauchy-Schwarz extremal truth:
/// sqrt(sum_i l_i^2 i^(-2 beta) / (1 + n lambda_i kappa_i^2)^2).
double sup_bias(const Spectrum& spec, std::span<const double> l, double beta);

/// Total variation distance between N(0, s^2) and N(0, t^2) by adaptive
/// Gauss-Kronrod quadrature of half the absolute density difference.
double gaussian_tv_distance(double s, double t);

BvmDiagnostics bvm_diagnostics(const PriorSpec& prior, const ForwardSpec& fwd, const Functional& l,
                               double n, double beta);

/// sd(U)/E(U) = sqrt(2 sum w^2) / sum w for U = sum_i w_i Z_i^2.
double separation_ratio(std::span<const double> weights);

}  // namespace seqbayes
