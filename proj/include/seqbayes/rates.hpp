#pragma once

// Closed-form contraction rates and optimal prior scalings, and numeric
// evaluators for the weighted series
//
//   sum_i xi_i^2 i^(-t) / (1 + N i^(-u))^v
//
// whose orders of magnitude drive every rate. In applications
// u = 1 + 2 alpha + 2p and N = n tau_n^2.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "seqbayes/model.hpp"
#include "seqbayes/posterior.hpp"

namespace seqbayes {

/// S(x) = (log(x + 1))^log_power; log_power = 0 gives S == 1.
struct SlowlyVarying {
  double log_power = 0.0;

  double operator()(double x) const;
};

struct RegimeParams {
  double alpha = 1.0;
  double beta = 1.0;
  double p = 1.0;
  std::optional<double> q;
  /// tau_n = n^tau_exponent.
  double tau_exponent = 0.0;

  /// Throws RegimeError on alpha <= 0, beta <= 0, p < 0 or q <= -beta.
  void validate() const;

  double tau(double n) const;
  /// 1 + 2 alpha + 2p.
  double denominator() const noexcept { return 1.0 + 2.0 * alpha + 2.0 * p; }
  /// rho_n = (n tau_n^2)^(1/(1+2 alpha+2p)).
  double effective_frequency(double n) const;

  bool operator==(const RegimeParams&) const = default;
};

struct RateTerms {
  double epsilon = 0.0;
  double term1 = 0.0;  ///< bias part
  double term2 = 0.0;  ///< spread part
  double gamma_n = 1.0;
  double delta_n = 1.0;
};

/// eps_n = (n tau^2)^(-min(beta/(1+2a+2p), 1)) + tau (n tau^2)^(-alpha/(1+2a+2p)).
RateTerms contraction_rate(const RegimeParams& rp, double n);

/// Exponent e with eps_n ~ n^e (the slower of the two terms).
double contraction_rate_exponent(const RegimeParams& rp);

/// (alpha - beta)/(1 + 2 beta + 2p) when beta <= 1 + 2 alpha + 2p; nullopt
/// when no scaling attains the minimax rate.
std::optional<double> optimal_tau_exponent(const RegimeParams& rp);

/// Rate for a linear functional with representer decay q, including the
/// slowly varying corrections gamma_n and delta_n when sv is given.
RateTerms functional_rate(const RegimeParams& rp, double n,
                          std::optional<SlowlyVarying> sv = std::nullopt);

/// Exponent of n in functional_rate without slowly varying factors.
double functional_rate_exponent(const RegimeParams& rp);

/// Exponent (1/2 + alpha - b)/(2b + 2p) with b = min(beta, 1 + 2 alpha + 2p - q).
/// Requires q < p; throws RegimeError otherwise.
double optimal_tau_functional(const RegimeParams& rp);

struct TauBalance {
  double exponent = 0.0;
  /// tau at which the two terms of functional_rate are equal at this n.
  double tau = 0.0;
  /// tau / n^exponent.
  double eta = 0.0;
};

TauBalance balance_functional_tau(const RegimeParams& rp, double n,
                                  std::optional<SlowlyVarying> sv = std::nullopt);

/// Sequence xi with |xi_i| <= envelope * i^(-decay); decay and envelope feed
/// the tail bound.
struct LemmaSequence {
  std::function<double(std::size_t)> xi;
  double decay = 0.0;
  double envelope = 1.0;
};

/// xi_i = i^(-q-1/2) S(i).
LemmaSequence power_sequence(double q, SlowlyVarying sv = {});

/// Upper bound on sum_{i > trunc} envelope^2 i^(-2 decay - t) by the integral
/// of x^(-2 decay - t) from trunc. Infinite when 2 decay + t <= 1.
double series_tail_bound(const LemmaSequence& xi, double t, std::size_t trunc);

/// sum_{i <= trunc} xi_i^2 i^(-t) / (1 + N i^(-u))^v. Throws TruncationError
/// (carrying the required trunc) if the tail bound exceeds 1e-6 of the sum.
double series_lemma_sum(const LemmaSequence& xi, double t, double u, double v, double N,
                        std::size_t trunc);

/// Same sum with the truncation grown as needed, up to max_trunc.
double series_lemma_sum_auto(const LemmaSequence& xi, double t, double u, double v, double N,
                             std::size_t min_trunc, std::size_t max_trunc);

struct FixedBiasRow {
  double n = 0.0;
  double series = 0.0;
  double envelope = 0.0;
  double ratio = 0.0;
};

struct FixedBiasReport {
  std::vector<FixedBiasRow> rows;
  bool decreasing = true;
};

/// Evaluates sum_i |l_i mu_i| / (1 + N i^(-u)) with N = n tau_n^2,
/// u = 1 + 2 alpha + 2p, against the worst-case envelope N^(-(t+2q)/(2u)),
/// t = 2 beta, q = l.q. Requires 0 < t + 2q < 2u.
FixedBiasReport fixed_bias_smallness_check(const Truth& mu0, const Functional& l,
                                           const RegimeParams& rp,
                                           std::span<const double> n_grid);

}  // namespace seqbayes
