#include "seqbayes/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "seqbayes/errors.hpp"
#include "seqbayes/numerics.hpp"

namespace seqbayes {
namespace {

constexpr double kTailFraction = 1e-6;
constexpr double kBranchTol = 1e-12;

// -1, 0, +1 for a < b, a == b (within tolerance), a > b.
int compare(double a, double b) {
  if (std::abs(a - b) <= kBranchTol * std::max({1.0, std::abs(a), std::abs(b)})) return 0;
  return a < b ? -1 : 1;
}

double log_sum_factor(const SlowlyVarying& sv, double rho) {
  CompensatedSum acc;
  const auto last = static_cast<std::size_t>(std::floor(rho));
  for (std::size_t i = 1; i <= last; ++i) {
    const double s = sv(static_cast<double>(i));
    acc += s * s / static_cast<double>(i);
  }
  return acc.value();
}

// Slowly varying correction squared, by comparison of two exponents.
double correction_sq(int branch, const SlowlyVarying& sv, double rho) {
  if (branch < 0) {
    const double s = sv(rho);
    return s * s;
  }
  if (branch == 0) return log_sum_factor(sv, rho);
  return 1.0;
}

double require_q(const RegimeParams& rp) {
  if (!rp.q) throw RegimeError("functional rate needs the representer decay q");
  return *rp.q;
}

}  // namespace

double SlowlyVarying::operator()(double x) const {
  if (log_power == 0.0) return 1.0;
  return std::pow(std::log(x + 1.0), log_power);
}

void RegimeParams::validate() const {
  if (!(alpha > 0.0)) throw RegimeError("alpha must be positive");
  if (!(beta > 0.0)) throw RegimeError("beta must be positive");
  if (!(p >= 0.0)) throw RegimeError("p must be nonnegative");
  if (q && !(*q > -beta)) throw RegimeError("q must exceed -beta");
}

double RegimeParams::tau(double n) const { return std::pow(n, tau_exponent); }

double RegimeParams::effective_frequency(double n) const {
  const double t = tau(n);
  return std::pow(n * t * t, 1.0 / denominator());
}

RateTerms contraction_rate(const RegimeParams& rp, double n) {
  rp.validate();
  const double tau = rp.tau(n);
  const double big_n = n * tau * tau;
  const double u = rp.denominator();
  RateTerms r;
  r.term1 = std::pow(big_n, -std::min(rp.beta / u, 1.0));
  r.term2 = tau * std::pow(big_n, -rp.alpha / u);
  r.epsilon = r.term1 + r.term2;
  return r;
}

double contraction_rate_exponent(const RegimeParams& rp) {
  rp.validate();
  const double u = rp.denominator();
  const double scale = 1.0 + 2.0 * rp.tau_exponent;
  const double e1 = -std::min(rp.beta / u, 1.0) * scale;
  const double e2 = rp.tau_exponent - rp.alpha / u * scale;
  return std::max(e1, e2);
}

std::optional<double> optimal_tau_exponent(const RegimeParams& rp) {
  rp.validate();
  if (rp.beta > rp.denominator()) return std::nullopt;
  return (rp.alpha - rp.beta) / (1.0 + 2.0 * rp.beta + 2.0 * rp.p);
}

RateTerms functional_rate(const RegimeParams& rp, double n, std::optional<SlowlyVarying> sv) {
  rp.validate();
  const double q = require_q(rp);
  const double tau = rp.tau(n);
  const double big_n = n * tau * tau;
  const double u = rp.denominator();
  RateTerms r;
  if (sv) {
    const double rho = std::pow(big_n, 1.0 / u);
    r.gamma_n = std::sqrt(correction_sq(compare(rp.beta + q, u), *sv, rho));
    r.delta_n = std::sqrt(correction_sq(compare(q, rp.p), *sv, rho));
  }
  r.term1 = std::pow(big_n, -std::min((rp.beta + q) / u, 1.0)) * r.gamma_n;
  r.term2 = tau * std::pow(big_n, -std::min((0.5 + rp.alpha + q) / u, 0.5)) * r.delta_n;
  r.epsilon = r.term1 + r.term2;
  return r;
}

double functional_rate_exponent(const RegimeParams& rp) {
  rp.validate();
  const double q = require_q(rp);
  const double u = rp.denominator();
  const double scale = 1.0 + 2.0 * rp.tau_exponent;
  const double e1 = -std::min((rp.beta + q) / u, 1.0) * scale;
  const double e2 = rp.tau_exponent - std::min((0.5 + rp.alpha + q) / u, 0.5) * scale;
  return std::max(e1, e2);
}

double optimal_tau_functional(const RegimeParams& rp) {
  rp.validate();
  const double q = require_q(rp);
  if (!(q < rp.p)) {
    throw RegimeError("optimal_tau_functional: needs q < p; for q >= p use the BvM diagnostics");
  }
  const double b = std::min(rp.beta, rp.denominator() - q);
  return (0.5 + rp.alpha - b) / (2.0 * b + 2.0 * rp.p);
}

TauBalance balance_functional_tau(const RegimeParams& rp, double n,
                                  std::optional<SlowlyVarying> sv) {
  TauBalance out;
  out.exponent = optimal_tau_functional(rp);
  auto gap = [&](double log_tau) {
    RegimeParams probe = rp;
    // tau = n^e with e = log_tau / log n.
    probe.tau_exponent = log_tau / std::log(n);
    const RateTerms r = functional_rate(probe, n, sv);
    return std::log(r.term1) - std::log(r.term2);
  };
  // term1 decreases and term2 increases in tau; bracket in log tau.
  // n tau^2 must stay finite, so grow the upper end instead of fixing it.
  const double log_n = std::log(n);
  double lo = -0.5 * log_n + 1e-9, step = 1.0, hi = lo + step;
  while (gap(hi) > 0.0 && log_n + 2.0 * (lo + 2.0 * step) < 600.0) {
    step *= 2.0;
    hi = lo + step;
  }
  if (!(gap(lo) > 0.0 && gap(hi) < 0.0)) {
    throw RegimeError("balance_functional_tau: terms do not cross for this regime");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) > 0.0 ? lo : hi) = mid;
  }
  out.tau = std::exp(0.5 * (lo + hi));
  out.eta = out.tau / std::pow(n, out.exponent);
  return out;
}

LemmaSequence power_sequence(double q, SlowlyVarying sv) {
  LemmaSequence seq;
  seq.xi = [q, sv](std::size_t i) {
    const double x = static_cast<double>(i);
    return std::pow(x, -q - 0.5) * sv(x);
  };
  if (sv.log_power == 0.0) {
    seq.decay = q + 0.5;
    seq.envelope = 1.0;
    return seq;
  }
  // Absorb the logarithm into a slightly weaker power: |xi_i| <= C i^(-q-1/2+d).
  constexpr double slack = 0.05;
  seq.decay = q + 0.5 - slack;
  double env = 0.0;
  for (double x = 1.0; x < 1e300; x *= 1.5) env = std::max(env, sv(x) * std::pow(x, -slack));
  seq.envelope = env;
  return seq;
}

double series_tail_bound(const LemmaSequence& xi, double t, std::size_t trunc) {
  const double e = 2.0 * xi.decay + t;
  if (!(e > 1.0)) return std::numeric_limits<double>::infinity();
  const double k = static_cast<double>(trunc);
  return xi.envelope * xi.envelope * std::pow(k, 1.0 - e) / (e - 1.0);
}

double series_lemma_sum(const LemmaSequence& xi, double t, double u, double v, double N,
                        std::size_t trunc) {
  if (!(u > 0.0)) throw std::invalid_argument("series_lemma_sum: u must be positive");
  if (!(v >= 0.0)) throw std::invalid_argument("series_lemma_sum: v must be nonnegative");
  if (!(N >= 0.0)) throw std::invalid_argument("series_lemma_sum: N must be nonnegative");
  if (trunc < 1) throw std::invalid_argument("series_lemma_sum: trunc must be at least 1");
  CompensatedSum acc;
  for (std::size_t i = 1; i <= trunc; ++i) {
    const double x = static_cast<double>(i);
    const double c = xi.xi(i);
    const double damp = v == 0.0 ? 1.0 : std::pow(1.0 + N * std::pow(x, -u), -v);
    acc += c * c * std::pow(x, -t) * damp;
  }
  const double head = acc.value();
  const double tail = series_tail_bound(xi, t, trunc);
  if (head == 0.0 && tail == 0.0) return 0.0;
  if (!(tail <= kTailFraction * head)) {
    std::size_t required = 0;
    const double e = 2.0 * xi.decay + t;
    if (e > 1.0 && head > 0.0) {
      const double k = std::pow(
          xi.envelope * xi.envelope / ((e - 1.0) * kTailFraction * head), 1.0 / (e - 1.0));
      required = k < 1e18 ? static_cast<std::size_t>(std::ceil(k)) + 1 : 0;
    }
    throw TruncationError("series_lemma_sum: tail bound " + std::to_string(tail) +
                              " exceeds 1e-6 of the head " + std::to_string(head) +
                              " at trunc " + std::to_string(trunc),
                          required);
  }
  return head;
}

double series_lemma_sum_auto(const LemmaSequence& xi, double t, double u, double v, double N,
                             std::size_t min_trunc, std::size_t max_trunc) {
  std::size_t trunc = std::max<std::size_t>(1, min_trunc);
  for (;;) {
    try {
      return series_lemma_sum(xi, t, u, v, N, trunc);
    } catch (const TruncationError& e) {
      const std::size_t next = std::max(e.required_trunc(), 2 * trunc);
      if (e.required_trunc() == 0 || trunc >= max_trunc) throw;
      trunc = std::min(next, max_trunc);
    }
  }
}

FixedBiasReport fixed_bias_smallness_check(const Truth& mu0, const Functional& l,
                                           const RegimeParams& rp,
                                           std::span<const double> n_grid) {
  rp.validate();
  if (mu0.trunc() != l.coeffs.size()) {
    throw DimensionError("fixed_bias_smallness_check: truth and representer lengths differ");
  }
  const double t = 2.0 * rp.beta;
  const double u = rp.denominator();
  const double order = t + 2.0 * l.q;
  if (!(order > 0.0 && order < 2.0 * u)) {
    throw RegimeError("fixed_bias_smallness_check: needs 0 < 2 beta + 2q < 2(1+2 alpha+2p)");
  }
  FixedBiasReport rep;
  for (double n : n_grid) {
    const double tau = rp.tau(n);
    const double big_n = n * tau * tau;
    CompensatedSum acc;
    for (std::size_t k = 0; k < mu0.trunc(); ++k) {
      const double x = static_cast<double>(k + 1);
      acc += std::abs(l.coeffs[k] * mu0.coeffs[k]) / (1.0 + big_n * std::pow(x, -u));
    }
    FixedBiasRow row;
    row.n = n;
    row.series = acc.value();
    row.envelope = std::pow(big_n, -order / (2.0 * u));
    row.ratio = row.series / row.envelope;
    if (!rep.rows.empty() && !(row.ratio < rep.rows.back().ratio)) rep.decreasing = false;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace seqbayes
