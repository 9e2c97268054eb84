#include <cmath>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "doctest.h"
#include "seqbayes/errors.hpp"
#include "seqbayes/rates.hpp"
#include "seqbayes/volterra.hpp"

using namespace seqbayes;

namespace {

RegimeParams regime(double alpha, double beta, double p, double tau_exp = 0.0,
                    std::optional<double> q = std::nullopt) {
  RegimeParams rp;
  rp.alpha = alpha;
  rp.beta = beta;
  rp.p = p;
  rp.tau_exponent = tau_exp;
  rp.q = q;
  return rp;
}

}  // namespace

TEST_SUITE("rates") {

TEST_CASE("regime validation") {
  CHECK_THROWS_AS(regime(0.0, 1.0, 1.0).validate(), RegimeError);
  CHECK_THROWS_AS(regime(1.0, 0.0, 1.0).validate(), RegimeError);
  CHECK_THROWS_AS(regime(1.0, 1.0, -0.1).validate(), RegimeError);
  CHECK_THROWS_AS(regime(1.0, 1.0, 1.0, 0.0, -1.0).validate(), RegimeError);
  CHECK_NOTHROW(regime(1.0, 1.0, 0.0, 0.0, -0.5).validate());
  CHECK(regime(1.0, 1.0, 1.0).effective_frequency(1e5) == doctest::Approx(10.0));
}

TEST_CASE("contraction rate") {
  const RateTerms r = contraction_rate(regime(1.0, 1.0, 1.0), 1e5);
  CHECK(r.term1 == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(r.term2 == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(r.epsilon == doctest::Approx(0.2).epsilon(1e-14));

  for (auto [a, b, p] : std::vector<std::tuple<double, double, double>>{
           {0.5, 1.0, 1.0}, {2.0, 1.0, 0.5}, {1.0, 3.0, 0.0}, {4.0, 0.5, 2.0}}) {
    const RegimeParams rp = regime(a, b, p);
    for (double n : {1e3, 1e6, 1e9}) {
      const double ref = std::pow(n, -std::min(a, b) / rp.denominator());
      const double ratio = contraction_rate(rp, n).epsilon / ref;
      CHECK(ratio >= 1.0 - 1e-12);
      CHECK(ratio <= 2.0 + 1e-12);
    }
    CHECK(contraction_rate_exponent(rp) == doctest::Approx(-std::min(a, b) / rp.denominator()));
  }
}

TEST_CASE("optimal prior scaling") {
  CHECK(*optimal_tau_exponent(regime(2.0, 2.0, 1.0)) == 0.0);
  CHECK(*optimal_tau_exponent(regime(1.0, 2.0, 1.0)) == doctest::Approx(-1.0 / 7.0));
  CHECK(!optimal_tau_exponent(regime(0.1, 10.0, 0.0)).has_value());

  for (double a : {0.3, 1.0, 3.0, 8.0}) {
    for (double b : {0.5, 1.0, 2.0}) {
      for (double p : {0.0, 1.0, 2.5}) {
        RegimeParams rp = regime(a, b, p);
        const auto e = optimal_tau_exponent(rp);
        if (b > 1.0 + 2.0 * a + 2.0 * p) {
          CHECK(!e.has_value());
          continue;
        }
        REQUIRE(e.has_value());
        rp.tau_exponent = *e;
        for (double n : {1e4, 1e8, 1e12}) {
          const double ratio =
              contraction_rate(rp, n).epsilon / std::pow(n, -b / (1 + 2 * b + 2 * p));
          CHECK(ratio >= 1.0 - 1e-9);
          CHECK(ratio <= 2.0 + 1e-9);
        }
      }
    }
  }
}

TEST_CASE("rate terms cross once at the optimal exponent") {
  for (auto [a, b, p] : std::vector<std::tuple<double, double, double>>{
           {3.0, 1.0, 1.0}, {0.5, 2.0, 0.0}, {1.0, 1.0, 2.0}}) {
    const double n = 1e6;
    auto gap = [&](double e) {
      const RateTerms r = contraction_rate(regime(a, b, p, e), n);
      return std::log(r.term1) - std::log(r.term2);
    };
    double lo = -0.49, hi = 5.0;
    REQUIRE(gap(lo) > 0.0);
    REQUIRE(gap(hi) < 0.0);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gap(mid) > 0.0 ? lo : hi) = mid;
    }
    CHECK(std::abs(0.5 * (lo + hi) - *optimal_tau_exponent(regime(a, b, p))) < 1e-9);
    // Single crossing: the gap is strictly decreasing in the exponent.
    double prev = gap(-0.49);
    for (double e = -0.45; e < 5.0; e += 0.05) {
      const double g = gap(e);
      CHECK(g < prev);
      prev = g;
    }
  }
}

TEST_CASE("functional rate") {
  // q >= p with alpha <= beta - 1/2 + q - p: parametric rate.
  const RegimeParams rp = regime(1.0, 2.0, 1.0, 0.0, 1.0);
  CHECK(functional_rate_exponent(rp) == doctest::Approx(-0.5));
  std::vector<double> ns, eps;
  for (double n = 1e6; n <= 1e14; n *= 100) {
    ns.push_back(n);
    eps.push_back(functional_rate(rp, n).epsilon);
  }
  CHECK(fit_loglog(ns, eps).slope == doctest::Approx(-0.5).epsilon(0.02));

  // Both comparisons in their "greater" branches: no corrections.
  const RegimeParams big = regime(0.5, 5.0, 0.5, 0.0, 1.0);
  const RateTerms g = functional_rate(big, 1e6, SlowlyVarying{1.5});
  CHECK(g.gamma_n == 1.0);
  CHECK(g.delta_n == 1.0);

  // q = p with S == 1: delta_n^2 is a harmonic number.
  const RegimeParams qp = regime(1.0, 1.0, 1.0, 0.0, 1.0);
  for (double n : {1e5, 1e10, 1e20}) {
    const RateTerms r = functional_rate(qp, n, SlowlyVarying{0.0});
    const double rho = qp.effective_frequency(n);
    const double harmonic =
        boost::math::digamma(std::floor(rho) + 1.0) + boost::math::constants::euler<double>();
    CHECK(r.delta_n * r.delta_n == doctest::Approx(harmonic).epsilon(1e-6));
  }

  // q < p with a log factor: delta_n = S(rho_n).
  const RegimeParams low = regime(1.0, 1.0, 1.0, 0.0, 0.0);
  const RateTerms rl = functional_rate(low, 1e10, SlowlyVarying{2.0});
  CHECK(rl.delta_n == doctest::Approx(std::pow(std::log(low.effective_frequency(1e10) + 1.0), 2.0)));
  CHECK_THROWS_AS(functional_rate(regime(1.0, 1.0, 1.0), 10.0), RegimeError);
}

TEST_CASE("optimal functional scaling") {
  CHECK(optimal_tau_functional(regime(1.0, 1.0, 1.0, 0.0, 0.0)) == doctest::Approx(0.125));
  CHECK(optimal_tau_functional(regime(1.5, 2.0, 1.0, 0.0, 0.5)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(optimal_tau_functional(regime(2.0, 1.5, 1.0, 0.0, 0.0)) ==
        doctest::Approx((0.5 + 2.0 - 1.5) / (3.0 + 2.0)));
  // beta exceeds 1 + 2 alpha + 2p - q: beta-tilde takes over.
  CHECK(optimal_tau_functional(regime(0.25, 4.0, 0.5, 0.0, 0.0)) ==
        doctest::Approx((0.5 + 0.25 - 2.5) / (5.0 + 1.0)));
  CHECK_THROWS_AS(optimal_tau_functional(regime(1.0, 1.0, 1.0, 0.0, 1.0)), RegimeError);
  CHECK_THROWS_AS(optimal_tau_functional(regime(1.0, 1.0, 1.0, 0.0, 2.0)), RegimeError);

  const RegimeParams rp = regime(1.0, 1.0, 1.0, 0.0, 0.0);
  for (double n : {1e4, 1e8}) {
    const TauBalance tb = balance_functional_tau(rp, n, SlowlyVarying{1.0});
    CHECK(tb.eta > 0.0);
    RegimeParams at = rp;
    at.tau_exponent = std::log(tb.tau) / std::log(n);
    const RateTerms r = functional_rate(at, n, SlowlyVarying{1.0});
    CHECK(r.term1 == doctest::Approx(r.term2).epsilon(1e-8));
  }
}

TEST_CASE("lemma series basics") {
  const LemmaSequence xi = power_sequence(0.5);
  const double base = series_lemma_sum(xi, 1.0, 2.0, 0.0, 0.0, 100000);
  CHECK(series_lemma_sum(xi, 1.0, 2.0, 0.0, 1e8, 100000) == base);
  CHECK(series_lemma_sum(xi, 1.0, 2.0, 3.0, 0.0, 100000) == base);

  double prev = std::numeric_limits<double>::infinity();
  for (double N = 1.0; N < 1e9; N *= 10) {
    const double s = series_lemma_sum_auto(xi, 2.0, 2.0, 1.5, N, 1000, 100000000);
    CHECK(s <= prev);
    prev = s;
  }
  CHECK(series_lemma_sum(xi, 2.0, 2.0, 1.0, 10.0, 200000) >=
        series_lemma_sum(xi, 2.0, 2.0, 1.0, 10.0, 100000));

  // Tail bound dominates the actual tail.
  const double head = series_lemma_sum(xi, 2.0, 1.0, 0.0, 0.0, 100000);
  double tail = 0.0;
  for (int i = 100001; i <= 2000000; ++i) tail += std::pow(static_cast<double>(i), -4.0);
  CHECK(tail <= series_tail_bound(xi, 2.0, 100000));
  CHECK(head > 0.0);

  try {
    series_lemma_sum(xi, 2.0, 1.0, 1.0, 1.0, 10);
    FAIL("expected TruncationError");
  } catch (const TruncationError& e) {
    CHECK(e.required_trunc() > 10);
    CHECK_NOTHROW(series_lemma_sum(xi, 2.0, 1.0, 1.0, 1.0, e.required_trunc()));
  }
  CHECK(series_lemma_sum_auto(xi, 2.0, 1.0, 1.0, 1.0, 10, 100000000) > 0.0);
  CHECK_THROWS(series_lemma_sum(xi, 1.0, 0.0, 1.0, 1.0, 10));
  CHECK_THROWS(series_lemma_sum(xi, 1.0, 1.0, -1.0, 1.0, 10));
}

TEST_CASE("slowly varying envelope bounds the sequence") {
  const LemmaSequence xi = power_sequence(0.5, SlowlyVarying{2.0});
  for (std::size_t i = 1; i < 10000000; i = i * 3 + 1) {
    CHECK(std::abs(xi.xi(i)) <= xi.envelope * std::pow(static_cast<double>(i), -xi.decay) * (1 + 1e-12));
  }
}

TEST_CASE("lemma order in both branches") {
  struct Case {
    double q, t, u, v;
  };
  for (const Case c : {Case{0.5, 2.0, 3.0, 2.0}, Case{1.0, 4.0, 2.0, 1.0}, Case{0.0, 2.0, 2.0, 0.5}}) {
    const LemmaSequence xi = power_sequence(c.q);
    const double order = std::min((c.t + 2 * c.q) / c.u, c.v);
    double lo = 1e300, hi = 0.0;
    for (double N = 1e2; N <= 1e10; N *= 100) {
      const double s = series_lemma_sum_auto(xi, c.t, c.u, c.v, N, 1000, 200000000);
      const double ratio = s * std::pow(N, order);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    CHECK(lo >= 0.05);
    CHECK(hi <= 20.0);
    CHECK(hi / lo < 2.0);
  }

  // A sequence strictly inside S^q: the scaled sum decays to 0 in the lower branch.
  const double q = 0.5, t = 2.0, u = 3.0, v = 2.0;
  const LemmaSequence smoother = power_sequence(q + 0.25);
  double prev = std::numeric_limits<double>::infinity(), first = 0.0, last = 0.0;
  for (double N = 1e2; N <= 1e10; N *= 100) {
    const double scaled =
        series_lemma_sum_auto(smoother, t, u, v, N, 1000, 200000000) * std::pow(N, (t + 2 * q) / u);
    CHECK(scaled < prev);
    if (prev == std::numeric_limits<double>::infinity()) first = scaled;
    prev = last = scaled;
  }
  CHECK(last < 0.1 * first);
}

TEST_CASE("fixed-truth bias smallness") {
  const RegimeParams rp = regime(1.0, 1.0, 1.0);
  const std::vector<double> grid{1e3, 1e4, 1e5, 1e6, 1e7};
  const std::size_t K = 2000;
  Functional l{Sequence(K), 0.0, {}};
  for (std::size_t i = 0; i < K; ++i) l.coeffs[i] = std::pow(i + 1.0, -0.5);

  const FixedBiasReport zero = fixed_bias_smallness_check(Truth{Sequence(K, 0.0), 1.0}, l, rp, grid);
  for (const auto& row : zero.rows) CHECK(row.ratio == 0.0);

  Truth spike{Sequence(K, 0.0), 1.0};
  spike.coeffs[0] = 0.7;
  const FixedBiasReport one = fixed_bias_smallness_check(spike, l, rp, grid);
  CHECK(one.decreasing);
  const double order = (2.0 + 0.0) / (2.0 * rp.denominator());
  for (const auto& row : one.rows) {
    CHECK(row.series == doctest::Approx(0.7 / (1.0 + row.n)).epsilon(1e-14));
    CHECK(row.ratio == doctest::Approx(0.7 / (1.0 + row.n) * std::pow(row.n, order)).epsilon(1e-12));
  }

  // Demo truth with the Volterra point functional at x = 1/2.
  const Truth demo = make_truth(truth_pattern::PaperDemo{}, K);
  const FixedBiasReport rep = fixed_bias_smallness_check(demo, point_functional(0.5, K), rp, grid);
  CHECK(rep.decreasing);

  CHECK_THROWS_AS(fixed_bias_smallness_check(demo, point_functional(0.5, K - 1), rp, grid),
                  DimensionError);
  Functional steep{l.coeffs, 10.0, {}};
  CHECK_THROWS_AS(fixed_bias_smallness_check(demo, steep, rp, grid), RegimeError);
}

}  // TEST_SUITE
