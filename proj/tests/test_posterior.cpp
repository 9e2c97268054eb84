#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "seqbayes/errors.hpp"
#include "seqbayes/model.hpp"
#include "seqbayes/posterior.hpp"

using namespace seqbayes;

namespace {

double log_uniform(std::mt19937_64& gen, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(gen));
}

struct RandomProblem {
  Spectrum spec;
  Sequence truth;
  Sequence l;
};

RandomProblem random_problem(std::mt19937_64& gen, std::size_t k) {
  std::normal_distribution<double> z;
  Sequence lam(k), kap(k), mu(k), l(k);
  for (std::size_t i = 0; i < k; ++i) {
    lam[i] = log_uniform(gen, 1e-4, 1e2);
    kap[i] = log_uniform(gen, 1e-3, 1e1);
    mu[i] = z(gen);
    l[i] = z(gen);
  }
  return {Spectrum::from_sequences(lam, kap, log_uniform(gen, 1e-2, 1e6)), mu, l};
}

}  // namespace

TEST_SUITE("posterior") {

TEST_CASE("single-coordinate conjugate update") {
  const Spectrum spec = Spectrum::from_sequences({1.0}, {1.0}, 1.0);
  const PosteriorSummary post = coordinate_posterior(spec, std::vector<double>{1.0});
  CHECK(post.mean[0] == 0.5);
  CHECK(post.var[0] == 0.5);
}

TEST_CASE("degenerate coordinates") {
  const Spectrum spec = Spectrum::from_sequences({0.0, 2.0}, {1.0, 0.0}, 10.0);
  const PosteriorSummary post = coordinate_posterior(spec, std::vector<double>{3.0, 3.0});
  CHECK(post.mean[0] == 0.0);
  CHECK(post.var[0] == 0.0);
  CHECK(post.mean[1] == 0.0);
  CHECK(post.var[1] == 2.0);
  CHECK_THROWS_AS(coordinate_posterior(spec, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("posterior moments agree with grid integration") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const double n = log_uniform(gen, 1e-3, 1e3);
    const double lam = log_uniform(gen, 1e-3, 1e3);
    const double kap = log_uniform(gen, 1e-3, 1e3);
    const double y = log_uniform(gen, 1e-3, 1e3) * (trial % 2 ? 1.0 : -1.0);
    const PosteriorSummary post =
        coordinate_posterior(Spectrum::from_sequences({lam}, {kap}, n), std::vector<double>{y});
    const oracle::Moments ref = oracle::grid_posterior(n, lam, kap, y);
    CHECK(std::abs(post.mean[0] - ref.mean) <= 1e-9);
    CHECK(std::abs(post.var[0] - ref.var) <= 1e-9);
  }
}

TEST_CASE("shrinkage and variance bounds") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 50; ++trial) {
    const RandomProblem prob = random_problem(gen, 40);
    Sequence y(40);
    for (auto& v : y) v = 10.0 * z(gen);
    const PosteriorSummary post = coordinate_posterior(prob.spec, y);
    for (std::size_t i = 0; i < 40; ++i) {
      const double lam = prob.spec.lambda[i], kap = prob.spec.kappa[i], n = prob.spec.n;
      CHECK(post.var[i] >= 0.0);
      CHECK(post.var[i] > 0.0);
      CHECK(post.var[i] <= lam);
      CHECK(post.var[i] <= std::min(lam, 1.0 / (n * kap * kap)) * (1 + 1e-14));
      CHECK(std::abs(post.mean[i]) <= std::abs(y[i]) / kap * (1 + 1e-14));
    }
  }
}

TEST_CASE("risk decomposition limits") {
  const Sequence lam{1.0, 0.5, 0.25};
  const Sequence kap{1.0, 0.5, 0.1};
  const Sequence mu{1.0, -2.0, 3.0};
  const RiskDecomposition none = risk_decomposition(Spectrum::from_sequences(lam, kap, 0.0), mu);
  CHECK(none.sq_bias == doctest::Approx(14.0));
  CHECK(none.variance == 0.0);
  CHECK(none.spread == doctest::Approx(1.75));

  const RiskDecomposition zero =
      risk_decomposition(Spectrum::from_sequences(lam, kap, 10.0), Sequence(3, 0.0));
  CHECK(zero.sq_bias == 0.0);
  CHECK(zero.variance > 0.0);
  CHECK(zero.spread > zero.variance);
}

TEST_CASE("analytic risk matches Monte Carlo") {
  const std::size_t K = 300;
  const PriorSpec prior(1.0, 1.0, K);
  const ForwardSpec fwd = ForwardSpec::polynomial(1.0, K);
  const Truth truth = make_truth(truth_pattern::PaperDemo{}, K);
  for (double n : {1e2, 1e4}) {
    const Spectrum spec = Spectrum::make(prior, fwd, n);
    const RiskDecomposition rd = risk_decomposition(spec, truth.coeffs);
    std::vector<double> loss(10000);
    for (std::size_t r = 0; r < loss.size(); ++r) {
      const Observation obs = generate_observation(derive_seed(99, r), truth, fwd, n);
      const PosteriorSummary post = coordinate_posterior(spec, obs.y);
      double acc = 0.0;
      for (std::size_t i = 0; i < K; ++i) acc += std::pow(post.mean[i] - truth.coeffs[i], 2);
      loss[r] = acc;
    }
    const MeanEstimate m = mean_with_stderr(loss);
    CHECK(std::abs(m.mean - rd.risk()) < 3.0 * m.std_error);
  }
}

TEST_CASE("functional marginal") {
  const PriorSpec prior(1.0, 1.0, 30);
  const ForwardSpec fwd = ForwardSpec::polynomial(1.0, 30);
  const Truth truth = make_truth(truth_pattern::PaperDemo{}, 30);
  const Observation obs = generate_observation(4, truth, fwd, 50.0);
  const PosteriorSummary post = coordinate_posterior(prior, fwd, obs);

  Functional e1{Sequence(30, 0.0), 0.0, std::nullopt};
  e1.coeffs[0] = 1.0;
  const FunctionalMarginal m1 = functional_marginal(post, e1);
  CHECK(m1.mean == post.mean[0]);
  CHECK(m1.s_n_sq == post.var[0]);

  const FunctionalMarginal m0 = functional_marginal(post, Functional{Sequence(30, 0.0), 0.0, {}});
  CHECK(m0.mean == 0.0);
  CHECK(m0.s_n_sq == 0.0);

  Functional a{Sequence(30), 0.0, {}}, b{Sequence(30), 0.0, {}}, ab{Sequence(30), 0.0, {}};
  for (std::size_t i = 0; i < 30; ++i) {
    a.coeffs[i] = std::cos(i + 1.0);
    b.coeffs[i] = std::pow(i + 1.0, -0.7);
    ab.coeffs[i] = a.coeffs[i] + b.coeffs[i];
  }
  const auto ma = functional_marginal(post, a), mb = functional_marginal(post, b);
  CHECK(functional_marginal(post, ab).mean == doctest::Approx(ma.mean + mb.mean).epsilon(1e-13));
  Functional a3 = a;
  for (auto& v : a3.coeffs) v *= -3.0;
  CHECK(functional_marginal(post, a3).mean == doctest::Approx(-3.0 * ma.mean).epsilon(1e-13));
  CHECK(functional_marginal(post, a3).s_n_sq == doctest::Approx(9.0 * ma.s_n_sq).epsilon(1e-13));

  const Spectrum spec = Spectrum::make(prior, fwd, 50.0);
  CHECK(ma.s_n_sq == doctest::Approx(functional_spread(spec, a.coeffs)).epsilon(1e-14));
  CHECK(a.prior_variance(prior.eigenvalues()) > ma.s_n_sq);

  // Sampling oracle for s_n^2.
  const auto draws = posterior_draws(17, post, 100000);
  std::vector<double> lx(draws.size());
  for (std::size_t d = 0; d < draws.size(); ++d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 30; ++i) acc += a.coeffs[i] * draws[d][i];
    lx[d] = acc;
  }
  const MeanEstimate lm = mean_with_stderr(lx);
  double ss = 0.0;
  for (double v : lx) ss += (v - lm.mean) * (v - lm.mean);
  const double var = ss / (lx.size() - 1.0);
  CHECK(std::abs(var - ma.s_n_sq) < 3.0 * ma.s_n_sq * std::sqrt(2.0 / (lx.size() - 1.0)));
  CHECK(std::abs(lm.mean - ma.mean) < 3.0 * lm.std_error);
}

TEST_CASE("functional bias and variance") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomProblem prob = random_problem(gen, 60);
    const FunctionalBiasVar bv = functional_bias_var(prob.spec, prob.truth, prob.l);
    const double s_sq = functional_spread(prob.spec, prob.l);
    CHECK(bv.t_n_sq <= s_sq);
    CHECK(functional_bias_var(prob.spec, Sequence(60, 0.0), prob.l).bias == 0.0);
  }

  // Cauchy-Schwarz: bias^2 <= |mu|_beta^2 sum_i l_i^2 i^(-2 beta)/(1+s_i)^2.
  const std::size_t K = 500;
  const double beta = 1.2;
  const PriorSpec prior(0.8, 1.0, K);
  const ForwardSpec fwd = ForwardSpec::polynomial(1.0, K);
  const Truth truth = make_truth(truth_pattern::PaperDemo{}, K);
  Functional l{Sequence(K), 0.3, {}};
  for (std::size_t i = 0; i < K; ++i) l.coeffs[i] = std::pow(i + 1.0, -0.8);
  for (double n : {1e2, 1e4, 1e6}) {
    const Spectrum spec = Spectrum::make(prior, fwd, n);
    const double bias = functional_bias_var(prior, fwd, truth, l, n).bias;
    double series = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      const double x = i + 1.0;
      series += l.coeffs[i] * l.coeffs[i] * std::pow(x, -2 * beta) /
                std::pow(1.0 + spec.signal[i], 2);
    }
    CHECK(bias * bias <= std::pow(sobolev_norm(truth.coeffs, beta), 2) * series);
  }
}

TEST_CASE("series identities against direct formulas") {
  std::mt19937_64 gen(13);
  const RandomProblem prob = random_problem(gen, 80);
  const RiskDecomposition rd = risk_decomposition(prob.spec, prob.truth);
  const FunctionalBiasVar bv = functional_bias_var(prob.spec, prob.truth, prob.l);
  long double b = 0, v = 0, s = 0, fb = 0, ft = 0, fs = 0;
  for (std::size_t i = 0; i < 80; ++i) {
    const long double lam = prob.spec.lambda[i], k = prob.spec.kappa[i], n = prob.spec.n;
    const long double den = 1 + n * lam * k * k;
    b += prob.truth[i] * prob.truth[i] / (den * den);
    v += n * lam * lam * k * k / (den * den);
    s += lam / den;
    fb -= prob.l[i] * prob.truth[i] / den;
    ft += prob.l[i] * prob.l[i] * n * lam * lam * k * k / (den * den);
    fs += prob.l[i] * prob.l[i] * lam / den;
  }
  CHECK(rd.sq_bias == doctest::Approx(static_cast<double>(b)).epsilon(1e-13));
  CHECK(rd.variance == doctest::Approx(static_cast<double>(v)).epsilon(1e-13));
  CHECK(rd.spread == doctest::Approx(static_cast<double>(s)).epsilon(1e-13));
  CHECK(bv.bias == doctest::Approx(static_cast<double>(fb)).epsilon(1e-12));
  CHECK(bv.t_n_sq == doctest::Approx(static_cast<double>(ft)).epsilon(1e-13));
  CHECK(functional_spread(prob.spec, prob.l) == doctest::Approx(static_cast<double>(fs)).epsilon(1e-13));
}

TEST_CASE("posterior draws") {
  PosteriorSummary fixed{{1.0, -2.0}, {0.0, 0.0}, 1.0, 2};
  for (const auto& d : posterior_draws(3, fixed, 5)) CHECK(d == fixed.mean);
  CHECK_THROWS(posterior_draws(3, fixed, 0));

  PosteriorSummary post{{0.5, -1.0, 2.0}, {0.25, 1.0, 4.0}, 1.0, 3};
  const auto a = posterior_draws(21, post, 100000);
  CHECK(a == posterior_draws(21, post, 100000));
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> xs(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) xs[d] = a[d][i];
    const MeanEstimate m = mean_with_stderr(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    const double var = ss / (xs.size() - 1.0);
    CHECK(std::abs(m.mean - post.mean[i]) < 3.0 * m.std_error);
    CHECK(std::abs(var - post.var[i]) < 3.0 * post.var[i] * std::sqrt(2.0 / (xs.size() - 1.0)));
  }
}

}  // TEST_SUITE
