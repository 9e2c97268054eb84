#include "seqbayes/credible.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "seqbayes/errors.hpp"
#include "seqbayes/numerics.hpp"

namespace seqbayes {
namespace {

constexpr std::size_t kChunk = 4096;

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
}

}  // namespace

EigenWeights credible_weights(const PriorSpec& prior, const ForwardSpec& fwd, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("credible_weights: n must be positive");
  return credible_weights(Spectrum::make(prior, fwd, n));
}

EigenWeights credible_weights(const Spectrum& spec) {
  EigenWeights w;
  w.n = spec.n;
  w.s_w.resize(spec.size());
  w.t_w.resize(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double denom = 1.0 + spec.signal[k];
    w.s_w[k] = spec.lambda[k] / denom;
    w.t_w[k] = (spec.signal[k] / denom) * w.s_w[k];
  }
  return w;
}

Sequence weighted_chi_square_draws(std::span<const double> weights,
                                   std::span<const double> offset, const McOptions& mc) {
  if (!offset.empty() && offset.size() != weights.size()) {
    throw DimensionError("weighted_chi_square_draws: offset length differs from weights");
  }
  // Coordinates with zero weight contribute the constant offset^2.
  std::vector<double> scale, shift;
  double constant = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] < 0.0) throw std::invalid_argument("weights must be nonnegative");
    const double c = offset.empty() ? 0.0 : offset[k];
    if (weights[k] == 0.0) {
      constant += c * c;
    } else {
      scale.push_back(std::sqrt(weights[k]));
      shift.push_back(c);
    }
  }

  Sequence out(mc.samples);
  const std::size_t chunks = (mc.samples + kChunk - 1) / kChunk;
  parallel_for(
      chunks,
      [&](std::size_t c) {
        NormalStream normal(derive_seed(mc.seed, c));
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(mc.samples, begin + kChunk);
        for (std::size_t s = begin; s < end; ++s) {
          double acc = constant;
          for (std::size_t k = 0; k < scale.size(); ++k) {
            const double x = scale[k] * normal() + shift[k];
            acc += x * x;
          }
          out[s] = acc;
        }
      },
      mc.workers);
  return out;
}

BallRadius ball_radius(std::span<const double> weights, double gamma, QuantileMethod method,
                       const McOptions& mc) {
  check_gamma(gamma);
  CompensatedSum sum, sum_sq;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("ball_radius: weights must be nonnegative");
    sum += w;
    sum_sq += w * w;
  }
  if (sum.value() == 0.0) return {0.0, true};

  if (method == QuantileMethod::Satterthwaite) {
    // c * chi2_k with c k = sum w and 2 c^2 k = 2 sum w^2.
    const double scale = sum_sq.value() / sum.value();
    const double df = sum.value() * sum.value() / sum_sq.value();
    return {std::sqrt(scale * chi_squared_quantile(df, 1.0 - gamma)), false};
  }

  if (mc.samples < 10000) {
    throw std::invalid_argument("ball_radius: Monte-Carlo quantile needs at least 1e4 samples");
  }
  Sequence draws = weighted_chi_square_draws(weights, {}, mc);
  const auto m = static_cast<double>(draws.size());
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - gamma) * m));
  rank = std::clamp<std::size_t>(rank, 1, draws.size()) - 1;
  std::nth_element(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(rank), draws.end());
  return {std::sqrt(draws[rank]), false};
}

BallRadius ball_radius(const EigenWeights& w, double gamma, QuantileMethod method,
                       const McOptions& mc) {
  return ball_radius(w.s_w, gamma, method, mc);
}

const char* to_string(CoverageMethod m) noexcept {
  return m == CoverageMethod::ExactNormal ? "exact" : "montecarlo";
}

CoverageReport ball_coverage(std::span<const double> t_w, std::span<const double> bias, double r,
                             const McOptions& mc) {
  if (!bias.empty() && bias.size() != t_w.size()) {
    throw DimensionError("ball_coverage: bias length differs");
  }
  if (!(r >= 0.0)) throw std::invalid_argument("ball_coverage: radius must be nonnegative");
  if (mc.samples < 1) throw std::invalid_argument("ball_coverage: need at least one sample");
  const Sequence draws = weighted_chi_square_draws(t_w, bias, mc);
  const double r_sq = r * r;
  std::size_t hits = 0;
  for (double d : draws) hits += d <= r_sq ? 1 : 0;
  const auto m = static_cast<double>(draws.size());
  CoverageReport rep;
  rep.radius_or_halfwidth = r;
  rep.coverage = static_cast<double>(hits) / m;
  rep.method = CoverageMethod::MonteCarlo;
  rep.mc_samples = mc.samples;
  rep.mc_seed = mc.seed;
  rep.mc_stderr = std::sqrt(rep.coverage * (1.0 - rep.coverage) / m);
  return rep;
}

double interval_coverage(double bias, double s_n, double t_n, double gamma) {
  check_gamma(gamma);
  if (!(s_n > 0.0 && t_n > 0.0)) {
    throw std::invalid_argument("interval_coverage: s_n and t_n must be positive");
  }
  const double z = normal_quantile(gamma / 2.0);  // negative
  const double upper = normal_cdf((-z * s_n - bias) / t_n);
  const double lower = normal_cdf((z * s_n - bias) / t_n);
  return std::clamp(upper - lower, 0.0, 1.0);
}

CoverageReport interval_coverage_report(double bias, double s_n, double t_n, double gamma) {
  CoverageReport rep;
  rep.radius_or_halfwidth = -normal_quantile(gamma / 2.0) * s_n;
  rep.coverage = interval_coverage(bias, s_n, t_n, gamma);
  rep.method = CoverageMethod::ExactNormal;
  return rep;
}

double sup_bias(const Spectrum& spec, std::span<const double> l, double beta) {
  if (l.size() != spec.size()) throw DimensionError("sup_bias: representer length differs");
  CompensatedSum acc;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double denom = 1.0 + spec.signal[k];
    acc += l[k] * l[k] * std::pow(static_cast<double>(k + 1), -2.0 * beta) / (denom * denom);
  }
  return std::sqrt(acc.value());
}

double gaussian_tv_distance(double s, double t) {
  if (!(s > 0.0 && t > 0.0)) throw std::invalid_argument("gaussian_tv_distance: sd must be positive");
  if (s == t) return 0.0;
  const double inv_root_2pi = 1.0 / std::sqrt(2.0 * M_PI);
  auto half_abs_diff = [&](double x) {
    const double ps = inv_root_2pi / s * std::exp(-0.5 * (x / s) * (x / s));
    const double pt = inv_root_2pi / t * std::exp(-0.5 * (x / t) * (x / t));
    return 0.5 * std::abs(ps - pt);
  };
  // The integrand is even with kinks where the densities cross; integrate
  // the positive half-line piecewise between kinks.
  const double hi = 10.0 * std::max(s, t);
  const double cross = s * t * std::sqrt(2.0 * std::log(std::max(s, t) / std::min(s, t)) /
                                         std::abs(s * s - t * t));
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  double total = 0.0;
  if (cross < hi) {
    total += Quad::integrate(half_abs_diff, 0.0, cross, 15, 1e-10);
    total += Quad::integrate(half_abs_diff, cross, hi, 15, 1e-10);
  } else {
    total += Quad::integrate(half_abs_diff, 0.0, hi, 15, 1e-10);
  }
  return std::clamp(2.0 * total, 0.0, 1.0);
}

BvmDiagnostics bvm_diagnostics(const PriorSpec& prior, const ForwardSpec& fwd, const Functional& l,
                               double n, double beta) {
  const Spectrum spec = Spectrum::make(prior, fwd, n);
  const double s_sq = functional_spread(spec, l.coeffs);
  if (!(s_sq > 0.0)) throw DegenerateInputError("bvm_diagnostics: posterior spread s_n is zero");
  const Sequence zero(spec.size(), 0.0);
  const double t_sq = functional_bias_var(spec, zero, l.coeffs).t_n_sq;
  BvmDiagnostics d;
  d.s_n = std::sqrt(s_sq);
  d.t_n = std::sqrt(t_sq);
  d.ratio = t_sq > 0.0 ? d.s_n / d.t_n : std::numeric_limits<double>::infinity();
  d.sup_bias = sup_bias(spec, l.coeffs, beta);
  d.tv = t_sq > 0.0 ? gaussian_tv_distance(d.s_n, d.t_n) : 1.0;
  return d;
}

double separation_ratio(std::span<const double> weights) {
  CompensatedSum sum, sum_sq;
  for (double w : weights) {
    sum += w;
    sum_sq += w * w;
  }
  if (sum.value() == 0.0) return 0.0;
  return std::sqrt(2.0 * sum_sq.value()) / sum.value();
}

}  // namespace seqbayes
