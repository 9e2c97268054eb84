#include "seqbayes/numerics.hpp"

#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace seqbayes {

double compensated_sum(std::span<const double> xs) {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("normal_quantile: probability must lie in (0,1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double chi_squared_quantile(double df, double p) {
  if (!(df > 0.0)) throw std::domain_error("chi_squared_quantile: df must be positive");
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("chi_squared_quantile: probability must lie in (0,1)");
  }
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), p);
}

LineFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_loglog: need at least two paired points");
  }
  const auto m = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0 && y[k] > 0.0)) {
      throw std::invalid_argument("fit_loglog: values must be positive");
    }
    sx += std::log(x[k]);
    sy += std::log(y[k]);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[k]) - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

MeanEstimate mean_with_stderr(std::span<const double> xs) {
  MeanEstimate est;
  if (xs.empty()) return est;
  const auto m = static_cast<double>(xs.size());
  est.mean = compensated_sum(xs) / m;
  if (xs.size() < 2) return est;
  CompensatedSum ss;
  for (double x : xs) ss.add((x - est.mean) * (x - est.mean));
  est.std_error = std::sqrt(ss.value() / (m - 1.0) / m);
  return est;
}

}  // namespace seqbayes
