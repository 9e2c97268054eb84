#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace seqbayes {

using Sequence = std::vector<double>;

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_sum(std::span<const double> xs);

/// Standard normal distribution function.
double normal_cdf(double x);

/// Lower standard normal quantile: normal_quantile(0.025) ~ -1.96.
double normal_quantile(double p);

/// Quantile of the chi-square distribution; df need not be an integer.
double chi_squared_quantile(double df, double p);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares fit of log(y) against log(x). All values must be positive.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// Sample mean and standard error of the mean.
struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};
MeanEstimate mean_with_stderr(std::span<const double> xs);

}  // namespace seqbayes
