#pragma once

// Spectral description of a mildly ill-posed linear inverse problem.
//
// Everything lives in the shared eigenbasis of the prior covariance and of
// K^T K: the prior is N(0, diag(lambda)), the forward operator acts by
// multiplication with the singular values kappa, and the data are
//
//   Y_i = kappa_i * mu_i + Z_i / sqrt(n),   Z_i iid N(0,1).
//
// Indices are 1-based in formulas and in the accessors that take an index;
// stored sequences are 0-based vectors of length trunc.

#include <cstddef>
#include <span>
#include <string>
#include <variant>

#include "seqbayes/numerics.hpp"
#include "seqbayes/random.hpp"

namespace seqbayes {

/// Gaussian prior with eigenvalues lambda_i = tau^2 * i^(-1-2 alpha).
class PriorSpec {
 public:
  PriorSpec(double alpha, double tau, std::size_t trunc);

  double alpha() const noexcept { return alpha_; }
  double tau() const noexcept { return tau_; }
  std::size_t trunc() const noexcept { return trunc_; }

  double eigenvalue(std::size_t i) const;
  Sequence eigenvalues() const;

 private:
  double alpha_;
  double tau_;
  std::size_t trunc_;
};

enum class KappaKind { ExactPolynomial, Volterra, Custom };

const char* to_string(KappaKind kind) noexcept;
KappaKind kappa_kind_from_string(const std::string& name);

/// Singular values of the forward operator.
class ForwardSpec {
 public:
  /// kappa_i = i^(-p).
  static ForwardSpec polynomial(double p, std::size_t trunc);
  /// kappa_i = 1/((i - 1/2) pi); p = 1.
  static ForwardSpec volterra(std::size_t trunc);
  /// Caller-supplied strictly positive singular values with declared degree p.
  static ForwardSpec custom(Sequence kappa, double p);

  KappaKind kind() const noexcept { return kind_; }
  double p() const noexcept { return p_; }
  std::size_t trunc() const noexcept { return kappa_.size(); }

  double singular_value(std::size_t i) const;
  const Sequence& singular_values() const noexcept { return kappa_; }

  /// Smallest C >= 1 with C^-1 i^-p <= kappa_i <= C i^-p over the stored range.
  double bound_constant() const;

 private:
  ForwardSpec(KappaKind kind, double p, Sequence kappa);

  KappaKind kind_;
  double p_;
  Sequence kappa_;
};

/// Coefficients of the true parameter and its declared Sobolev regularity.
struct Truth {
  Sequence coeffs;
  double beta = 1.0;

  std::size_t trunc() const noexcept { return coeffs.size(); }
};

/// Spectral data at inverse noise variance n.
struct Observation {
  double n = 1.0;
  Sequence y;

  std::size_t trunc() const noexcept { return y.size(); }
};

/// sqrt(sum_i c_i^2 i^(2s)) with compensated summation.
double sobolev_norm(std::span<const double> coeffs, double s);

/// Y_i = kappa_i mu_{0,i} + n^(-1/2) Z_i, with Z drawn from `seed`.
Observation generate_observation(Seed seed, const Truth& truth,
                                 const ForwardSpec& fwd, double n);

namespace truth_pattern {
/// mu_{0,i} = i^(-3/2) sin(i), declared beta = 1.
struct PaperDemo {};
/// mu_{0,i} = i^(-1/2-beta-eps).
struct PolynomialSmooth {
  double beta = 1.0;
  double eps = 0.01;
};
/// Explicit coefficients; zero-padded or cut to the requested length.
struct Custom {
  Sequence coeffs;
  double beta = 1.0;
};
}  // namespace truth_pattern

using TruthPattern = std::variant<truth_pattern::PaperDemo,
                                  truth_pattern::PolynomialSmooth,
                                  truth_pattern::Custom>;

Truth make_truth(const TruthPattern& pattern, std::size_t trunc);

/// The unit-norm truth that attains the worst-case bias of the linear
/// functional with representer l (equality in Cauchy-Schwarz):
/// mu_i proportional to i^(-2 beta) l_i / (1 + n lambda_i kappa_i^2).
Truth extremal_truth_functional(std::span<const double> l, double beta,
                                const PriorSpec& prior, const ForwardSpec& fwd,
                                double n);

/// Truth with a single nonzero coordinate whose squared posterior-mean bias
/// equals target_bias_sq. The coordinate is round(rho_n) when
/// beta < 1 + 2 alpha + 2p, and 1 otherwise.
Truth spike_truth_ball(const PriorSpec& prior, const ForwardSpec& fwd, double n,
                       double beta, double target_bias_sq);

/// Index used by spike_truth_ball.
std::size_t spike_index(const PriorSpec& prior, double p, double n, double beta);

/// rho_n = (n tau^2)^(1/(1+2 alpha+2p)).
double effective_frequency(double n, double tau, double alpha, double p);

/// max(1000, ceil(10 rho_n)).
std::size_t default_trunc(double n, double tau, double alpha, double p);

}  // namespace seqbayes
