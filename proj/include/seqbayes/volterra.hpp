#pragma once

// The Volterra operator K mu(x) = int_0^x mu(s) ds on L^2[0,1].
//
// Singular system: kappa_i = 1/((i - 1/2) pi),
//   e_i(x) = sqrt(2) cos((i - 1/2) pi x),   f_i(x) = sqrt(2) sin((i - 1/2) pi x),
// with K e_i = kappa_i f_i.
//
// Credible bands here are pointwise marginal intervals, one per grid point.
// They are not simultaneous bands.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqbayes/model.hpp"
#include "seqbayes/posterior.hpp"
#include "seqbayes/random.hpp"

namespace seqbayes {

double volterra_kappa(std::size_t i);
double basis_e(std::size_t i, double x);
double basis_f(std::size_t i, double x);

struct Band {
  Sequence lower;
  Sequence upper;
};

struct GridFunction {
  Sequence xs;
  Sequence values;
  std::optional<Band> band;

  /// Mean of upper - lower over the grid; 0 without a band.
  double mean_band_width() const;
  /// Fraction of grid points where `f` lies inside the band.
  double band_contains_fraction(std::span<const double> f) const;
};

/// `points` equispaced points covering [0,1] inclusive.
Sequence uniform_grid(std::size_t points);

/// Point evaluation mu -> mu(x): l_i = e_i(x), declared q = -1/2.
Functional point_functional(double x, std::size_t trunc);

/// values_j = sum_i coeffs_i e_i(x_j).
GridFunction synthesize(std::span<const double> coeffs, std::span<const double> xs);

/// Posterior mean curve with pointwise central (1-gamma) bands.
GridFunction credible_band(const PriorSpec& prior, const ForwardSpec& fwd, const Observation& obs,
                           std::span<const double> xs, double gamma);

struct FigureDemoConfig {
  std::vector<double> n_values{1000.0};
  std::vector<double> alphas{1.0, 5.0};
  /// Panels per (n, alpha) setting.
  std::size_t replicates = 5;
  Seed seed = 20130101;
  std::size_t grid_points = 401;
  std::size_t draws = 20;
  std::size_t trunc = 1000;
  double tau = 1.0;
  double gamma = 0.05;

  /// Rejects unknown keys with ConfigError.
  static FigureDemoConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  bool operator==(const FigureDemoConfig&) const = default;
};

struct FigureDemoPanel {
  std::size_t panel = 0;
  double n = 0.0;
  double alpha = 0.0;
  std::size_t replicate = 0;
  Seed seed = 0;
  GridFunction truth;
  GridFunction posterior;  ///< mean with band
  std::vector<Sequence> draws;  ///< synthesized on the grid
};

/// One panel per (n, alpha, replicate); panels are ordered n-major, then
/// alpha, then replicate, and every panel draws fresh data from its own seed.
std::vector<FigureDemoPanel> figure_demo_panels(const FigureDemoConfig& cfg, unsigned workers = 0);

/// Writes the panel CSV (panel, x, truth, post_mean, band_lo, band_hi,
/// draw_1..draw_k) to `csv_path`.
void write_figure_demo_csv(const std::vector<FigureDemoPanel>& panels,
                           const std::filesystem::path& csv_path);

/// Per-panel metadata for the manifest.
nlohmann::json figure_demo_panel_index(const std::vector<FigureDemoPanel>& panels);

/// Runs the demo and writes volterra_demo.csv and volterra_demo_manifest.json
/// into out_dir. Returns the paths written.
std::vector<std::filesystem::path> figure_demo(const FigureDemoConfig& cfg,
                                               const std::filesystem::path& out_dir);

}  // namespace seqbayes
