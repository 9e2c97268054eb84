#include "seqbayes/volterra.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <stdexcept>

#include "seqbayes/errors.hpp"
#include "seqbayes/io.hpp"
#include "seqbayes/numerics.hpp"

namespace seqbayes {
namespace {

constexpr double kPi = std::numbers::pi;

void check_index(std::size_t i) {
  if (i < 1) throw std::invalid_argument("Volterra basis index must be at least 1");
}

void check_unit(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("Volterra basis argument outside [0,1]");
}

void check_grid(std::span<const double> xs) {
  for (std::size_t j = 0; j < xs.size(); ++j) {
    check_unit(xs[j]);
    if (j > 0 && !(xs[j] > xs[j - 1])) {
      throw std::invalid_argument("grid must be strictly increasing");
    }
  }
}

// Basis values e_i(x_j), row-major by grid point.
std::vector<double> basis_table(std::size_t trunc, std::span<const double> xs) {
  std::vector<double> table(trunc * xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    for (std::size_t i = 1; i <= trunc; ++i) table[j * trunc + i - 1] = basis_e(i, xs[j]);
  }
  return table;
}

GridFunction synthesize_with(const std::vector<double>& table, std::span<const double> coeffs,
                             std::span<const double> xs) {
  GridFunction g;
  g.xs.assign(xs.begin(), xs.end());
  g.values.resize(xs.size());
  const std::size_t trunc = coeffs.size();
  for (std::size_t j = 0; j < xs.size(); ++j) {
    CompensatedSum acc;
    for (std::size_t k = 0; k < trunc; ++k) acc += coeffs[k] * table[j * trunc + k];
    g.values[j] = acc.value();
  }
  return g;
}

GridFunction band_with(const std::vector<double>& table, const PosteriorSummary& post,
                       std::span<const double> xs, double gamma) {
  GridFunction g = synthesize_with(table, post.mean, xs);
  const double z = -normal_quantile(gamma / 2.0);
  Band band;
  band.lower.resize(xs.size());
  band.upper.resize(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    CompensatedSum var;
    for (std::size_t k = 0; k < post.trunc; ++k) {
      const double e = table[j * post.trunc + k];
      var += post.var[k] * e * e;
    }
    const double half = z * std::sqrt(var.value());
    band.lower[j] = g.values[j] - half;
    band.upper[j] = g.values[j] + half;
  }
  g.band = std::move(band);
  return g;
}

}  // namespace

double volterra_kappa(std::size_t i) {
  check_index(i);
  return 1.0 / ((static_cast<double>(i) - 0.5) * kPi);
}

double basis_e(std::size_t i, double x) {
  check_index(i);
  check_unit(x);
  return std::numbers::sqrt2 * std::cos((static_cast<double>(i) - 0.5) * kPi * x);
}

double basis_f(std::size_t i, double x) {
  check_index(i);
  check_unit(x);
  return std::numbers::sqrt2 * std::sin((static_cast<double>(i) - 0.5) * kPi * x);
}

double GridFunction::mean_band_width() const {
  if (!band || xs.empty()) return 0.0;
  CompensatedSum acc;
  for (std::size_t j = 0; j < xs.size(); ++j) acc += band->upper[j] - band->lower[j];
  return acc.value() / static_cast<double>(xs.size());
}

double GridFunction::band_contains_fraction(std::span<const double> f) const {
  if (!band) throw std::logic_error("band_contains_fraction: no band");
  if (f.size() != xs.size()) throw DimensionError("band_contains_fraction: length differs");
  std::size_t inside = 0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    inside += (band->lower[j] <= f[j] && f[j] <= band->upper[j]) ? 1 : 0;
  }
  return static_cast<double>(inside) / static_cast<double>(xs.size());
}

Sequence uniform_grid(std::size_t points) {
  if (points < 2) throw std::invalid_argument("uniform_grid: need at least two points");
  Sequence xs(points);
  for (std::size_t j = 0; j < points; ++j) {
    xs[j] = static_cast<double>(j) / static_cast<double>(points - 1);
  }
  return xs;
}

Functional point_functional(double x, std::size_t trunc) {
  check_unit(x);
  Functional l;
  l.coeffs.resize(trunc);
  for (std::size_t i = 1; i <= trunc; ++i) l.coeffs[i - 1] = basis_e(i, x);
  l.q = -0.5;
  l.sv_note = "bounded oscillation, |l_i| <= sqrt(2)";
  return l;
}

GridFunction synthesize(std::span<const double> coeffs, std::span<const double> xs) {
  check_grid(xs);
  return synthesize_with(basis_table(coeffs.size(), xs), coeffs, xs);
}

GridFunction credible_band(const PriorSpec& prior, const ForwardSpec& fwd, const Observation& obs,
                           std::span<const double> xs, double gamma) {
  if (fwd.kind() != KappaKind::Volterra) {
    throw std::invalid_argument("credible_band: forward operator must be the Volterra operator");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
  check_grid(xs);
  const PosteriorSummary post = coordinate_posterior(prior, fwd, obs);
  return band_with(basis_table(post.trunc, xs), post, xs, gamma);
}

// ---------------------------------------------------------------------------
// Demo panels

FigureDemoConfig FigureDemoConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> keys{"n_values", "alphas", "replicates", "seed",
                                          "grid_points", "draws", "trunc", "tau", "gamma"};
  if (!j.is_object()) throw ConfigError("volterra demo config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!keys.contains(key)) throw ConfigError("unknown volterra demo key '" + key + "'");
  }
  FigureDemoConfig cfg;
  try {
    cfg.n_values = j.value("n_values", cfg.n_values);
    cfg.alphas = j.value("alphas", cfg.alphas);
    cfg.replicates = j.value("replicates", cfg.replicates);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.grid_points = j.value("grid_points", cfg.grid_points);
    cfg.draws = j.value("draws", cfg.draws);
    cfg.trunc = j.value("trunc", cfg.trunc);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.gamma = j.value("gamma", cfg.gamma);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("volterra demo config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json FigureDemoConfig::to_json() const {
  return {{"n_values", n_values}, {"alphas", alphas}, {"replicates", replicates},
          {"seed", seed},         {"grid_points", grid_points}, {"draws", draws},
          {"trunc", trunc},       {"tau", tau},       {"gamma", gamma}};
}

void FigureDemoConfig::validate() const {
  if (n_values.empty() || alphas.empty()) throw ConfigError("n_values and alphas must be non-empty");
  for (double n : n_values) {
    if (!(n > 0.0)) throw ConfigError("n_values must be positive");
  }
  for (double a : alphas) {
    if (!(a > 0.0)) throw ConfigError("alphas must be positive");
  }
  if (replicates < 1) throw ConfigError("replicates must be at least 1");
  if (grid_points < 2) throw ConfigError("grid_points must be at least 2");
  if (trunc < 1) throw ConfigError("trunc must be at least 1");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
}

std::vector<FigureDemoPanel> figure_demo_panels(const FigureDemoConfig& cfg, unsigned workers) {
  cfg.validate();
  const Sequence xs = uniform_grid(cfg.grid_points);
  const std::vector<double> table = basis_table(cfg.trunc, xs);
  const Truth truth = make_truth(truth_pattern::PaperDemo{}, cfg.trunc);
  const GridFunction truth_curve = synthesize_with(table, truth.coeffs, xs);
  const ForwardSpec fwd = ForwardSpec::volterra(cfg.trunc);

  std::vector<FigureDemoPanel> panels;
  for (double n : cfg.n_values) {
    for (double alpha : cfg.alphas) {
      for (std::size_t r = 0; r < cfg.replicates; ++r) {
        FigureDemoPanel p;
        p.panel = panels.size();
        p.n = n;
        p.alpha = alpha;
        p.replicate = r;
        p.seed = derive_seed(cfg.seed, p.panel);
        panels.push_back(std::move(p));
      }
    }
  }

  parallel_for(
      panels.size(),
      [&](std::size_t k) {
        FigureDemoPanel& p = panels[k];
        const PriorSpec prior(p.alpha, cfg.tau, cfg.trunc);
        const Observation obs = generate_observation(derive_seed(p.seed, 0), truth, fwd, p.n);
        const PosteriorSummary post = coordinate_posterior(prior, fwd, obs);
        p.truth = truth_curve;
        p.posterior = band_with(table, post, xs, cfg.gamma);
        if (cfg.draws > 0) {
          for (const Sequence& d : posterior_draws(derive_seed(p.seed, 1), post, cfg.draws)) {
            p.draws.push_back(synthesize_with(table, d, xs).values);
          }
        }
      },
      workers);
  return panels;
}

void write_figure_demo_csv(const std::vector<FigureDemoPanel>& panels,
                           const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
  const std::size_t k = panels.empty() ? 0 : panels.front().draws.size();
  out << "panel,x,truth,post_mean,band_lo,band_hi";
  for (std::size_t d = 1; d <= k; ++d) out << ",draw_" << d;
  out << '\n';
  for (const FigureDemoPanel& p : panels) {
    const GridFunction& g = p.posterior;
    for (std::size_t j = 0; j < g.xs.size(); ++j) {
      out << p.panel << ',' << format_double(g.xs[j]) << ',' << format_double(p.truth.values[j])
          << ',' << format_double(g.values[j]) << ',' << format_double(g.band->lower[j]) << ','
          << format_double(g.band->upper[j]);
      for (const Sequence& draw : p.draws) out << ',' << format_double(draw[j]);
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + csv_path.string());
}

nlohmann::json figure_demo_panel_index(const std::vector<FigureDemoPanel>& panels) {
  nlohmann::json arr = nlohmann::json::array();
  for (const FigureDemoPanel& p : panels) {
    arr.push_back({{"panel", p.panel},
                   {"n", p.n},
                   {"alpha", p.alpha},
                   {"replicate", p.replicate},
                   {"seed", p.seed},
                   {"mean_band_width", p.posterior.mean_band_width()},
                   {"truth_inside_fraction", p.posterior.band_contains_fraction(p.truth.values)}});
  }
  return arr;
}

std::vector<std::filesystem::path> figure_demo(const FigureDemoConfig& cfg,
                                               const std::filesystem::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  const std::string started_at = utc_timestamp();
  const auto panels = figure_demo_panels(cfg);
  std::filesystem::create_directories(out_dir);
  const auto csv = out_dir / "volterra_demo.csv";
  write_figure_demo_csv(panels, csv);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  nlohmann::json manifest{{"config", cfg.to_json()},
                          {"master_seed", cfg.seed},
                          {"code_version", code_version()},
                          {"started_at", started_at},
                          {"wall_seconds", wall},
                          {"panels", figure_demo_panel_index(panels)}};
  const auto manifest_path = out_dir / "volterra_demo_manifest.json";
  std::ofstream mout(manifest_path);
  if (!mout) throw std::runtime_error("cannot open " + manifest_path.string() + " for writing");
  mout << manifest.dump(2) << '\n';
  return {csv, manifest_path};
}

}  // namespace seqbayes
