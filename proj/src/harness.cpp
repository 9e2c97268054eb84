#include "seqbayes/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <boost/math/special_functions/zeta.hpp>

#include "CLI11.hpp"
#include "seqbayes/credible.hpp"
#include "seqbayes/errors.hpp"
#include "seqbayes/io.hpp"

namespace seqbayes {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const char* pattern_name(TruthSpec::Pattern p) {
  switch (p) {
    case TruthSpec::Pattern::PaperDemo: return "paper_demo";
    case TruthSpec::Pattern::PolynomialSmooth: return "polynomial_smooth";
    case TruthSpec::Pattern::Zero: return "zero";
    case TruthSpec::Pattern::Custom: return "custom";
  }
  return "?";
}

TruthSpec::Pattern pattern_from_string(const std::string& s) {
  if (s == "paper_demo") return TruthSpec::Pattern::PaperDemo;
  if (s == "polynomial_smooth") return TruthSpec::Pattern::PolynomialSmooth;
  if (s == "zero") return TruthSpec::Pattern::Zero;
  if (s == "custom") return TruthSpec::Pattern::Custom;
  throw ConfigError("unknown truth pattern '" + s + "'");
}

const char* functional_name(FunctionalSpec::Kind k) {
  switch (k) {
    case FunctionalSpec::Kind::Power: return "power";
    case FunctionalSpec::Kind::Exponential: return "exponential";
    case FunctionalSpec::Kind::Point: return "point";
    case FunctionalSpec::Kind::Custom: return "custom";
  }
  return "?";
}

FunctionalSpec::Kind functional_from_string(const std::string& s) {
  if (s == "power") return FunctionalSpec::Kind::Power;
  if (s == "exponential") return FunctionalSpec::Kind::Exponential;
  if (s == "point") return FunctionalSpec::Kind::Point;
  if (s == "custom") return FunctionalSpec::Kind::Custom;
  throw ConfigError("unknown functional kind '" + s + "'");
}

void check_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!keys.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

std::vector<double> decades(int from, int to) {
  std::vector<double> out;
  for (int e = from; e <= to; ++e) out.push_back(std::pow(10.0, e));
  return out;
}

ForwardSpec make_forward(const ExperimentConfig& cfg, std::size_t trunc) {
  if (cfg.forward == KappaKind::Volterra) return ForwardSpec::volterra(trunc);
  return ForwardSpec::polynomial(cfg.regime.p, trunc);
}

struct CellSetup {
  double n;
  double tau;
  std::size_t trunc;
  PriorSpec prior;
  ForwardSpec fwd;
  Spectrum spec;
  Seed seed;
};

CellSetup make_cell(const ExperimentConfig& cfg, std::size_t k) {
  const double n = cfg.n_grid[k];
  const double tau = cfg.regime.tau(n);
  const std::size_t trunc = cfg.trunc_for(n);
  PriorSpec prior(cfg.regime.alpha, tau, trunc);
  ForwardSpec fwd = make_forward(cfg, trunc);
  Spectrum spec = Spectrum::make(prior, fwd, n);
  return {n, tau, trunc, std::move(prior), std::move(fwd), std::move(spec),
          derive_seed(cfg.master_seed, k)};
}

void require_kind(const ExperimentConfig& cfg, ExperimentKind kind) {
  if (cfg.kind != kind) {
    throw ConfigError(std::string("config kind is '") + to_string(cfg.kind) + "', expected '" +
                      to_string(kind) + "'");
  }
  cfg.validate();
}

ResultTable new_table(const ExperimentConfig& cfg, std::vector<std::string> columns) {
  ResultTable table;
  table.columns = std::move(columns);
  table.metadata["kind"] = to_string(cfg.kind);
  table.metadata["config"] = cfg.to_json();
  table.metadata["code_version"] = code_version();
  table.metadata["summary"] = json::object();
  return table;
}

void finish_table(ResultTable& table, Clock::time_point start) {
  table.metadata["wall_seconds"] = seconds_since(start);
}

std::string csv_field(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* u = std::get_if<std::uint64_t>(&c)) return std::to_string(*u);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + "\"";
}

json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    return std::isfinite(*d) ? json(*d) : json(nullptr);
  }
  if (const auto* u = std::get_if<std::uint64_t>(&c)) return *u;
  return std::get<std::string>(c);
}

json slope_summary(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return nullptr;
  for (double v : y) {
    if (!(v > 0.0)) return nullptr;
  }
  return fit_loglog(x, y).slope;
}

ResultTable summarize_demo(const ExperimentConfig& cfg,
                           const std::vector<FigureDemoPanel>& panels) {
  ResultTable table = new_table(cfg, {"panel", "n", "alpha", "replicate", "mean_band_width",
                                      "truth_inside_fraction", "max_abs_error", "seed"});
  for (const auto& p : panels) {
    double err = 0.0;
    for (std::size_t j = 0; j < p.truth.values.size(); ++j) {
      err = std::max(err, std::abs(p.truth.values[j] - p.posterior.values[j]));
    }
    table.add_row({static_cast<std::uint64_t>(p.panel), p.n, p.alpha,
                   static_cast<std::uint64_t>(p.replicate), p.posterior.mean_band_width(),
                   p.posterior.band_contains_fraction(p.truth.values), err,
                   static_cast<std::uint64_t>(p.seed)});
  }
  json per_alpha = json::object();
  for (double a : cfg.demo.alphas) {
    double width = 0.0, inside = 0.0;
    std::size_t count = 0;
    for (const auto& p : panels) {
      if (p.alpha != a) continue;
      width += p.posterior.mean_band_width();
      inside += p.posterior.band_contains_fraction(p.truth.values);
      ++count;
    }
    per_alpha[format_double(a)] = {{"mean_band_width", width / static_cast<double>(count)},
                                   {"truth_inside_fraction", inside / static_cast<double>(count)}};
  }
  table.metadata["summary"]["by_alpha"] = per_alpha;
  return table;
}

}  // namespace

const char* to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::Contraction: return "contraction";
    case ExperimentKind::BallCoverage: return "coverage-ball";
    case ExperimentKind::FunctionalCoverage: return "coverage-functional";
    case ExperimentKind::Bvm: return "bvm";
    case ExperimentKind::VolterraDemo: return "volterra-demo";
    case ExperimentKind::LemmaOrder: return "lemma-order";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (auto k : {ExperimentKind::Contraction, ExperimentKind::BallCoverage,
                 ExperimentKind::FunctionalCoverage, ExperimentKind::Bvm,
                 ExperimentKind::VolterraDemo, ExperimentKind::LemmaOrder}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown experiment kind '" + name + "'");
}

Truth TruthSpec::build(std::size_t trunc, double beta) const {
  switch (pattern) {
    case Pattern::PaperDemo: return make_truth(truth_pattern::PaperDemo{}, trunc);
    case Pattern::PolynomialSmooth:
      return make_truth(truth_pattern::PolynomialSmooth{beta, eps}, trunc);
    case Pattern::Zero: return Truth{Sequence(trunc, 0.0), beta};
    case Pattern::Custom: return make_truth(truth_pattern::Custom{coeffs, beta}, trunc);
  }
  throw ConfigError("invalid truth pattern");
}

Functional FunctionalSpec::build(std::size_t trunc) const {
  Functional l;
  switch (kind) {
    case Kind::Power:
      l.q = q;
      l.coeffs.resize(trunc);
      for (std::size_t i = 0; i < trunc; ++i) {
        l.coeffs[i] = std::pow(static_cast<double>(i + 1), -q - 0.5);
      }
      return l;
    case Kind::Exponential:
      // Faster than any power; the declared q is only nominal.
      l.q = std::numeric_limits<double>::infinity();
      l.coeffs.resize(trunc);
      for (std::size_t i = 0; i < trunc; ++i) {
        l.coeffs[i] = std::exp(-rate * static_cast<double>(i + 1));
      }
      return l;
    case Kind::Point: return point_functional(x, trunc);
    case Kind::Custom:
      l.q = q;
      l.coeffs = coeffs;
      l.coeffs.resize(trunc, 0.0);
      return l;
  }
  throw ConfigError("invalid functional kind");
}

std::vector<LemmaCombo> default_lemma_grid() {
  return {
      // (t + 2q)/u < v
      {0.5, 2.0, 3.0, 2.0},
      {1.0, 1.0, 3.0, 2.0},
      {0.0, 3.0, 2.0, 2.0},
      {1.0, 2.0, 4.0, 2.0},
      {0.5, 3.0, 2.0, 3.0},
      {2.0, 0.0, 3.0, 2.0},
      // (t + 2q)/u > v
      {1.0, 4.0, 2.0, 1.0},
      {0.5, 3.0, 2.0, 1.0},
      {0.0, 5.0, 3.0, 1.0},
      {2.0, 2.0, 2.0, 2.0},
      {1.0, 3.0, 1.5, 2.0},
      {0.0, 2.0, 2.0, 0.5},
  };
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ExperimentKind::Contraction:
      cfg.n_grid = decades(3, 7);
      break;
    case ExperimentKind::BallCoverage:
      cfg.regime.alpha = 0.5;
      cfg.n_grid = {1e2, 1e4, 1e6};
      break;
    case ExperimentKind::FunctionalCoverage:
      cfg.regime.alpha = 0.25;
      cfg.forward = KappaKind::Volterra;
      cfg.truth.pattern = TruthSpec::Pattern::PaperDemo;
      cfg.functional = FunctionalSpec{FunctionalSpec::Kind::Point, 0.0, 1.0, 0.5, {}};
      cfg.n_grid = {1e4, 1e6, 1e8};
      break;
    case ExperimentKind::Bvm:
      cfg.functional = FunctionalSpec{FunctionalSpec::Kind::Power, 2.0, 1.0, 0.5, {}};
      cfg.n_grid = {1e4, 1e6, 1e8};
      break;
    case ExperimentKind::VolterraDemo:
      break;
    case ExperimentKind::LemmaOrder:
      cfg.n_grid = decades(2, 10);
      cfg.lemma_grid = default_lemma_grid();
      break;
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json(const json& j,
                                             std::optional<ExperimentKind> expected) {
  check_keys(j,
             {"kind", "regime", "forward", "truth", "functional", "n_grid", "gamma", "replicates",
              "mc_samples", "master_seed", "trunc", "adversarial", "lemma_grid", "demo"},
             "experiment config");
  std::optional<ExperimentKind> kind = expected;
  try {
    if (j.contains("kind")) {
      const auto k = experiment_kind_from_string(j.at("kind").get<std::string>());
      if (expected && k != *expected) {
        throw ConfigError(std::string("config kind '") + to_string(k) +
                          "' does not match subcommand '" + to_string(*expected) + "'");
      }
      kind = k;
    }
    if (!kind) throw ConfigError("experiment config needs a 'kind'");
    ExperimentConfig cfg = defaults(*kind);

    if (j.contains("regime")) {
      const json& r = j.at("regime");
      check_keys(r, {"alpha", "beta", "p", "q", "tau_exponent"}, "regime");
      cfg.regime.alpha = r.value("alpha", cfg.regime.alpha);
      cfg.regime.beta = r.value("beta", cfg.regime.beta);
      cfg.regime.p = r.value("p", cfg.regime.p);
      cfg.regime.tau_exponent = r.value("tau_exponent", cfg.regime.tau_exponent);
      if (r.contains("q")) {
        if (r.at("q").is_null()) {
          cfg.regime.q.reset();
        } else {
          cfg.regime.q = r.at("q").get<double>();
        }
      }
    }
    if (j.contains("forward")) {
      const auto name = j.at("forward").get<std::string>();
      if (name == "polynomial") {
        cfg.forward = KappaKind::ExactPolynomial;
      } else if (name == "volterra") {
        cfg.forward = KappaKind::Volterra;
      } else {
        throw ConfigError("forward must be 'polynomial' or 'volterra'");
      }
    }
    if (j.contains("truth")) {
      const json& t = j.at("truth");
      check_keys(t, {"pattern", "eps", "coeffs"}, "truth");
      if (t.contains("pattern")) cfg.truth.pattern = pattern_from_string(t.at("pattern"));
      cfg.truth.eps = t.value("eps", cfg.truth.eps);
      cfg.truth.coeffs = t.value("coeffs", cfg.truth.coeffs);
    }
    if (j.contains("functional")) {
      const json& f = j.at("functional");
      if (f.is_null()) {
        cfg.functional.reset();
      } else {
        check_keys(f, {"kind", "q", "rate", "x", "coeffs"}, "functional");
        FunctionalSpec fs = cfg.functional.value_or(FunctionalSpec{});
        if (f.contains("kind")) fs.kind = functional_from_string(f.at("kind"));
        fs.q = f.value("q", fs.q);
        fs.rate = f.value("rate", fs.rate);
        fs.x = f.value("x", fs.x);
        fs.coeffs = f.value("coeffs", fs.coeffs);
        cfg.functional = fs;
      }
    }
    cfg.n_grid = j.value("n_grid", cfg.n_grid);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.replicates = j.value("replicates", cfg.replicates);
    cfg.mc_samples = j.value("mc_samples", cfg.mc_samples);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    if (j.contains("trunc")) {
      const json& t = j.at("trunc");
      if (t.is_string()) {
        if (t.get<std::string>() != "auto") throw ConfigError("trunc must be 'auto' or a count");
        cfg.trunc.reset();
      } else {
        cfg.trunc = t.get<std::size_t>();
      }
    }
    cfg.adversarial = j.value("adversarial", cfg.adversarial);
    if (j.contains("lemma_grid")) {
      cfg.lemma_grid.clear();
      for (const auto& row : j.at("lemma_grid")) {
        const auto v = row.get<std::vector<double>>();
        if (v.size() != 4) throw ConfigError("lemma_grid entries are [q, t, u, v]");
        cfg.lemma_grid.push_back({v[0], v[1], v[2], v[3]});
      }
    }
    if (j.contains("demo")) cfg.demo = FigureDemoConfig::from_json(j.at("demo"));
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path,
                                             std::optional<ExperimentKind> expected) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
  return from_json(j, expected);
}

json ExperimentConfig::to_json() const {
  json j;
  j["kind"] = to_string(kind);
  j["regime"] = {{"alpha", regime.alpha},
                 {"beta", regime.beta},
                 {"p", regime.p},
                 {"q", regime.q ? json(*regime.q) : json(nullptr)},
                 {"tau_exponent", regime.tau_exponent}};
  j["forward"] = forward == KappaKind::Volterra ? "volterra" : "polynomial";
  j["truth"] = {{"pattern", pattern_name(truth.pattern)},
                {"eps", truth.eps},
                {"coeffs", truth.coeffs}};
  if (functional) {
    j["functional"] = {{"kind", functional_name(functional->kind)},
                       {"q", functional->q},
                       {"rate", functional->rate},
                       {"x", functional->x},
                       {"coeffs", functional->coeffs}};
  } else {
    j["functional"] = nullptr;
  }
  j["n_grid"] = n_grid;
  j["gamma"] = gamma;
  j["replicates"] = replicates;
  j["mc_samples"] = mc_samples;
  j["master_seed"] = master_seed;
  j["trunc"] = trunc ? json(*trunc) : json("auto");
  j["adversarial"] = adversarial;
  json grid = json::array();
  for (const auto& c : lemma_grid) grid.push_back({c.q, c.t, c.u, c.v});
  j["lemma_grid"] = grid;
  j["demo"] = demo.to_json();
  return j;
}

void ExperimentConfig::validate() const {
  try {
    regime.validate();
  } catch (const RegimeError& e) {
    throw ConfigError(e.what());
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (replicates < 1) throw ConfigError("replicates must be at least 1");
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    if (!(n_grid[k] > 0.0) || !std::isfinite(n_grid[k])) {
      throw ConfigError("n_grid entries must be positive and finite");
    }
    if (k > 0 && !(n_grid[k] > n_grid[k - 1])) {
      throw ConfigError("n_grid must be strictly increasing");
    }
  }
  if (kind != ExperimentKind::VolterraDemo && n_grid.empty()) {
    throw ConfigError("n_grid must not be empty");
  }
  if (trunc && *trunc < 1) throw ConfigError("trunc must be at least 1");
  if (forward == KappaKind::Volterra && regime.p != 1.0) {
    throw ConfigError("the Volterra operator has p = 1");
  }
  if (forward == KappaKind::Custom) throw ConfigError("custom forward operators need the API");
  if (truth.pattern == TruthSpec::Pattern::Custom && truth.coeffs.empty()) {
    throw ConfigError("custom truth needs coefficients");
  }
  if (functional) {
    if (functional->kind == FunctionalSpec::Kind::Point &&
        !(functional->x >= 0.0 && functional->x <= 1.0)) {
      throw ConfigError("point functional needs x in [0, 1]");
    }
    if (functional->kind == FunctionalSpec::Kind::Point && forward != KappaKind::Volterra) {
      throw ConfigError("point functionals are defined for the Volterra basis");
    }
    if (functional->kind == FunctionalSpec::Kind::Exponential && !(functional->rate > 0.0)) {
      throw ConfigError("exponential functional needs a positive rate");
    }
    if (functional->kind == FunctionalSpec::Kind::Custom && functional->coeffs.empty()) {
      throw ConfigError("custom functional needs coefficients");
    }
  }
  if ((kind == ExperimentKind::FunctionalCoverage || kind == ExperimentKind::Bvm) && !functional) {
    throw ConfigError(std::string(to_string(kind)) + " needs a functional");
  }
  if (kind == ExperimentKind::BallCoverage && mc_samples < 10000) {
    throw ConfigError("mc_samples must be at least 10000");
  }
  if (kind == ExperimentKind::LemmaOrder) {
    if (lemma_grid.empty()) throw ConfigError("lemma_grid must not be empty");
    for (const auto& c : lemma_grid) {
      if (!(c.u > 0.0) || !(c.v >= 0.0) || !(c.t + 2.0 * c.q > 0.0)) {
        throw ConfigError("lemma_grid entries need u > 0, v >= 0 and t + 2q > 0");
      }
    }
  }
  if (kind == ExperimentKind::VolterraDemo) demo.validate();
}

std::size_t ExperimentConfig::trunc_for(double n) const {
  if (trunc) return *trunc;
  return default_trunc(n, regime.tau(n), regime.alpha, regime.p);
}

void ResultTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw DimensionError("ResultTable::add_row: expected " + std::to_string(columns.size()) +
                         " cells, got " + std::to_string(row.size()));
  }
  rows.push_back(std::move(row));
}

std::size_t ResultTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double ResultTable::number(std::size_t row, const std::string& name) const {
  const Cell& c = rows.at(row).at(column(name));
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* u = std::get_if<std::uint64_t>(&c)) return static_cast<double>(*u);
  throw std::invalid_argument("column '" + name + "' is not numeric");
}

std::vector<double> ResultTable::numbers(const std::string& name) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(number(r, name));
  return out;
}

void ResultTable::write_csv(std::ostream& out) const {
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_field(row[c]);
    out << '\n';
  }
}

json ResultTable::to_json() const {
  json rows_json = json::array();
  for (const auto& row : rows) {
    json r = json::object();
    for (std::size_t c = 0; c < row.size(); ++c) r[columns[c]] = cell_json(row[c]);
    rows_json.push_back(std::move(r));
  }
  return {{"columns", columns}, {"rows", rows_json}, {"metadata", metadata}};
}

ResultTable run_contraction(const ExperimentConfig& cfg, unsigned workers) {
  require_kind(cfg, ExperimentKind::Contraction);
  const auto start = Clock::now();
  ResultTable table =
      new_table(cfg, {"n", "tau", "trunc", "sq_bias", "variance", "spread", "risk", "mc_risk",
                      "mc_stderr", "replicates", "epsilon", "rate_term1", "rate_term2", "seed"});
  std::vector<double> ns, root_risk, eps;
  for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
    const CellSetup cell = make_cell(cfg, k);
    const Truth truth = cfg.truth.build(cell.trunc, cfg.regime.beta);
    const RiskDecomposition rd = risk_decomposition(cell.spec, truth.coeffs);
    Sequence losses(cfg.replicates);
    const ForwardSpec& fwd = cell.fwd;
    parallel_for(
        cfg.replicates,
        [&](std::size_t r) {
          const Observation obs =
              generate_observation(derive_seed(cell.seed, r), truth, fwd, cell.n);
          const PosteriorSummary post = coordinate_posterior(cell.spec, obs.y);
          CompensatedSum acc;
          for (std::size_t i = 0; i < cell.trunc; ++i) {
            const double d = post.mean[i] - truth.coeffs[i];
            acc += d * d;
          }
          losses[r] = acc.value();
        },
        workers);
    const MeanEstimate mc = mean_with_stderr(losses);
    const RateTerms rate = contraction_rate(cfg.regime, cell.n);
    table.add_row({cell.n, cell.tau, static_cast<std::uint64_t>(cell.trunc), rd.sq_bias,
                   rd.variance, rd.spread, rd.risk(), mc.mean, mc.std_error,
                   static_cast<std::uint64_t>(cfg.replicates), rate.epsilon, rate.term1,
                   rate.term2, static_cast<std::uint64_t>(cell.seed)});
    ns.push_back(cell.n);
    root_risk.push_back(std::sqrt(rd.risk()));
    eps.push_back(rate.epsilon);
  }
  auto& summary = table.metadata["summary"];
  summary["slope_root_risk"] = slope_summary(ns, root_risk);
  summary["slope_epsilon"] = slope_summary(ns, eps);
  summary["rate_exponent"] = contraction_rate_exponent(cfg.regime);
  finish_table(table, start);
  return table;
}

ResultTable run_ball_coverage(const ExperimentConfig& cfg, unsigned workers) {
  require_kind(cfg, ExperimentKind::BallCoverage);
  const auto start = Clock::now();
  ResultTable table = new_table(
      cfg, {"n", "tau", "trunc", "radius", "sq_bias", "coverage", "coverage_stderr",
            "mc_samples", "replicates", "radius_t", "radius_ratio", "zero_bias_coverage",
            "zero_bias_stderr", "separation", "spike_index", "seed"});
  for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
    const CellSetup cell = make_cell(cfg, k);
    const EigenWeights w = credible_weights(cell.spec);
    const McOptions radius_mc{cfg.mc_samples, derive_seed(cell.seed, 0), workers};
    const double r = ball_radius(w.s_w, cfg.gamma, QuantileMethod::MonteCarlo, radius_mc).radius;

    Truth truth;
    std::uint64_t spike = 0;
    if (cfg.adversarial) {
      // Put the squared bias at the gap between r^2 and the mean of the
      // centred quadratic form.
      const double gap = std::max(0.0, r * r - compensated_sum(w.t_w));
      truth = spike_truth_ball(cell.prior, cell.fwd, cell.n, cfg.regime.beta, gap);
      spike = spike_index(cell.prior, cfg.regime.p, cell.n, cfg.regime.beta);
    } else {
      truth = cfg.truth.build(cell.trunc, cfg.regime.beta);
    }
    const Sequence bias = posterior_mean_bias(cell.spec, truth.coeffs);
    CompensatedSum bsq;
    for (double b : bias) bsq += b * b;

    const CoverageReport cov =
        ball_coverage(w.t_w, bias, r, {cfg.replicates, derive_seed(cell.seed, 1), workers});
    const double r_t =
        ball_radius(w.t_w, cfg.gamma, QuantileMethod::MonteCarlo,
                    {cfg.mc_samples, derive_seed(cell.seed, 2), workers})
            .radius;
    const CoverageReport zero =
        ball_coverage(w.t_w, {}, r, {cfg.replicates, derive_seed(cell.seed, 3), workers});
    table.add_row({cell.n, cell.tau, static_cast<std::uint64_t>(cell.trunc), r, bsq.value(),
                   cov.coverage, *cov.mc_stderr, static_cast<std::uint64_t>(cfg.mc_samples),
                   static_cast<std::uint64_t>(cfg.replicates), r_t, r > 0.0 ? r_t / r : kNaN,
                   zero.coverage, *zero.mc_stderr, separation_ratio(w.s_w), spike,
                   static_cast<std::uint64_t>(cell.seed)});
  }
  finish_table(table, start);
  return table;
}

ResultTable run_functional_coverage(const ExperimentConfig& cfg, unsigned workers) {
  require_kind(cfg, ExperimentKind::FunctionalCoverage);
  const auto start = Clock::now();
  ResultTable table =
      new_table(cfg, {"n", "tau", "trunc", "bias", "s_n", "t_n", "halfwidth", "coverage",
                      "sup_bias", "seed"});
  std::vector<std::vector<Cell>> rows(cfg.n_grid.size());
  parallel_for(
      cfg.n_grid.size(),
      [&](std::size_t k) {
        const CellSetup cell = make_cell(cfg, k);
        const Functional l = cfg.functional->build(cell.trunc);
        const Truth truth =
            cfg.adversarial
                ? extremal_truth_functional(l.coeffs, cfg.regime.beta, cell.prior, cell.fwd, cell.n)
                : cfg.truth.build(cell.trunc, cfg.regime.beta);
        const FunctionalBiasVar bv = functional_bias_var(cell.spec, truth.coeffs, l.coeffs);
        const double s_n = std::sqrt(functional_spread(cell.spec, l.coeffs));
        const double t_n = std::sqrt(bv.t_n_sq);
        const CoverageReport rep = interval_coverage_report(bv.bias, s_n, t_n, cfg.gamma);
        rows[k] = {cell.n,
                   cell.tau,
                   static_cast<std::uint64_t>(cell.trunc),
                   bv.bias,
                   s_n,
                   t_n,
                   rep.radius_or_halfwidth,
                   rep.coverage,
                   sup_bias(cell.spec, l.coeffs, cfg.regime.beta),
                   static_cast<std::uint64_t>(cell.seed)};
      },
      workers);
  for (auto& row : rows) table.add_row(std::move(row));
  finish_table(table, start);
  return table;
}

ResultTable run_bvm(const ExperimentConfig& cfg, unsigned workers) {
  require_kind(cfg, ExperimentKind::Bvm);
  const auto start = Clock::now();
  ResultTable table = new_table(
      cfg, {"n", "tau", "trunc", "s_n", "t_n", "ratio", "sup_bias", "sup_bias_over_t", "tv",
            "bias", "coverage", "n_t_sq", "plugin_limit", "plugin_variance", "plugin_rel_err",
            "seed"});
  std::vector<std::vector<Cell>> rows(cfg.n_grid.size());
  parallel_for(
      cfg.n_grid.size(),
      [&](std::size_t k) {
        const CellSetup cell = make_cell(cfg, k);
        const Functional l = cfg.functional->build(cell.trunc);
        const Truth truth =
            cfg.adversarial
                ? extremal_truth_functional(l.coeffs, cfg.regime.beta, cell.prior, cell.fwd, cell.n)
                : cfg.truth.build(cell.trunc, cfg.regime.beta);
        const FunctionalBiasVar bv = functional_bias_var(cell.spec, truth.coeffs, l.coeffs);
        const double s_n = std::sqrt(functional_spread(cell.spec, l.coeffs));
        const double t_n = std::sqrt(bv.t_n_sq);
        const double sb = sup_bias(cell.spec, l.coeffs, cfg.regime.beta);
        CompensatedSum limit;
        for (std::size_t i = 0; i < cell.trunc; ++i) {
          const double r = l.coeffs[i] / cell.spec.kappa[i];
          limit += r * r;
        }
        const double n_t_sq = cell.n * bv.t_n_sq;
        rows[k] = {cell.n,
                   cell.tau,
                   static_cast<std::uint64_t>(cell.trunc),
                   s_n,
                   t_n,
                   t_n > 0.0 ? s_n / t_n : kNaN,
                   sb,
                   t_n > 0.0 ? sb / t_n : kNaN,
                   gaussian_tv_distance(s_n, t_n),
                   bv.bias,
                   interval_coverage(bv.bias, s_n, t_n, cfg.gamma),
                   n_t_sq,
                   limit.value(),
                   limit.value() / cell.n,
                   std::abs(n_t_sq - limit.value()) / limit.value(),
                   static_cast<std::uint64_t>(cell.seed)};
      },
      workers);
  for (auto& row : rows) table.add_row(std::move(row));
  std::vector<double> ratios = table.numbers("ratio");
  bool decreasing = true;
  for (std::size_t k = 1; k < ratios.size(); ++k) decreasing &= ratios[k] < ratios[k - 1];
  table.metadata["summary"]["ratio_decreasing"] = decreasing;
  finish_table(table, start);
  return table;
}

ResultTable run_lemma_order(const ExperimentConfig& cfg, unsigned workers) {
  require_kind(cfg, ExperimentKind::LemmaOrder);
  const auto start = Clock::now();
  ResultTable table = new_table(
      cfg, {"combo", "q", "t", "u", "v", "N", "branch", "order", "sum", "ratio", "scaled",
            "limit", "limit_rel_err", "seed"});
  const std::size_t per_combo = cfg.n_grid.size();
  const std::size_t items = cfg.lemma_grid.size() * per_combo;
  std::vector<std::vector<Cell>> rows(items);
  parallel_for(
      items,
      [&](std::size_t item) {
        const std::size_t c = item / per_combo;
        const LemmaCombo& lc = cfg.lemma_grid[c];
        const double N = cfg.n_grid[item % per_combo];
        const double a = (lc.t + 2.0 * lc.q) / lc.u;
        const double order = std::min(a, lc.v);
        const double tol = 1e-12 * std::max(a, lc.v);
        const std::string branch = a < lc.v - tol ? "lower" : (a > lc.v + tol ? "upper" : "boundary");
        const LemmaSequence xi = power_sequence(lc.q);
        const double sum = series_lemma_sum_auto(xi, lc.t, lc.u, lc.v, N, 1000, 200000000);
        const double scaled = std::pow(N, lc.v) * sum;
        double limit = kNaN, rel = kNaN;
        if (branch == "upper") {
          // sum_i i^(-2q-1) i^(uv-t) is a zeta value.
          limit = boost::math::zeta(2.0 * lc.q + 1.0 + lc.t - lc.u * lc.v);
          rel = std::abs(scaled - limit) / limit;
        }
        rows[item] = {static_cast<std::uint64_t>(c), lc.q, lc.t, lc.u, lc.v, N, branch, order, sum,
                      sum * std::pow(N, order), scaled, limit, rel,
                      static_cast<std::uint64_t>(derive_seed(cfg.master_seed, item))};
      },
      workers);
  for (auto& row : rows) table.add_row(std::move(row));
  const auto ratios = table.numbers("ratio");
  table.metadata["summary"]["ratio_min"] = *std::min_element(ratios.begin(), ratios.end());
  table.metadata["summary"]["ratio_max"] = *std::max_element(ratios.begin(), ratios.end());
  finish_table(table, start);
  return table;
}

ResultTable run_volterra_demo(const ExperimentConfig& cfg, unsigned workers) {
  require_kind(cfg, ExperimentKind::VolterraDemo);
  const auto start = Clock::now();
  ResultTable table = summarize_demo(cfg, figure_demo_panels(cfg.demo, workers));
  finish_table(table, start);
  return table;
}

ResultTable run_experiment(const ExperimentConfig& cfg, unsigned workers) {
  switch (cfg.kind) {
    case ExperimentKind::Contraction: return run_contraction(cfg, workers);
    case ExperimentKind::BallCoverage: return run_ball_coverage(cfg, workers);
    case ExperimentKind::FunctionalCoverage: return run_functional_coverage(cfg, workers);
    case ExperimentKind::Bvm: return run_bvm(cfg, workers);
    case ExperimentKind::VolterraDemo: return run_volterra_demo(cfg, workers);
    case ExperimentKind::LemmaOrder: return run_lemma_order(cfg, workers);
  }
  throw ConfigError("invalid experiment kind");
}

namespace {

struct CliOptions {
  std::string config;
  std::vector<double> n;
  std::vector<double> alpha;
  std::optional<double> beta;
  std::optional<double> p;
  std::optional<double> tau_exp;
  std::optional<double> gamma;
  std::optional<std::size_t> replicates;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string format = "csv";
  unsigned workers = 0;
};

void apply_overrides(ExperimentConfig& cfg, const CliOptions& o) {
  if (cfg.kind == ExperimentKind::VolterraDemo) {
    if (o.beta || o.p || o.tau_exp) {
      throw ConfigError("--beta, --p and --tau-exp do not apply to volterra-demo");
    }
    if (!o.n.empty()) cfg.demo.n_values = o.n;
    if (!o.alpha.empty()) cfg.demo.alphas = o.alpha;
    if (o.gamma) cfg.demo.gamma = *o.gamma;
    if (o.replicates) cfg.demo.replicates = *o.replicates;
    if (o.seed) cfg.demo.seed = *o.seed;
    cfg.validate();
    return;
  }
  if (!o.n.empty()) cfg.n_grid = o.n;
  if (!o.alpha.empty()) {
    if (o.alpha.size() != 1) throw ConfigError("--alpha takes one value for this experiment");
    cfg.regime.alpha = o.alpha.front();
  }
  if (o.beta) cfg.regime.beta = *o.beta;
  if (o.p) cfg.regime.p = *o.p;
  if (o.tau_exp) cfg.regime.tau_exponent = *o.tau_exp;
  if (o.gamma) cfg.gamma = *o.gamma;
  if (o.replicates) cfg.replicates = *o.replicates;
  if (o.seed) cfg.master_seed = *o.seed;
  cfg.validate();
}

std::string file_stem(ExperimentKind kind) {
  std::string s = to_string(kind);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string table_text(const ResultTable& table, const std::string& format) {
  if (format == "json") return table.to_json().dump(2) + "\n";
  std::ostringstream os;
  table.write_csv(os);
  return os.str();
}

int run_command(ExperimentKind kind, const CliOptions& o, std::ostream& out) {
  const std::string started_at = utc_timestamp();
  const auto start = Clock::now();
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig::defaults(kind)
                                          : ExperimentConfig::from_file(o.config, kind);
  apply_overrides(cfg, o);

  const std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  const std::string stem = file_stem(kind);
  std::vector<std::string> outputs;

  ResultTable table;
  if (kind == ExperimentKind::VolterraDemo) {
    const auto panels = figure_demo_panels(cfg.demo, o.workers);
    write_figure_demo_csv(panels, dir / (stem + ".csv"));
    outputs.push_back(stem + ".csv");
    table = summarize_demo(cfg, panels);
    table.metadata["panels"] = figure_demo_panel_index(panels);
    finish_table(table, start);
    const std::string name = stem + "_summary." + o.format;
    write_text(dir / name, table_text(table, o.format));
    outputs.push_back(name);
  } else {
    table = run_experiment(cfg, o.workers);
    const std::string name = stem + "." + o.format;
    write_text(dir / name, table_text(table, o.format));
    outputs.push_back(name);
  }

  json manifest{{"config", cfg.to_json()},
                {"master_seed", kind == ExperimentKind::VolterraDemo ? cfg.demo.seed
                                                                      : cfg.master_seed},
                {"code_version", code_version()},
                {"started_at", started_at},
                {"wall_seconds", seconds_since(start)},
                {"outputs", outputs},
                {"summary", table.metadata["summary"]}};
  write_text(dir / (stem + "_manifest.json"), manifest.dump(2) + "\n");
  for (const auto& name : outputs) out << (dir / name).string() << '\n';
  return 0;
}

}  // namespace

static const char* describe(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Contraction: return "posterior risk against n, analytic and Monte Carlo";
    case ExperimentKind::BallCoverage: return "frequentist coverage of credible balls";
    case ExperimentKind::FunctionalCoverage: return "exact coverage of credible intervals for a functional";
    case ExperimentKind::Bvm: return "posterior spread against sampling spread of a functional";
    case ExperimentKind::VolterraDemo: return "posterior bands for the Volterra operator";
    case ExperimentKind::LemmaOrder: return "order of the damped series against its envelope";
  }
  return "";
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian sequence-model experiments for linear inverse problems", "seqbayes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  CliOptions opts;
  std::optional<ExperimentKind> chosen;
  for (auto kind : {ExperimentKind::Contraction, ExperimentKind::BallCoverage,
                    ExperimentKind::FunctionalCoverage, ExperimentKind::Bvm,
                    ExperimentKind::VolterraDemo, ExperimentKind::LemmaOrder}) {
    auto* sub = app.add_subcommand(to_string(kind), describe(kind));
    sub->add_option("--config", opts.config, "JSON experiment config");
    sub->add_option("--n", opts.n, "n grid (strictly increasing)");
    sub->add_option("--alpha", opts.alpha, "prior regularity");
    sub->add_option("--beta", opts.beta, "truth regularity");
    sub->add_option("--p", opts.p, "degree of ill-posedness");
    sub->add_option("--tau-exp", opts.tau_exp, "prior scale exponent, tau_n = n^e");
    sub->add_option("--gamma", opts.gamma, "credible level 1 - gamma");
    sub->add_option("--replicates", opts.replicates, "Monte Carlo replicates");
    sub->add_option("--seed", opts.seed, "master seed");
    sub->add_option("--out", opts.out, "output directory")->capture_default_str();
    sub->add_option("--format", opts.format, "table format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    sub->add_option("--workers", opts.workers, "worker threads (0: all cores)");
    sub->callback([&chosen, kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << code_version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    return run_command(*chosen, opts, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace seqbayes
