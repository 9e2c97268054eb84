#pragma once

// Experiment configuration, orchestration and tabular output.
//
// Every experiment runs over an increasing grid of n. Randomness flows from a
// single master seed: cell k of the n-grid uses derive_seed(master, k) and
// the streams inside a cell are derived from that cell seed, so results do
// not depend on the worker count.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "seqbayes/model.hpp"
#include "seqbayes/posterior.hpp"
#include "seqbayes/rates.hpp"
#include "seqbayes/volterra.hpp"

namespace seqbayes {

enum class ExperimentKind { Contraction, BallCoverage, FunctionalCoverage, Bvm, VolterraDemo, LemmaOrder };

/// CLI / config spelling: contraction, coverage-ball, coverage-functional,
/// bvm, volterra-demo, lemma-order.
const char* to_string(ExperimentKind kind) noexcept;
ExperimentKind experiment_kind_from_string(const std::string& name);

/// True-parameter recipe. Declared regularity comes from the regime's beta.
struct TruthSpec {
  enum class Pattern { PaperDemo, PolynomialSmooth, Zero, Custom };
  Pattern pattern = Pattern::PolynomialSmooth;
  double eps = 0.01;
  Sequence coeffs;

  Truth build(std::size_t trunc, double beta) const;
  bool operator==(const TruthSpec&) const = default;
};

/// Representer recipe for functional experiments.
struct FunctionalSpec {
  enum class Kind { Power, Exponential, Point, Custom };
  Kind kind = Kind::Power;
  double q = 0.0;     ///< Power: l_i = i^(-q-1/2)
  double rate = 1.0;  ///< Exponential: l_i = exp(-rate i)
  double x = 0.5;     ///< Point: l_i = e_i(x) of the Volterra basis
  Sequence coeffs;    ///< Custom, zero-padded

  Functional build(std::size_t trunc) const;
  bool operator==(const FunctionalSpec&) const = default;
};

struct LemmaCombo {
  double q = 0.0;
  double t = 0.0;
  double u = 1.0;
  double v = 1.0;

  bool operator==(const LemmaCombo&) const = default;
};

/// Twelve (q, t, u, v) combinations, six with (t+2q)/u < v and six above.
std::vector<LemmaCombo> default_lemma_grid();

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Contraction;
  RegimeParams regime;
  KappaKind forward = KappaKind::ExactPolynomial;
  TruthSpec truth;
  std::optional<FunctionalSpec> functional;
  std::vector<double> n_grid;
  double gamma = 0.05;
  std::size_t replicates = 500;
  std::size_t mc_samples = 200000;
  std::uint64_t master_seed = 1;
  /// Fixed truncation; nullopt selects default_trunc per n.
  std::optional<std::size_t> trunc;
  /// Worst-case truths: spike truth for balls, extremal truth for functionals.
  bool adversarial = false;
  std::vector<LemmaCombo> lemma_grid;
  FigureDemoConfig demo;

  static ExperimentConfig defaults(ExperimentKind kind);
  /// Missing keys take the defaults of the config's kind; unknown keys throw
  /// ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    std::optional<ExperimentKind> expected = std::nullopt);
  static ExperimentConfig from_file(const std::filesystem::path& path,
                                    std::optional<ExperimentKind> expected = std::nullopt);
  nlohmann::json to_json() const;
  void validate() const;

  std::size_t trunc_for(double n) const;

  bool operator==(const ExperimentConfig&) const = default;
};

using Cell = std::variant<double, std::uint64_t, std::string>;

/// Rows of named columns plus free-form metadata.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  nlohmann::json metadata = nlohmann::json::object();

  void add_row(std::vector<Cell> row);
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  std::vector<double> numbers(const std::string& name) const;

  /// Header line then one line per row; numbers in shortest round-trip form.
  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
};

ResultTable run_contraction(const ExperimentConfig& cfg, unsigned workers = 0);
ResultTable run_ball_coverage(const ExperimentConfig& cfg, unsigned workers = 0);
ResultTable run_functional_coverage(const ExperimentConfig& cfg, unsigned workers = 0);
ResultTable run_bvm(const ExperimentConfig& cfg, unsigned workers = 0);
ResultTable run_lemma_order(const ExperimentConfig& cfg, unsigned workers = 0);
/// Summary table, one row per panel. The panel CSV is written by the CLI.
ResultTable run_volterra_demo(const ExperimentConfig& cfg, unsigned workers = 0);

ResultTable run_experiment(const ExperimentConfig& cfg, unsigned workers = 0);

/// Entry point of the command-line tool. Returns 0 on success, 2 on usage or
/// configuration errors, 1 on runtime failures.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace seqbayes
