#pragma once

// Experiment runner: configuration parsing and validation, dispatch to the
// modules, and report / artifact emission.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ultralog {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kReportSchema = "ultralog-report/1";

/// All violations found while parsing, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// A module failure, carrying the module name and a command line that
/// reproduces it.
class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(std::string module, std::string what, std::string repro);
  const std::string& module() const { return module_; }
  const std::string& repro() const { return repro_; }

 private:
  std::string module_, repro_;
};

struct ExperimentConfig {
  std::string experiment;  // delta-flow | kg-mc | mult-mc | strong-bc | cusp-volume | tree-loglaw | xi-decay | reduce
  unsigned p = 2, e = 1;   // field F_s, s = p^e
  int m = 1, n = 1;        // A is m x n
  int r = 2;               // lattice rank (mult-mc)
  int rank = 1;            // root system A_rank (cusp-volume)
  unsigned q = 0;          // residue field size for cusp-volume, tree-loglaw, xi-decay; 0 means p^e
  std::string psi = "inverse";  // inverse | power | log-power
  double psi_c = 0, psi_tau = 1, psi_sigma = 2, psi_x0 = 0;  // psi_x0 = 0 picks the family default
  long T = 64;
  int Q_max = 12;          // log_s of the bound on |q| (kg-mc) or |v| (mult-mc)
  int trials = 100;
  long samples = 0;        // tail samples (delta-flow, strong-bc) or Monte Carlo samples (xi-decay)
  int precision = 64;
  int burn_in = 8;
  int exhaustive_q = 6;
  std::string thresholds = "divergent";  // strong-bc: divergent | convergent | zero
  double kappa = 0;                      // 0 means m + n
  std::vector<double> ladder_c{1.0, 1.5};
  int j_max = 60;
  long trace_length = 10000;
  std::string cocharacters = "coroot";  // coroot | adjoint
  long cusp_t_min = 2, cusp_t_max = 40;
  int t_max = 6;
  int radius = 3;
  std::string matrix;  // reduce: path of a matrix file
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int threads = 1;
  std::string format = "csv";  // csv | json

  // acceptance thresholds
  double bc_ratio_lo = 0.7, bc_ratio_hi = 1.3;
  double kg_divergent_min = 0.95, kg_convergent_max = 0.05;
  double cusp_spread_max = 10;
  double loglaw_tolerance = 0.15;
  double ladder_divergent_min = 0.3, ladder_convergent_max = 0.1;
  double mc_sigmas = 3;

  std::vector<std::string> explicit_keys;  // keys given by the user, in order

  unsigned field_size() const;
  unsigned residue_size() const { return q ? q : field_size(); }
  double kappa_or_default() const { return kappa > 0 ? kappa : m + n; }
  nlohmann::ordered_json echo() const;
  /// Command line reproducing this configuration.
  std::string command_line() const;
};

/// Parses `key = value` lines (# comments) or a JSON object, applies the
/// `key=value` overrides, fills defaults and validates. Throws ConfigError
/// listing every problem.
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});

/// Applies `key=value` overrides on top of a parsed config and revalidates.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& assignments);

/// Checks caps, enums and the mandatory seed; returns every violation.
std::vector<std::string> validate(const ExperimentConfig& cfg);

std::vector<std::string> experiment_tags();

struct Check {
  std::string name;
  double value = 0;
  std::string threshold;
  bool pass = false;
};

struct RunReport {
  nlohmann::ordered_json config;
  nlohmann::ordered_json summary;
  std::vector<Check> checks;
  bool pass = true;
  double wall_clock_seconds = 0;  // not written to artifacts
  std::map<std::string, std::string> artifacts;  // file name -> content

  /// The report document; its first field is the schema tag.
  nlohmann::ordered_json to_json() const;
  int exit_code() const { return pass ? 0 : 2; }
};

/// Runs the experiment. Artifacts are returned in the report and, when
/// `write` is set, written to cfg.out. Throws ExperimentError on module
/// failures.
RunReport run_experiment(const ExperimentConfig& cfg, bool write = true);

/// Rank-one check of the cusp tail against the tree: the ratio of S(T) to the
/// ray mass of the matching vertices (even ones for the coroot lattice) for
/// T = 1..t_max. Returns max/min - 1 over T.
double rank1_ray_deviation(unsigned q, bool adjoint, long t_max, int j_max = 60);

}  // namespace ultralog
