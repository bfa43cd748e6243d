#pragma once

// Metrics, run configuration, experiment orchestration and report emission.
//
// A report directory holds:
//   resolved_config.txt  every key with its effective value
//   metrics.csv          phase,method,variable,MSE,MAE,R2 (full precision)
//   table.txt            the same rows rendered to 4 decimals
//   predictions.csv      index, then <variable>_truth,<variable>_pred
//   manifest.txt         ingest statistics, variable mapping, model notes
//   timing.txt           wall-clock seconds per stage
//   history.csv          network training runs
//   model.txt            network checkpoint
//   pdes.txt             extracted PDEs (extract) or the PDEs used (predict)
//   correlations.csv, discovery.csv       surrogate discovery
//   posterior.csv, diagnostics.txt, predictive.csv   Bayesian runs

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdemts/expr.hpp"
#include "pdemts/ingest.hpp"

namespace pdemts {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "': " + what), stage(std::move(stage)) {}
  std::string stage;
};

// ---------------------------------------------------------------- metrics

struct VariableMetrics {
  std::string variable;
  FitMetrics fit;
  bool degenerate = false;  // SST = 0, R2 reported as 0
};

struct Metrics {
  std::size_t samples = 0;
  std::vector<VariableMetrics> rows;
};

// Columns are variables; names default to Y1, Y2, ...
Metrics compute_metrics(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred,
                        std::vector<std::string> names = {});

// Four decimals; magnitudes of 1e4 and above in E notation ("5.8788E+18").
std::string format_metric(double v);

struct MetricsRow {
  std::string phase, method, variable;
  FitMetrics fit;
};

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
void write_metrics_table(std::ostream& out, const std::vector<MetricsRow>& rows,
                         const std::vector<std::string>& degenerate = {});

struct PredictionTable {
  std::vector<std::size_t> index;
  std::vector<std::string> names;
  Eigen::MatrixXd truth, pred;  // (rows, names)

  void write(std::ostream& out) const;
  static PredictionTable read(std::istream& in);
};

// ---------------------------------------------------------------- config

struct RunConfig {
  std::string dataset = "data/household_power_excerpt.txt";
  std::string phase = "extract";  // extract | predict
  std::string method = "tcn1";
  std::string preset;  // empty: the method's default network
  std::size_t max_rows = 0;
  std::size_t lag = 30;
  std::size_t split_start = 0;
  std::size_t n_train = 0, n_validation = 0, n_test = 0;  // 0: phase default
  std::uint64_t seed = 0;

  int epochs = 30;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  bool early_stopping = false;
  int patience = 5;

  std::string pdes;                 // PDE file for pinn, pi_blr, bpinn
  std::string pde_select = "mask";  // "mask" keeps the file's flags, else a list of lhs
  double physics_weight = 1.0;
  double sigma_pde = 0.1;

  int degree = 3;          // surrogate PDE polynomial degree
  int library_degree = 2;  // sindy, lasso, blasso libraries
  double correlation_threshold = 0.5;
  double selection_r2 = 0.8;
  double gate_r2 = 0.5;
  std::size_t max_fit_rows = 0;
  double stlsq_threshold = 0.05;
  double lasso_tol = 1e-8;
  int lasso_max_iter = 2000;
  std::size_t gp_population = 500;
  int gp_generations = 30;
  std::size_t sr_rows = 1000;

  std::size_t bayes_samples = 230;
  int tune = 200;
  int draws = 200;
  int chains = 1;
  int max_treedepth = 8;
  double target_accept = 0.9;
  int map_steps = 2000;
  int advi_steps = 500;

  // key = value lines; '#' starts a comment. Unknown or repeated keys throw.
  static RunConfig parse(std::istream& in);
  static RunConfig load(const std::string& path);
  void set(const std::string& key, const std::string& value);

  // Fills phase defaults, absolutizes paths and validates; throws ConfigError.
  RunConfig resolved() const;
  void write(std::ostream& out) const;
};

const std::vector<std::string>& config_keys();
const std::vector<std::string>& phase_methods(const std::string& phase);

// ---------------------------------------------------------------- pipeline

struct PreparedData {
  TimeSeriesFrame frame;  // elapsed first, intensity dropped, normalized
  NormalizationStats stats;
  SplitWindows windows;
  std::vector<std::string> inputs, targets;
  std::vector<std::pair<std::string, std::string>> manifest;
  std::vector<CorrelationPair> screen;
};

// ingest -> elapsed time -> trim/interpolate -> correlation screen -> active
// energy -> normalization on the training rows -> lag windows -> split.
PreparedData prepare_data(const RunConfig& config);

struct RunReport {
  std::string dir;
  std::vector<MetricsRow> metrics;
  std::vector<PdeSpec> pdes;
  double seconds = 0.0;
};

// Writes the report directory `out_dir` (created if needed).
RunReport run_experiment(const RunConfig& config, const std::string& out_dir);

// Ingest stage only: manifest.txt, screen.csv, normalization.txt.
void run_ingest(const RunConfig& config, const std::string& out_dir);

// Recomputes metrics from predictions.csv; returns the largest absolute
// difference to metrics.csv.
double verify_report(const std::string& dir, std::vector<MetricsRow>* recomputed = nullptr);

// Long format: variable,run,method,MSE,MAE,R2,dMSE,dMAE,dR2,best, over the
// variables every run reports. Deltas are against the first run; best marks
// the lowest MSE per variable.
void compare_runs(const std::vector<std::string>& dirs, std::ostream& out);

}  // namespace pdemts
