#pragma once
// Experiment drivers, statistical probes, rate fits, configuration and I/O.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "noisygrad/adversarial.hpp"
#include "noisygrad/core.hpp"
#include "noisygrad/estimators.hpp"
#include "noisygrad/solver.hpp"
#include "noisygrad/testbed.hpp"

namespace noisygrad {

// ---------------------------------------------------------------- probes

struct ProbeResult {
  double delta = 0.0;
  double bias_est = 0.0;
  double bias_se = 0.0;
  double var_est = 0.0;
  double var_se = 0.0;
  long replications = 0;
};

inline constexpr int kBatches = 32;

// bias = |mean G - grad f(x)|_*, var = mean |G - mean G|_*^2. Standard errors
// come from batch means over 32 batches.
ProbeResult probe_bias_variance(const GradientOracle& oracle, std::span<const double> x,
                                double delta, long reps, RngStream& rng);

// ---------------------------------------------------------------- rate fits

struct HorizonStat {
  long n = 0;
  double mean = 0.0;
  double se = 0.0;
};

struct RateFit {
  std::vector<long> horizons;
  std::vector<HorizonStat> errors;
  double fitted_exponent = 0.0;
  double fitted_intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares of log error on log n; exponent = -slope.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);
RateFit fit_rate(const std::vector<HorizonStat>& stats);

// Least-squares slope of log y on log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------- records

struct RunRecord {
  std::string experiment_id;
  long n = 0;
  long replication = 0;
  double error = 0.0;
  double regret = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

std::string records_to_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_csv(const std::string& text);
void write_records(const std::string& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records(const std::string& path);
// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// ---------------------------------------------------------------- config

struct FunctionSpec {
  std::string family = "quadratic";  // quadratic | kinked | exponential | softabs | sc_pair | affine
  Vector a{1.0};
  Vector b{1.5};
  double k = 1.0;
  double c = 0.0;
  int v = 1;
  double eps = 0.1;
  std::size_t dim = 1;
};

struct OracleSpec {
  // smoothing | one-point | spsa | rdsa | sf | exact | adversarial-convex | adversarial-sc
  std::string estimator = "smoothing";
  std::string scheme = "sf";  // perturbation used by one-point
  std::string noise = "uncontrolled";
  std::optional<double> sigma;
  std::string controlled_family = "tilt";
  std::string function_class = "convex_smooth";
  std::string norm = "euclidean";
  // Adversarial instances.
  int v = 1;
  double eps = 0.1;
  double c1 = 1.0, p = 2.0, c2 = 1.0, q = 2.0;
};

struct LowerBoundSpec {
  double p = 2.0, q = 2.0, c1 = 1.0, c2 = 1.0;
  long n = 10'000;
  bool exact_oracle = false;
};

struct RegretSpec {
  double p = 2.0, q = 2.0;
};

struct ProbeSpec {
  Vector x{0.0};
  std::vector<double> delta_grid{0.5, 0.2, 0.1, 0.05};
};

struct ExperimentConfig {
  std::string id = "experiment";
  std::string command = "rate";  // rate | regret | lowerbound | probe
  std::string problem_class = "convex";  // convex | sc
  FunctionSpec function;
  OracleSpec oracle;
  double alpha = 1.0;
  // Constant handed to the strongly convex schedules in place of alpha.
  double sc_alpha = 3.0;
  std::optional<std::vector<long>> horizons;
  std::optional<long> replications;
  std::uint64_t seed = 20240917;
  int workers = 0;  // 0: one per hardware thread
  std::string output;
  double tolerance = 0.08;
  double min_r_squared = 0.97;
  LowerBoundSpec lowerbound;
  RegretSpec regret;
  ProbeSpec probe;

  std::vector<long> horizons_or_default() const;
  long replications_or_default() const;
  double sigma_or_default() const;
};

std::vector<long> default_horizons();

nlohmann::json to_json(const ExperimentConfig& cfg);
// Throws ConfigError naming the offending field path.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& cfg);
// Semantic validation of the fields the command uses.
void validate_config(const ExperimentConfig& cfg);

// "name[:key=value,...]", e.g. "spsa:noise=controlled,sigma=1" or
// "adversarial-sc:eps=0.2,c1=1,p=1,c2=1,q=2". Function keys (f, a, b, k, c,
// dim) select the target function.
void apply_oracle_spec(const std::string& spec, ExperimentConfig& cfg);

ObjectiveFunction build_function(const FunctionSpec& spec);
std::unique_ptr<GradientOracle> build_oracle(const ExperimentConfig& cfg, const ObjectiveFunction& f);

// ---------------------------------------------------------------- experiments

struct ExperimentResult {
  std::string command;
  RateFit fit;
  double predicted_exponent = 0.0;
  bool pass = false;
  std::vector<RunRecord> records;
  std::vector<std::string> notes;
  nlohmann::json summary;
};

struct LowerBoundReport {
  double floor = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  double mean_error = 0.0;
  double se = 0.0;
  long runs = 0;
  bool exact_oracle = false;
  bool pass = false;
  std::vector<RunRecord> records;
  nlohmann::json summary;
};

struct ProbeReport {
  std::vector<ProbeResult> rows;
  std::vector<double> c1, c2;
  double bias_slope = 0.0;
  double var_slope = 0.0;
  bool pass = false;
  nlohmann::json summary;
};

ExperimentResult rate_experiment(const ExperimentConfig& cfg);
ExperimentResult regret_experiment(const ExperimentConfig& cfg);
LowerBoundReport lower_bound_experiment(const ExperimentConfig& cfg);
ProbeReport probe_experiment(const ExperimentConfig& cfg);

// Runs fn(0..count-1) on `workers` threads. Each index is handled exactly once;
// results must be written to per-index slots.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

// Writes CSV at cfg.output and the JSON summary next to it (".json").
void write_outputs(const std::string& csv_path, const std::vector<RunRecord>& records,
                   const nlohmann::json& summary);
std::string summary_path_for(const std::string& csv_path);

// ---------------------------------------------------------------- property suite

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CheckOptions {
  long envelope_reps = 200'000;
  int workers = 0;
};

std::vector<CheckResult> run_property_suite(const CheckOptions& options = {});

}  // namespace noisygrad
