#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "multidag/joint_solver.hpp"
#include "multidag/metrics.hpp"
#include "multidag/sem_sim.hpp"

namespace multidag::harness {

namespace fs = std::filesystem;

struct LambdaRule {
  enum class Kind { Fixed, Theory };
  Kind kind = Kind::Theory;
  double value = 0.01;  // Fixed
  double c = 0.3;       // Theory: c * sqrt(p ln p / n)

  double resolve(int p, int n) const;
};

LambdaRule parse_lambda_rule(std::string_view spec);  // "theory:0.3" or "fixed:0.05"
std::string to_string(const LambdaRule& rule);

// ---- simulate ------------------------------------------------------------

struct SimulateRequest {
  FamilyConfig family;
  int n = 100;
  Seed seed = 0;
  fs::path out_dir;
};

// Writes family.json, task_<k>.csv and manifest.json; returns the manifest path.
fs::path run_simulate(const SimulateRequest& req);

// ---- fit / oracle --------------------------------------------------------

struct FitRequest {
  std::vector<fs::path> data;
  Hyperparams hyper;
  LambdaRule lambda_rule;
  bool use_lambda_rule = true;  // false: hyper.lambda is used as given
  bool oracle = false;
  int max_p = 6;
  int threads = 1;
  fs::path out_dir;
};

struct FitSummary {
  std::string method;
  double objective = 0.0;
  double h = 0.0;
  bool converged = false;
  double wall_time_s = 0.0;
  double lambda = 0.0;
  Permutation order;
  std::vector<AdjacencyMatrix> adjacency;
  std::string note;
};

// Writes edges.csv, order.csv, diagnostics.csv and summary.json.
FitSummary run_fit(const FitRequest& req);

// ---- eval ----------------------------------------------------------------

struct EvalRequest {
  fs::path family;
  fs::path edges;
  fs::path order;
  int n = 0;
  double lambda = 0.0;
  Seed seed = 0;
  fs::path out;  // empty: return rows only
};

std::vector<MetricsReport> run_eval(const EvalRequest& req);
std::string metrics_csv(const std::vector<MetricsReport>& rows);

// ---- sweep ---------------------------------------------------------------

struct SweepConfig {
  std::vector<std::pair<int, int>> ps;  // (p, s) pairs
  std::vector<int> num_tasks;
  // K' per cell; empty means K' = K.
  std::vector<int> n_identifiable;
  // Exactly one of these grids is used; a log-theta grid sets n per cell.
  std::vector<int> n;
  std::vector<double> log_theta;
  int replicates = 64;
  Seed base_seed = 0;
  Hyperparams hyper;
  LambdaRule lambda_rule;
  double weight_lo = 0.5;
  double weight_hi = 2.0;
  double keep_prob = 0.9;
  double hetero_var_lo = 0.5;
  double hetero_var_hi = 2.0;
  fs::path out_dir;
  int threads = 1;
  bool resume = true;
  bool record_runtime = true;

  void validate() const;
};

// Parses a sweep config document; errors name the offending line.
SweepConfig parse_sweep_config(std::string_view json_text);

struct SweepCell {
  int p = 0, s = 0, num_tasks = 0, n_identifiable = 0, n = 0;
};

std::vector<SweepCell> expand_cells(const SweepConfig& config);

// Smallest n whose theta reaches exp(log_theta).
int n_for_log_theta(double log_theta, int p, int s, int num_tasks, int n_identifiable);

// Seed shared by every K for the same (p, s, n, replicate) so that larger
// families extend smaller ones task by task.
Seed cell_seed(Seed base, const SweepCell& cell, int replicate);

// Runs simulate -> fit -> eval for every cell and replicate, appending rows
// to <out_dir>/results.csv. Returns the results path.
fs::path run_sweep(const SweepConfig& config);

extern const std::vector<std::string> kResultsColumns;

// ---- aggregate -----------------------------------------------------------

enum class AggregateMode { Transition, Heatmap, Table };
AggregateMode parse_aggregate_mode(std::string_view name);

// Reads results.csv and writes a plot-ready summary CSV; returns its text.
std::string run_aggregate(const fs::path& results, AggregateMode mode, const fs::path& out = {});

}  // namespace multidag::harness
