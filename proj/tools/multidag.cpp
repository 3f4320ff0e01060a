// multidag: simulate, fit, evaluate and sweep joint multi-task DAG estimation.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "multidag/errors.hpp"
#include "multidag/harness.hpp"
#include "multidag/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace multidag;

namespace {

int default_threads() {
  if (const char* env = std::getenv("MULTIDAG_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
    }
  }
  return 1;
}

// Optional JSON config: {"hyper": {...}, ...}. Flags given on the command
// line take precedence over values read here.
struct ConfigFile {
  std::string text;
  json doc = json::object();
};

ConfigFile load_config(const std::string& path) {
  ConfigFile cfg;
  if (path.empty()) return cfg;
  cfg.text = io::read_text(path);
  try {
    cfg.doc = json::parse(cfg.text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
  return cfg;
}

Hyperparams hyper_from(const ConfigFile& cfg) {
  if (!cfg.doc.contains("hyper")) return {};
  return io::hyperparams_from_json(cfg.doc.at("hyper").dump(), {});
}

template <typename T>
void fill(T& target, const ConfigFile& cfg, const char* key) {
  if (cfg.doc.contains(key)) {
    try {
      target = cfg.doc.at(key).get<T>();
    } catch (const json::exception& e) {
      const int line = io::line_of_key(cfg.text, key);
      throw Error(Errc::ParseError, "config line " + std::to_string(line) + ": invalid '" + key + "': " + e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint estimation of multiple linear SEM DAGs with a shared causal order"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a SEM family and sample per-task data CSVs");
  std::string sim_config;
  std::optional<int> sim_p, sim_s, sim_k, sim_kp, sim_n;
  std::optional<double> sim_keep, sim_lo, sim_hi;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_out;
  sim->add_option("--config", sim_config, "JSON config with keys p, s, K, Kp, n, seed, keep_prob, weight_range");
  sim->add_option("--p", sim_p, "Number of nodes");
  sim->add_option("--s", sim_s, "Union support size");
  sim->add_option("--K", sim_k, "Number of tasks");
  sim->add_option("--Kp", sim_kp, "Number of equal-variance tasks (default K)");
  sim->add_option("--n", sim_n, "Samples per task");
  sim->add_option("--seed", sim_seed, "Random seed");
  sim->add_option("--keep-prob", sim_keep, "Per-task retention probability of union edges");
  sim->add_option("--weight-lo", sim_lo, "Smallest edge weight magnitude");
  sim->add_option("--weight-hi", sim_hi, "Largest edge weight magnitude");
  sim->add_option("--out", sim_out, "Output directory")->required();

  // fit and oracle share options
  struct FitArgs {
    std::vector<std::string> data;
    std::string config;
    std::string out;
    std::string lambda_rule;
    std::optional<double> lambda;
    std::optional<std::uint64_t> seed;
    bool refit = false;
    bool oracle = false;
    int threads = 0;
  };
  FitArgs fit_args, oracle_args;
  auto add_fit_options = [](CLI::App* cmd, FitArgs& a) {
    cmd->add_option("--data", a.data, "Per-task data CSVs (header x1..xp)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--config", a.config, "JSON config with a 'hyper' block and optional 'lambda_rule'");
    cmd->add_option("--lambda", a.lambda, "Fixed regularization weight (overrides the lambda rule)");
    cmd->add_option("--lambda-rule", a.lambda_rule, "theory[:c] or fixed:value (default theory:0.3)");
    cmd->add_option("--seed", a.seed, "Initialization seed");
    cmd->add_flag("--refit", a.refit, "Least-squares refit on the thresholded support");
    cmd->add_option("--threads", a.threads, "Worker threads (default $MULTIDAG_THREADS or 1)");
    cmd->add_option("--out", a.out, "Output directory")->required();
  };
  auto* fit = app.add_subcommand("fit", "Fit the joint estimator to per-task data");
  add_fit_options(fit, fit_args);
  fit->add_flag("--oracle", fit_args.oracle, "Use exhaustive permutation search instead (p <= 6)");
  auto* oracle = app.add_subcommand("oracle", "Exhaustive permutation search for small p");
  add_fit_options(oracle, oracle_args);

  // eval
  auto* eval = app.add_subcommand("eval", "Score an estimate against a simulated family");
  harness::EvalRequest eval_req;
  std::string eval_family, eval_edges, eval_order, eval_out;
  eval->add_option("--family", eval_family, "family.json from simulate")->required()->check(CLI::ExistingFile);
  eval->add_option("--edges", eval_edges, "Estimated edge list (src,dst,weight,task)")->required()->check(CLI::ExistingFile);
  eval->add_option("--order", eval_order, "Estimated order (node,rank)")->required()->check(CLI::ExistingFile);
  eval->add_option("--n", eval_req.n, "Samples per task, for theta");
  eval->add_option("--lambda", eval_req.lambda, "Regularization weight, recorded in the report");
  eval->add_option("--seed", eval_req.seed, "Seed, recorded in the report");
  eval->add_option("--out", eval_out, "Output CSV (default stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a simulate/fit/eval grid and append to results.csv");
  std::string sweep_config, sweep_out;
  std::optional<int> sweep_threads;
  bool sweep_fresh = false;
  sweep->add_option("--config", sweep_config, "Sweep config JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "Output directory (overrides config 'output')");
  sweep->add_option("--threads", sweep_threads, "Worker threads (overrides config and $MULTIDAG_THREADS)");
  sweep->add_flag("--fresh", sweep_fresh, "Discard existing results instead of resuming");

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Summarize results.csv into plot-ready CSV");
  std::string agg_results, agg_mode, agg_out;
  agg->add_option("--results", agg_results, "results.csv from sweep")->required()->check(CLI::ExistingFile);
  agg->add_option("--mode", agg_mode, "transition | heatmap | table")->required();
  agg->add_option("--out", agg_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*sim) {
      const ConfigFile cfg = load_config(sim_config);
      harness::SimulateRequest req;
      req.family.p = 4;
      req.family.s = 3;
      req.family.num_tasks = 2;
      fill(req.family.p, cfg, "p");
      fill(req.family.s, cfg, "s");
      fill(req.family.num_tasks, cfg, "K");
      req.family.n_identifiable = req.family.num_tasks;
      fill(req.family.n_identifiable, cfg, "Kp");
      fill(req.n, cfg, "n");
      fill(req.seed, cfg, "seed");
      fill(req.family.keep_prob, cfg, "keep_prob");
      if (cfg.doc.contains("weight_range")) {
        std::vector<double> r;
        fill(r, cfg, "weight_range");
        if (r.size() != 2) throw Error(Errc::ParseError, "config line " + std::to_string(io::line_of_key(cfg.text, "weight_range")) + ": weight_range must be [lo, hi]");
        req.family.weight_lo = r[0];
        req.family.weight_hi = r[1];
      }
      if (sim_p) req.family.p = *sim_p;
      if (sim_s) req.family.s = *sim_s;
      if (sim_k) {
        req.family.num_tasks = *sim_k;
        if (!sim_kp && !cfg.doc.contains("Kp")) req.family.n_identifiable = *sim_k;
      }
      if (sim_kp) req.family.n_identifiable = *sim_kp;
      if (sim_n) req.n = *sim_n;
      if (sim_seed) req.seed = *sim_seed;
      if (sim_keep) req.family.keep_prob = *sim_keep;
      if (sim_lo) req.family.weight_lo = *sim_lo;
      if (sim_hi) req.family.weight_hi = *sim_hi;
      if (!cfg.doc.contains("seed") && !sim_seed) {
        std::cerr << "simulate: a seed is required (--seed or config 'seed')\n";
        return 1;
      }
      req.out_dir = sim_out;
      std::cout << harness::run_simulate(req).string() << '\n';
      return 0;
    }

    if (*fit || *oracle) {
      FitArgs& a = *fit ? fit_args : oracle_args;
      const ConfigFile cfg = load_config(a.config);
      harness::FitRequest req;
      req.hyper = hyper_from(cfg);
      std::string rule = "theory:0.3";
      fill(rule, cfg, "lambda_rule");
      if (!a.lambda_rule.empty()) rule = a.lambda_rule;
      req.lambda_rule = harness::parse_lambda_rule(rule);
      if (cfg.doc.contains("hyper") && cfg.doc.at("hyper").contains("lambda") && a.lambda_rule.empty()) {
        req.use_lambda_rule = false;
      }
      if (a.lambda) {
        req.hyper.lambda = *a.lambda;
        req.use_lambda_rule = false;
      }
      if (a.seed) req.hyper.seed = *a.seed;
      if (a.refit) req.hyper.refit = true;
      req.oracle = *oracle || a.oracle;
      req.threads = a.threads > 0 ? a.threads : default_threads();
      for (const auto& d : a.data) req.data.emplace_back(d);
      req.out_dir = a.out;
      const auto summary = harness::run_fit(req);
      std::cout << "method=" << summary.method << " objective=" << io::format_double(summary.objective)
                << " converged=" << (summary.converged ? "true" : "false") << " out=" << a.out << '\n';
      return 0;
    }

    if (*eval) {
      eval_req.family = eval_family;
      eval_req.edges = eval_edges;
      eval_req.order = eval_order;
      eval_req.out = eval_out;
      const auto rows = harness::run_eval(eval_req);
      if (eval_out.empty()) std::cout << harness::metrics_csv(rows);
      return 0;
    }

    if (*sweep) {
      harness::SweepConfig cfg = harness::parse_sweep_config(io::read_text(sweep_config));
      if (!sweep_out.empty()) cfg.out_dir = sweep_out;
      if (sweep_threads) cfg.threads = std::max(1, *sweep_threads);
      if (sweep_fresh) cfg.resume = false;
      std::cout << harness::run_sweep(cfg).string() << '\n';
      return 0;
    }

    if (*agg) {
      const auto mode = harness::parse_aggregate_mode(agg_mode);
      const std::string text = harness::run_aggregate(agg_results, mode, agg_out);
      if (agg_out.empty()) std::cout << text;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
