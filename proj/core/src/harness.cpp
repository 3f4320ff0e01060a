#include "multidag/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json_config.hpp"
#include "multidag/errors.hpp"
#include "multidag/exhaustive_oracle.hpp"
#include "multidag/io.hpp"
#include "multidag/seeding.hpp"

namespace multidag::harness {

using io::format_double;
using io::detail::json;

namespace {

constexpr std::uint64_t kDataStream = 0x64617461ULL;
constexpr std::uint64_t kFitStream = 0x666974ULL;

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

int min_rows(const TaskBundle& bundle) {
  int n = bundle.n(0);
  for (int k = 1; k < bundle.num_tasks(); ++k) n = std::min(n, bundle.n(k));
  return n;
}

std::vector<AdjacencyMatrix> threshold(const WeightStack& w, double omega) {
  std::vector<AdjacencyMatrix> out;
  for (int k = 0; k < w.num_tasks(); ++k) out.push_back((w[k].array().abs() > omega).select(w[k], 0.0));
  return out;
}

}  // namespace

double LambdaRule::resolve(int p, int n) const {
  return kind == Kind::Fixed ? value : theory_lambda(p, n, c);
}

LambdaRule parse_lambda_rule(std::string_view spec) {
  LambdaRule rule;
  const auto colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view() : spec.substr(colon + 1);
  if (kind == "theory") {
    rule.kind = LambdaRule::Kind::Theory;
    if (!arg.empty()) rule.c = io::parse_double(arg);
  } else if (kind == "fixed") {
    rule.kind = LambdaRule::Kind::Fixed;
    if (arg.empty()) throw Error(Errc::InvalidArgument, "fixed lambda rule needs a value, e.g. fixed:0.05");
    rule.value = io::parse_double(arg);
  } else {
    throw Error(Errc::InvalidArgument, "lambda rule '" + std::string(spec) + "' (expected theory[:c] or fixed:value)");
  }
  if (rule.c < 0 || rule.value < 0) throw Error(Errc::InvalidArgument, "lambda rule values must be non-negative");
  return rule;
}

std::string to_string(const LambdaRule& rule) {
  return rule.kind == LambdaRule::Kind::Theory ? "theory:" + format_double(rule.c) : "fixed:" + format_double(rule.value);
}

// ---- simulate ------------------------------------------------------------

fs::path run_simulate(const SimulateRequest& req) {
  const SemFamily family = generate_family(req.family, req.seed);
  const TaskBundle bundle = sample_data(family, req.n, derive_seed(req.seed, kDataStream));
  fs::create_directories(req.out_dir);
  io::write_family(req.out_dir / "family.json", family);
  json tasks = json::array();
  for (int k = 0; k < bundle.num_tasks(); ++k) {
    const std::string name = "task_" + std::to_string(k) + ".csv";
    io::write_task_csv(req.out_dir / name, bundle.data(k));
    tasks.push_back(name);
  }
  const json manifest{{"family", "family.json"},
                      {"tasks", tasks},
                      {"p", req.family.p},
                      {"s", req.family.s},
                      {"K", req.family.num_tasks},
                      {"Kp", req.family.n_identifiable},
                      {"n", req.n},
                      {"seed", req.seed},
                      {"keep_prob", req.family.keep_prob},
                      {"weight_range", {req.family.weight_lo, req.family.weight_hi}}};
  const fs::path path = req.out_dir / "manifest.json";
  io::write_text(path, manifest.dump(2) + "\n");
  return path;
}

// ---- fit -----------------------------------------------------------------

FitSummary run_fit(const FitRequest& req) {
  const TaskBundle bundle = io::read_bundle(req.data);
  Hyperparams hyper = req.hyper;
  if (req.use_lambda_rule) hyper.lambda = req.lambda_rule.resolve(bundle.p(), min_rows(bundle));

  FitSummary summary;
  summary.lambda = hyper.lambda;
  std::vector<IterationRecord> diagnostics;
  const auto start = std::chrono::steady_clock::now();
  if (req.oracle) {
    const ExhaustiveFit fit = fit_exhaustive(bundle, hyper.lambda, req.max_p, req.threads);
    summary.method = "exhaustive";
    summary.objective = fit.objective;
    summary.h = 0.0;
    summary.converged = true;
    summary.order = fit.order;
    if (hyper.refit) {
      const MaskMatrix mask = mask_from_permutation(fit.order);
      summary.adjacency = extract_estimate(fit.weights, mask, hyper.edge_threshold, bundle, true).adjacency;
    } else {
      summary.adjacency = threshold(fit.weights, hyper.edge_threshold);
    }
  } else {
    EstimationResult result = fit_joint(bundle, hyper);
    summary.method = "joint";
    summary.objective = result.objective;
    summary.h = result.h_before_projection;
    summary.converged = result.converged;
    summary.note = result.note;
    if (!result.order) {
      throw Error(Errc::NotPermutationMask, "fit produced no order: " + result.note);
    }
    summary.order = *result.order;
    summary.adjacency = result.per_task_adjacency;
    diagnostics = std::move(result.diagnostics);
  }
  summary.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(req.out_dir);
  io::write_edge_list(req.out_dir / "edges.csv", summary.adjacency);
  io::write_order(req.out_dir / "order.csv", summary.order);
  io::write_diagnostics(req.out_dir / "diagnostics.csv", diagnostics);
  const json j{{"method", summary.method},
               {"objective", summary.objective},
               {"h", summary.h},
               {"converged", summary.converged},
               {"wall_time_s", summary.wall_time_s},
               {"lambda", summary.lambda},
               {"p", bundle.p()},
               {"K", bundle.num_tasks()},
               {"n", min_rows(bundle)},
               {"order_nodes", summary.order.node_order()},
               {"note", summary.note},
               {"hyperparameters", io::detail::hyperparams_json(hyper)}};
  io::write_text(req.out_dir / "summary.json", j.dump(2) + "\n");
  return summary;
}

// ---- eval ----------------------------------------------------------------

std::vector<MetricsReport> run_eval(const EvalRequest& req) {
  const SemFamily family = io::read_family(req.family);
  const Permutation order = io::read_order(req.order);
  if (order.size() != family.p()) {
    throw Error(Errc::DimensionMismatch, "order has " + std::to_string(order.size()) + " nodes but the family has p = " +
                                             std::to_string(family.p()));
  }
  const auto estimates = io::read_edge_list(req.edges, family.p(), family.num_tasks());
  const auto truths = family.weight_matrices();
  ReportContext ctx;
  ctx.p = family.p();
  ctx.s = static_cast<int>(family.union_support.size());
  ctx.num_tasks = family.num_tasks();
  ctx.n_identifiable = family.n_identifiable;
  ctx.n = req.n;
  ctx.lambda = req.lambda;
  ctx.seed = req.seed;
  auto rows = evaluate_tasks(estimates, truths, order, ctx);
  if (!req.out.empty()) io::write_text(req.out, metrics_csv(rows));
  return rows;
}

std::string metrics_csv(const std::vector<MetricsReport>& rows) {
  std::ostringstream out;
  out << "task,p,s,K,Kp,n,lambda,seed,theta,order_success,fdr,tpr,fpr,shd,nnz,frob_err\n";
  for (const auto& r : rows) {
    const auto& c = r.context;
    out << (r.task < 0 ? std::string("mean") : std::to_string(r.task)) << ',' << c.p << ',' << c.s << ','
        << c.num_tasks << ',' << c.n_identifiable << ',' << c.n << ',' << format_double(c.lambda) << ',' << c.seed
        << ',' << format_double(r.theta) << ',' << (r.order_success ? 1 : 0) << ',' << format_double(r.fdr) << ','
        << format_double(r.tpr) << ',' << format_double(r.fpr) << ',' << format_double(r.shd) << ','
        << format_double(r.nnz) << ',' << format_double(r.frob_err) << '\n';
  }
  return out.str();
}

// ---- sweep ---------------------------------------------------------------

const std::vector<std::string> kResultsColumns = {
    "p",   "s",   "K",   "Kp",  "n",   "replicate", "task",     "seed",      "lambda", "theta",
    "order_success", "fdr", "tpr", "fpr", "shd", "nnz", "frob_err", "converged", "runtime_s", "status"};

void SweepConfig::validate() const {
  if (ps.empty()) throw Error(Errc::InvalidArgument, "sweep needs at least one (p, s) pair");
  if (num_tasks.empty()) throw Error(Errc::InvalidArgument, "sweep needs a non-empty K grid");
  if (n.empty() == log_theta.empty()) throw Error(Errc::InvalidArgument, "sweep needs exactly one of the n or log_theta grids");
  if (replicates < 1) throw Error(Errc::InvalidArgument, "replicates must be >= 1");
  if (threads < 1) throw Error(Errc::InvalidArgument, "threads must be >= 1");
  for (int v : n)
    if (v < 1) throw Error(Errc::InvalidArgument, "n grid values must be >= 1");
  for (int k : num_tasks)
    if (k < 1) throw Error(Errc::InvalidArgument, "K grid values must be >= 1");
  for (auto [p, s] : ps) {
    FamilyConfig fc;
    fc.p = p;
    fc.s = s;
    fc.weight_lo = weight_lo;
    fc.weight_hi = weight_hi;
    fc.keep_prob = keep_prob;
    fc.hetero_var_lo = hetero_var_lo;
    fc.hetero_var_hi = hetero_var_hi;
    fc.validate();
  }
  if (lambda_rule.kind == LambdaRule::Kind::Theory && lambda_rule.c < 0) throw Error(Errc::InvalidArgument, "lambda c must be >= 0");
  hyper.validate();
}

SweepConfig parse_sweep_config(std::string_view text) {
  using io::detail::config_error;
  using io::detail::get_as;
  const json j = io::detail::parse_json(text, "sweep config");
  if (!j.is_object()) throw Error(Errc::ParseError, "sweep config must be a JSON object");
  SweepConfig c;
  if (const char* env = std::getenv("MULTIDAG_THREADS")) {
    try {
      c.threads = std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "MULTIDAG_THREADS must be an integer");
    }
  }
  std::vector<int> p_grid, s_grid;
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key == "ps") {
      for (const auto& pair : get_as<std::vector<std::vector<int>>>(j, key, text)) {
        if (pair.size() != 2) config_error(text, key, "'ps' entries must be [p, s] pairs");
        c.ps.emplace_back(pair[0], pair[1]);
      }
    } else if (key == "p") p_grid = get_as<std::vector<int>>(j, key, text);
    else if (key == "s") s_grid = get_as<std::vector<int>>(j, key, text);
    else if (key == "K") c.num_tasks = get_as<std::vector<int>>(j, key, text);
    else if (key == "Kp") c.n_identifiable = get_as<std::vector<int>>(j, key, text);
    else if (key == "n") c.n = get_as<std::vector<int>>(j, key, text);
    else if (key == "log_theta") c.log_theta = get_as<std::vector<double>>(j, key, text);
    else if (key == "replicates") c.replicates = get_as<int>(j, key, text);
    else if (key == "seed") c.base_seed = get_as<std::uint64_t>(j, key, text);
    else if (key == "hyper") c.hyper = io::detail::apply_hyperparams(j.at(key), text, c.hyper);
    else if (key == "lambda_rule") {
      try {
        c.lambda_rule = parse_lambda_rule(get_as<std::string>(j, key, text));
      } catch (const Error& e) {
        if (e.code() == Errc::ParseError && std::string_view(e.what()).find("line") != std::string_view::npos) throw;
        config_error(text, key, e.what());
      }
    } else if (key == "weight_range") {
      const auto r = get_as<std::vector<double>>(j, key, text);
      if (r.size() != 2) config_error(text, key, "'weight_range' must be [lo, hi]");
      c.weight_lo = r[0];
      c.weight_hi = r[1];
    } else if (key == "hetero_var_range") {
      const auto r = get_as<std::vector<double>>(j, key, text);
      if (r.size() != 2) config_error(text, key, "'hetero_var_range' must be [lo, hi]");
      c.hetero_var_lo = r[0];
      c.hetero_var_hi = r[1];
    } else if (key == "keep_prob") c.keep_prob = get_as<double>(j, key, text);
    else if (key == "output") c.out_dir = get_as<std::string>(j, key, text);
    else if (key == "threads") c.threads = get_as<int>(j, key, text);
    else if (key == "resume") c.resume = get_as<bool>(j, key, text);
    else if (key == "record_runtime") c.record_runtime = get_as<bool>(j, key, text);
    else config_error(text, key, "unknown sweep config key '" + key + "'");
  }
  if (!p_grid.empty() || !s_grid.empty()) {
    if (!c.ps.empty()) config_error(text, "ps", "give either 'ps' pairs or 'p' and 's' grids, not both");
    if (p_grid.empty() || s_grid.empty()) config_error(text, p_grid.empty() ? "s" : "p", "'p' and 's' grids go together");
    for (int p : p_grid)
      for (int s : s_grid) c.ps.emplace_back(p, s);
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(Errc::ParseError, std::string("sweep config: ") + e.what());
  }
  return c;
}

int n_for_log_theta(double log_theta, int p, int s, int num_tasks, int n_identifiable) {
  if (p < 2 || s < 1 || num_tasks < 1 || n_identifiable < 1) {
    throw Error(Errc::InvalidArgument, "log-theta grids need p >= 2, s >= 1 and K' >= 1");
  }
  const double target = std::exp(log_theta) * s / p;
  const double n = target * target * num_tasks * p * std::log(static_cast<double>(p)) /
                   (static_cast<double>(n_identifiable) * n_identifiable);
  return std::max(1, static_cast<int>(std::ceil(n - 1e-9)));
}

std::vector<SweepCell> expand_cells(const SweepConfig& config) {
  std::vector<SweepCell> cells;
  for (auto [p, s] : config.ps) {
    for (int k : config.num_tasks) {
      std::vector<int> kps = config.n_identifiable.empty() ? std::vector<int>{k} : config.n_identifiable;
      for (int kp : kps) {
        if (kp > k) continue;
        if (!config.n.empty()) {
          for (int n : config.n) cells.push_back({p, s, k, kp, n});
        } else {
          for (double lt : config.log_theta) cells.push_back({p, s, k, kp, n_for_log_theta(lt, p, s, k, kp)});
        }
      }
    }
  }
  return cells;
}

Seed cell_seed(Seed base, const SweepCell& cell, int replicate) {
  return hash_seed(base, {static_cast<std::uint64_t>(cell.p), static_cast<std::uint64_t>(cell.s),
                          static_cast<std::uint64_t>(cell.n), static_cast<std::uint64_t>(replicate)});
}

namespace {

std::string group_key(const std::string& p, const std::string& s, const std::string& k, const std::string& kp,
                      const std::string& n, const std::string& rep) {
  return p + ',' + s + ',' + k + ',' + kp + ',' + n + ',' + rep;
}

std::string group_key(const SweepCell& c, int replicate) {
  return group_key(std::to_string(c.p), std::to_string(c.s), std::to_string(c.num_tasks),
                   std::to_string(c.n_identifiable), std::to_string(c.n), std::to_string(replicate));
}

std::string header_line() {
  std::string h;
  for (std::size_t i = 0; i < kResultsColumns.size(); ++i) h += (i ? "," : "") + kResultsColumns[i];
  return h + '\n';
}

std::string run_replicate(const SweepConfig& config, const SweepCell& cell, int replicate) {
  const Seed seed = cell_seed(config.base_seed, cell, replicate);
  FamilyConfig fc;
  fc.p = cell.p;
  fc.s = cell.s;
  fc.num_tasks = cell.num_tasks;
  fc.n_identifiable = cell.n_identifiable;
  fc.weight_lo = config.weight_lo;
  fc.weight_hi = config.weight_hi;
  fc.keep_prob = config.keep_prob;
  fc.hetero_var_lo = config.hetero_var_lo;
  fc.hetero_var_hi = config.hetero_var_hi;

  Hyperparams hyper = config.hyper;
  hyper.lambda = config.lambda_rule.resolve(cell.p, cell.n);
  hyper.seed = derive_seed(seed, kFitStream);

  double th = std::nan("");
  if (cell.p >= 2 && cell.s > 0 && cell.n_identifiable > 0) {
    th = theta(cell.n, cell.num_tasks, cell.n_identifiable, cell.p, cell.s);
  }

  std::ostringstream out;
  auto prefix = [&](int task) {
    out << cell.p << ',' << cell.s << ',' << cell.num_tasks << ',' << cell.n_identifiable << ',' << cell.n << ','
        << replicate << ',' << task << ',' << seed << ',' << format_double(hyper.lambda) << ',' << format_double(th)
        << ',';
  };

  const auto start = std::chrono::steady_clock::now();
  try {
    const SemFamily family = generate_family(fc, seed);
    const TaskBundle bundle = sample_data(family, cell.n, derive_seed(seed, kDataStream));
    const EstimationResult result = fit_joint(bundle, hyper);
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto truths = family.weight_matrices();
    const bool success = result.order && order_success(*result.order, truths);
    for (int k = 0; k < cell.num_tasks; ++k) {
      const auto& est = result.per_task_adjacency[static_cast<std::size_t>(k)];
      const auto& truth = truths[static_cast<std::size_t>(k)];
      const StructureMetrics sm = structure_metrics(est, truth);
      prefix(k);
      out << (success ? 1 : 0) << ',' << format_double(sm.fdr) << ',' << format_double(sm.tpr) << ','
          << format_double(sm.fpr) << ',' << sm.shd << ',' << sm.nnz << ','
          << format_double((est - truth).squaredNorm()) << ',' << (result.converged ? 1 : 0) << ','
          << format_double(config.record_runtime ? runtime : 0.0) << ",ok\n";
    }
  } catch (const Error& e) {
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (int k = 0; k < cell.num_tasks; ++k) {
      prefix(k);
      out << "0,nan,nan,nan,nan,nan,nan,0," << format_double(config.record_runtime ? runtime : 0.0)
          << ",error:" << sanitize(e.what()) << '\n';
    }
  }
  return out.str();
}

// Keeps only complete (cell, replicate) groups of an existing results file
// and returns their keys.
std::set<std::string> recover_results(const fs::path& path) {
  std::set<std::string> done;
  if (!fs::exists(path)) return done;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line + '\n' != header_line()) {
    throw Error(Errc::ParseError, path.string() + ": existing results file has an unexpected header; refusing to resume");
  }
  std::vector<std::string> lines;
  std::map<std::string, int> counts;
  std::map<std::string, int> expected;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // a final line without '\n' is a torn write
    const auto cells = io::split_csv_line(line);
    if (cells.size() != kResultsColumns.size()) continue;
    const std::string key = group_key(cells[0], cells[1], cells[2], cells[3], cells[4], cells[5]);
    ++counts[key];
    expected[key] = std::atoi(cells[2].c_str());
    lines.push_back(line);
  }
  for (const auto& [key, count] : counts)
    if (count == expected[key]) done.insert(key);

  std::string kept = header_line();
  for (const auto& l : lines) {
    const auto cells = io::split_csv_line(l);
    if (done.count(group_key(cells[0], cells[1], cells[2], cells[3], cells[4], cells[5]))) kept += l + '\n';
  }
  io::write_text(path, kept);
  return done;
}

}  // namespace

fs::path run_sweep(const SweepConfig& config) {
  config.validate();
  if (config.out_dir.empty()) throw Error(Errc::InvalidArgument, "sweep needs an output directory");
  fs::create_directories(config.out_dir);
  const fs::path path = config.out_dir / "results.csv";

  std::set<std::string> done;
  if (config.resume) {
    done = recover_results(path);
  }
  if (!config.resume || !fs::exists(path)) io::write_text(path, header_line());

  struct Job {
    SweepCell cell;
    int replicate;
  };
  std::vector<Job> jobs;
  for (const auto& cell : expand_cells(config))
    for (int r = 0; r < config.replicates; ++r)
      if (!done.count(group_key(cell, r))) jobs.push_back({cell, r});

  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(Errc::IoError, "cannot append to " + path.string());

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), jobs.size());
  if (workers <= 1) {
    for (const auto& job : jobs) {
      out << run_replicate(config, job.cell, job.replicate);
      out.flush();
    }
    return path;
  }

  // Workers finish in any order; rows are committed in job order.
  std::vector<std::optional<std::string>> slots(jobs.size());
  std::mutex mu;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        std::string rows = run_replicate(config, jobs[i].cell, jobs[i].replicate);
        {
          std::lock_guard lock(mu);
          slots[i] = std::move(rows);
        }
        ready.notify_all();
      }
    });
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::string rows;
    {
      std::unique_lock lock(mu);
      ready.wait(lock, [&] { return slots[i].has_value(); });
      rows = std::move(*slots[i]);
      slots[i].reset();
    }
    out << rows;
    out.flush();
  }
  for (auto& th : pool) th.join();
  return path;
}

// ---- aggregate -----------------------------------------------------------

AggregateMode parse_aggregate_mode(std::string_view name) {
  if (name == "transition") return AggregateMode::Transition;
  if (name == "heatmap") return AggregateMode::Heatmap;
  if (name == "table") return AggregateMode::Table;
  throw Error(Errc::InvalidArgument, "aggregate mode '" + std::string(name) + "' (expected transition|heatmap|table)");
}

namespace {

struct Tally {
  double sum = 0.0;
  double sum_sq = 0.0;
  int count = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  double mean() const { return count ? sum / count : std::nan(""); }
  double stddev() const {
    if (count < 2) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, (sum_sq - count * m * m) / (count - 1)));
  }
};

}  // namespace

std::string run_aggregate(const fs::path& results, AggregateMode mode, const fs::path& out_path) {
  const io::CsvTable t = io::read_csv(results);
  if (t.rows.empty()) throw Error(Errc::InvalidArgument, results.string() + ": no result rows to aggregate");
  const int cp = t.column("p"), cs = t.column("s"), ck = t.column("K"), cn = t.column("n"), ctask = t.column("task"),
            ctheta = t.column("theta"), csucc = t.column("order_success"), cshd = t.column("shd");
  auto num = [](const std::vector<std::string>& row, int c) { return io::parse_double(row[static_cast<std::size_t>(c)]); };
  auto integer = [&](const std::vector<std::string>& row, int c) { return static_cast<int>(num(row, c)); };

  std::ostringstream out;
  if (mode == AggregateMode::Transition) {
    constexpr double kBin = 0.25;
    std::map<std::pair<int, long long>, Tally> bins;
    for (const auto& row : t.rows) {
      if (integer(row, ctask) != 0) continue;
      const double th = num(row, ctheta);
      if (!(th > 0.0)) continue;
      const long long bin = static_cast<long long>(std::floor(std::log(th) / kBin + 1e-9));
      bins[{integer(row, cp), bin}].add(num(row, csucc));
    }
    out << "log_theta_bin,p,success_prob,count\n";
    for (const auto& [key, tally] : bins) {
      out << format_double(static_cast<double>(key.second) * kBin) << ',' << key.first << ','
          << format_double(tally.mean()) << ',' << tally.count << '\n';
    }
  } else if (mode == AggregateMode::Heatmap) {
    std::map<std::tuple<int, int, int, int>, Tally> grid;
    for (const auto& row : t.rows) {
      if (integer(row, ctask) != 0) continue;
      grid[{integer(row, cp), integer(row, cs), integer(row, cn), integer(row, ck)}].add(num(row, csucc));
    }
    out << "p,s,n,K,success_prob,count\n";
    for (const auto& [key, tally] : grid) {
      const auto [p, s, n, k] = key;
      out << p << ',' << s << ',' << n << ',' << k << ',' << format_double(tally.mean()) << ',' << tally.count << '\n';
    }
  } else {
    std::map<std::tuple<int, int, int>, Tally> table;
    for (const auto& row : t.rows) {
      const double shd = num(row, cshd);
      if (std::isnan(shd)) continue;
      table[{integer(row, cp), integer(row, cn), integer(row, ck)}].add(shd);
    }
    out << "p,n,K,shd_mean,shd_std,count\n";
    for (const auto& [key, tally] : table) {
      const auto [p, n, k] = key;
      out << p << ',' << n << ',' << k << ',' << format_double(tally.mean()) << ',' << format_double(tally.stddev())
          << ',' << tally.count << '\n';
    }
  }
  const std::string text = out.str();
  if (!out_path.empty()) io::write_text(out_path, text);
  return text;
}

}  // namespace multidag::harness
