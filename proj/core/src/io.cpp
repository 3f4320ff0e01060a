#include "multidag/io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_config.hpp"
#include "multidag/errors.hpp"

namespace multidag::io {

using detail::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(Errc::ParseError, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw Error(Errc::ParseError, "missing column '" + std::string(name) + "'");
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  return out;
}

[[noreturn]] void data_error(const fs::path& path, std::size_t line, const std::string& message) {
  throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line) + ": " + message);
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      data_error(path, lineno, "expected " + std::to_string(table.header.size()) + " fields, found " +
                                   std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw Error(Errc::ParseError, path.string() + ": empty file");
  return table;
}

void write_task_csv(const fs::path& path, const Matrix& x) {
  std::ofstream out = open_out(path);
  std::string buf;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (c) buf += ',';
    buf += 'x' + std::to_string(c + 1);
  }
  buf += '\n';
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (c) buf += ',';
      buf += format_double(x(r, c));
    }
    buf += '\n';
  }
  out << buf;
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

Matrix read_task_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (header.empty()) {
      header = cells;
      for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] != "x" + std::to_string(c + 1)) {
          data_error(path, lineno, "header column " + std::to_string(c + 1) + " should be x" + std::to_string(c + 1) +
                                       ", found '" + header[c] + "'");
        }
      }
      continue;
    }
    if (cells.size() != header.size()) {
      data_error(path, lineno, "expected " + std::to_string(header.size()) + " fields, found " +
                                   std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      try {
        v = parse_double(cells[c]);
      } catch (const Error&) {
        data_error(path, lineno, "field " + std::to_string(c + 1) + " is not a number: '" + cells[c] + "'");
      }
      if (!std::isfinite(v)) data_error(path, lineno, "field " + std::to_string(c + 1) + " is not finite");
      values.push_back(v);
    }
    ++rows;
  }
  if (header.empty()) throw Error(Errc::ParseError, path.string() + ": missing header");
  if (rows == 0) throw Error(Errc::ParseError, path.string() + ": no data rows");
  const auto p = static_cast<Eigen::Index>(header.size());
  Matrix x(static_cast<Eigen::Index>(rows), p);
  for (std::size_t r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < p; ++c) x(static_cast<Eigen::Index>(r), c) = values[r * static_cast<std::size_t>(p) + static_cast<std::size_t>(c)];
  return x;
}

TaskBundle read_bundle(const std::vector<fs::path>& paths) {
  if (paths.empty()) throw Error(Errc::InvalidArgument, "no data files given");
  std::vector<Matrix> data;
  data.reserve(paths.size());
  for (const auto& path : paths) {
    data.push_back(read_task_csv(path));
    if (data.back().cols() != data.front().cols()) {
      throw Error(Errc::DimensionMismatch, path.string() + " has " + std::to_string(data.back().cols()) +
                                               " columns but " + paths.front().string() + " has " +
                                               std::to_string(data.front().cols()));
    }
  }
  return TaskBundle(std::move(data));
}

std::string family_to_json(const SemFamily& family) {
  json j;
  j["p"] = family.p();
  j["K"] = family.num_tasks();
  j["n_identifiable"] = family.n_identifiable;
  j["shared_order"] = {{"ranks", family.shared_order.ranks()}, {"nodes", family.shared_order.node_order()}};
  json support = json::array();
  for (auto [a, b] : family.union_support) support.push_back({a, b});
  j["union_support"] = support;
  json models = json::array();
  for (const auto& m : family.models) {
    json edges = json::array();
    for (int a = 0; a < m.p(); ++a)
      for (int b = 0; b < m.p(); ++b)
        if (m.weights(a, b) != 0.0) edges.push_back({{"src", a}, {"dst", b}, {"weight", m.weights(a, b)}});
    std::vector<double> vars(m.noise_vars.data(), m.noise_vars.data() + m.noise_vars.size());
    models.push_back({{"edges", edges}, {"noise_vars", vars}});
  }
  j["models"] = models;
  return j.dump(2) + "\n";
}

SemFamily family_from_json(std::string_view text) {
  const json j = detail::parse_json(text, "family");
  SemFamily family;
  try {
    const int p = j.at("p").get<int>();
    family.shared_order = Permutation(j.at("shared_order").at("ranks").get<std::vector<int>>());
    if (family.shared_order.size() != p) throw Error(Errc::ParseError, "shared_order length differs from p");
    family.n_identifiable = j.at("n_identifiable").get<int>();
    for (const auto& e : j.at("union_support")) family.union_support.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& jm : j.at("models")) {
      SemModel m;
      m.order = family.shared_order;
      m.weights = AdjacencyMatrix::Zero(p, p);
      for (const auto& e : jm.at("edges")) {
        const int a = e.at("src").get<int>();
        const int b = e.at("dst").get<int>();
        if (a < 0 || b < 0 || a >= p || b >= p) throw Error(Errc::ParseError, "edge index out of range");
        m.weights(a, b) = e.at("weight").get<double>();
      }
      const auto vars = jm.at("noise_vars").get<std::vector<double>>();
      if (static_cast<int>(vars.size()) != p) throw Error(Errc::ParseError, "noise_vars length differs from p");
      m.noise_vars = Eigen::Map<const Vector>(vars.data(), p);
      family.models.push_back(std::move(m));
    }
    if (j.contains("K") && j.at("K").get<int>() != family.num_tasks()) {
      throw Error(Errc::ParseError, "K differs from the number of models");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("family: ") + e.what());
  }
  family.validate();
  return family;
}

void write_family(const fs::path& path, const SemFamily& family) { write_text(path, family_to_json(family)); }

SemFamily read_family(const fs::path& path) {
  try {
    return family_from_json(read_text(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_edge_list(const fs::path& path, const std::vector<AdjacencyMatrix>& tasks) {
  std::ofstream out = open_out(path);
  out << "src,dst,weight,task\n";
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto& g = tasks[k];
    for (Eigen::Index a = 0; a < g.rows(); ++a)
      for (Eigen::Index b = 0; b < g.cols(); ++b)
        if (g(a, b) != 0.0) out << a << ',' << b << ',' << format_double(g(a, b)) << ',' << k << '\n';
  }
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

std::vector<AdjacencyMatrix> read_edge_list(const fs::path& path, int p, int num_tasks) {
  const CsvTable t = read_csv(path);
  const int src = t.column("src"), dst = t.column("dst"), w = t.column("weight"), task = t.column("task");
  std::vector<AdjacencyMatrix> out(static_cast<std::size_t>(num_tasks), AdjacencyMatrix::Zero(p, p));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    try {
      const int a = static_cast<int>(parse_double(row[static_cast<std::size_t>(src)]));
      const int b = static_cast<int>(parse_double(row[static_cast<std::size_t>(dst)]));
      const int k = static_cast<int>(parse_double(row[static_cast<std::size_t>(task)]));
      if (a < 0 || b < 0 || a >= p || b >= p || a == b) throw Error(Errc::DimensionMismatch, "edge index outside [0, p)");
      if (k < 0 || k >= num_tasks) throw Error(Errc::DimensionMismatch, "task index outside [0, K)");
      out[static_cast<std::size_t>(k)](a, b) = parse_double(row[static_cast<std::size_t>(w)]);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": data row " + std::to_string(r + 1) + ": " + e.what());
    }
  }
  return out;
}

void write_order(const fs::path& path, const Permutation& order) {
  std::ofstream out = open_out(path);
  out << "node,rank\n";
  for (int i = 0; i < order.size(); ++i) out << i << ',' << order.rank(i) << '\n';
}

Permutation read_order(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const int node = t.column("node"), rank = t.column("rank");
  std::vector<int> ranks(t.rows.size(), -1);
  for (const auto& row : t.rows) {
    const int i = static_cast<int>(parse_double(row[static_cast<std::size_t>(node)]));
    if (i < 0 || i >= static_cast<int>(ranks.size())) throw Error(Errc::ParseError, path.string() + ": node index out of range");
    ranks[static_cast<std::size_t>(i)] = static_cast<int>(parse_double(row[static_cast<std::size_t>(rank)]));
  }
  return Permutation(std::move(ranks));
}

void write_diagnostics(const fs::path& path, const std::vector<IterationRecord>& records) {
  std::ofstream out = open_out(path);
  out << "iteration,objective,h,beta,alpha\n";
  for (const auto& r : records) {
    out << r.iteration << ',' << format_double(r.objective) << ',' << format_double(r.h) << ','
        << format_double(r.beta) << ',' << format_double(r.alpha) << '\n';
  }
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_of_key(std::string_view text, std::string_view key) {
  const std::string needle = "\"" + std::string(key) + "\"";
  const auto pos = text.find(needle);
  if (pos == std::string_view::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

Hyperparams hyperparams_from_json(std::string_view text, Hyperparams base) {
  return detail::apply_hyperparams(detail::parse_json(text, "hyperparameters"), text, base);
}

std::string hyperparams_to_json(const Hyperparams& h) { return detail::hyperparams_json(h).dump(2) + "\n"; }

namespace detail {

json parse_json(std::string_view text, std::string_view origin) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    throw Error(Errc::ParseError, std::string(origin) + ": line " + std::to_string(line) + ": " + e.what());
  }
}

void config_error(std::string_view text, std::string_view key, const std::string& message) {
  const int line = line_of_key(text, key);
  throw Error(Errc::ParseError, (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + message);
}

Hyperparams apply_hyperparams(const json& obj, std::string_view text, Hyperparams h) {
  if (!obj.is_object()) throw Error(Errc::ParseError, "hyperparameters must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (key == "rho") h.rho = get_as<double>(obj, key, text);
    else if (key == "lambda") h.lambda = get_as<double>(obj, key, text);
    else if (key == "alpha0") h.alpha0 = get_as<double>(obj, key, text);
    else if (key == "beta0") h.beta0 = get_as<double>(obj, key, text);
    else if (key == "step") h.step = get_as<double>(obj, key, text);
    else if (key == "delta") h.delta = get_as<double>(obj, key, text);
    else if (key == "tau") h.tau = get_as<double>(obj, key, text);
    else if (key == "outer_iters") h.outer_iters = get_as<int>(obj, key, text);
    else if (key == "inner_iters") h.inner_iters = get_as<int>(obj, key, text);
    else if (key == "tol_h") h.tol_h = get_as<double>(obj, key, text);
    else if (key == "seed") h.seed = get_as<std::uint64_t>(obj, key, text);
    else if (key == "learning_rate") h.learning_rate = get_as<double>(obj, key, text);
    else if (key == "edge_threshold") h.edge_threshold = get_as<double>(obj, key, text);
    else if (key == "refit") h.refit = get_as<bool>(obj, key, text);
    else if (key == "round_tol") h.round_tol = get_as<double>(obj, key, text);
    else if (key == "final_projection") h.final_projection = get_as<bool>(obj, key, text);
    else if (key == "order_search_passes") h.order_search_passes = get_as<int>(obj, key, text);
    else if (key == "order_search_tol") h.order_search_tol = get_as<double>(obj, key, text);
    else if (key == "h_variant") {
      try {
        h.h_variant = parse_acyclicity_variant(get_as<std::string>(obj, key, text));
      } catch (const Error& e) {
        if (e.code() == Errc::ParseError) throw;
        config_error(text, key, e.what());
      }
    } else if (key == "optimizer") {
      try {
        h.optimizer = parse_gradient_optimizer(get_as<std::string>(obj, key, text));
      } catch (const Error& e) {
        if (e.code() == Errc::ParseError) throw;
        config_error(text, key, e.what());
      }
    } else {
      config_error(text, key, "unknown hyperparameter '" + key + "'");
    }
  }
  try {
    h.validate();
  } catch (const Error& e) {
    throw Error(Errc::ParseError, std::string("hyperparameters: ") + e.what());
  }
  return h;
}

json hyperparams_json(const Hyperparams& h) {
  return json{{"rho", h.rho},
              {"lambda", h.lambda},
              {"alpha0", h.alpha0},
              {"beta0", h.beta0},
              {"step", h.step},
              {"delta", h.delta},
              {"tau", h.tau},
              {"outer_iters", h.outer_iters},
              {"inner_iters", h.inner_iters},
              {"h_variant", std::string(to_string(h.h_variant))},
              {"tol_h", h.tol_h},
              {"seed", h.seed},
              {"optimizer", std::string(to_string(h.optimizer))},
              {"learning_rate", h.learning_rate},
              {"edge_threshold", h.edge_threshold},
              {"refit", h.refit},
              {"round_tol", h.round_tol},
              {"final_projection", h.final_projection},
              {"order_search_passes", h.order_search_passes},
              {"order_search_tol", h.order_search_tol}};
}

}  // namespace detail

}  // namespace multidag::io
