#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "multidag/graph_core.hpp"
#include "multidag/joint_solver.hpp"
#include "multidag/sem_sim.hpp"
#include "multidag/types.hpp"

namespace multidag::io {

namespace fs = std::filesystem;

// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double v);
double parse_double(std::string_view text);

// A header plus string cells; the harness's own reader for every CSV it writes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const;  // throws ParseError if absent
};

CsvTable read_csv(const fs::path& path);
std::vector<std::string> split_csv_line(std::string_view line);

// Data matrices: header x1..xp, one comma-separated row per sample.
void write_task_csv(const fs::path& path, const Matrix& x);
Matrix read_task_csv(const fs::path& path);
TaskBundle read_bundle(const std::vector<fs::path>& paths);

std::string family_to_json(const SemFamily& family);
SemFamily family_from_json(std::string_view text);
void write_family(const fs::path& path, const SemFamily& family);
SemFamily read_family(const fs::path& path);

// Edge lists: columns src,dst,weight,task with 0-based node indices.
void write_edge_list(const fs::path& path, const std::vector<AdjacencyMatrix>& tasks);
std::vector<AdjacencyMatrix> read_edge_list(const fs::path& path, int p, int num_tasks);

// Order files: columns node,rank.
void write_order(const fs::path& path, const Permutation& order);
Permutation read_order(const fs::path& path);

void write_diagnostics(const fs::path& path, const std::vector<IterationRecord>& records);

// Hyperparameters as a flat JSON object; unknown keys are rejected and
// errors name the offending line.
Hyperparams hyperparams_from_json(std::string_view text, Hyperparams base = {});
std::string hyperparams_to_json(const Hyperparams& h);

void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

// 1-based line of the first occurrence of "key" in a JSON document, or 0.
int line_of_key(std::string_view text, std::string_view key);

}  // namespace multidag::io
