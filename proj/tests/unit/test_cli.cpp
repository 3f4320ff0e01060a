#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "multidag/io.hpp"

namespace fs = std::filesystem;
using namespace multidag;

namespace {

const std::string kCli = MULTIDAG_CLI_PATH;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("multidag_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Runs the CLI with output discarded and returns its exit status.
int run(const std::string& args) {
  const std::string cmd = "\"" + kCli + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("simulate --p 4") == 1);
  CHECK(run("--help") == 0);
}

TEST_CASE("simulate, fit, eval and aggregate") {
  const fs::path dir = scratch("flow");
  const std::string data = (dir / "data").string();
  REQUIRE(run("simulate --p 4 --s 3 --K 2 --n 200 --seed 7 --keep-prob 1 --out " + data) == 0);
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  CHECK(run("simulate --p 4 --s 3 --K 2 --n 200 --out " + (dir / "noseed").string()) == 1);

  const std::string tasks = data + "/task_0.csv " + data + "/task_1.csv";
  REQUIRE(run("fit --data " + tasks + " --seed 1 --out " + (dir / "fit").string()) == 0);
  CHECK(fs::exists(dir / "fit" / "summary.json"));
  CHECK(run("oracle --data " + tasks + " --out " + (dir / "oracle").string()) == 0);

  const std::string metrics = (dir / "metrics.csv").string();
  CHECK(run("eval --family " + data + "/family.json --edges " + (dir / "fit" / "edges.csv").string() + " --order " +
            (dir / "fit" / "order.csv").string() + " --n 200 --out " + metrics) == 0);
  CHECK(io::read_csv(metrics).rows.size() == 3);

  const fs::path sweep_cfg = dir / "sweep.json";
  io::write_text(sweep_cfg, R"({"p": [4], "s": [3], "K": [1, 2], "n": [40], "replicates": 2, "seed": 3,
    "record_runtime": false, "hyper": {"outer_iters": 3, "inner_iters": 20}})");
  const std::string sweep_out = (dir / "sweep").string();
  REQUIRE(run("sweep --config " + sweep_cfg.string() + " --out " + sweep_out) == 0);
  CHECK(io::read_csv(dir / "sweep" / "results.csv").rows.size() == 2 * 1 + 2 * 2);
  CHECK(run("aggregate --results " + sweep_out + "/results.csv --mode heatmap") == 0);
  CHECK(run("aggregate --results " + sweep_out + "/results.csv --mode pie") == 1);
}

TEST_CASE("data errors exit with 2") {
  const fs::path dir = scratch("data");
  io::write_text(dir / "bad.csv", "x1,x2\n1,2\n3,oops\n");
  CHECK(run("fit --data " + (dir / "bad.csv").string() + " --out " + (dir / "o").string()) == 2);

  io::write_text(dir / "cfg.json", "{\n  \"hyper\": {\"rhoo\": 1}\n}\n");
  io::write_text(dir / "ok.csv", "x1,x2\n1,2\n3,4\n5,7\n");
  CHECK(run("fit --data " + (dir / "ok.csv").string() + " --config " + (dir / "cfg.json").string() + " --out " +
            (dir / "o").string()) == 2);

  std::string wide = "x1,x2,x3,x4,x5,x6,x7\n";
  for (int r = 0; r < 10; ++r) wide += "1,2,3,4,5,6," + std::to_string(r) + "\n";
  io::write_text(dir / "wide.csv", wide);
  CHECK(run("oracle --data " + (dir / "wide.csv").string() + " --out " + (dir / "o").string()) == 2);
}

TEST_CASE("numeric failures exit with 3") {
  const fs::path dir = scratch("numeric");
  REQUIRE(run("simulate --p 4 --s 3 --K 1 --n 50 --seed 2 --out " + (dir / "data").string()) == 0);
  io::write_text(dir / "cfg.json", R"({"hyper": {"optimizer": "plain", "step": 1e12, "outer_iters": 3}})");
  CHECK(run("fit --data " + (dir / "data" / "task_0.csv").string() + " --config " + (dir / "cfg.json").string() +
            " --out " + (dir / "o").string()) == 3);
}
