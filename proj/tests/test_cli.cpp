#include "cli.hpp"

#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace mfde::cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mfde_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(MFDE_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config text parsing") {
  const KeyMap m = parse_config_text(
      "# comment\n"
      "[es]\n"
      "k = 0.3\n"
      "delay=zero   # trailing\n"
      "\n"
      "[avg]\n"
      "L = 5\n"
      "[result]\n"
      "status = ok\n",
      "es");
  CHECK(m.size() == 2);
  CHECK(m.at("k") == "0.3");
  CHECK(m.at("delay") == "zero");

  CHECK_THROWS_AS(parse_config_text("[es]\nbogus = 1\n", "es"), UsageError);
  CHECK_THROWS_AS(parse_config_text("[nowhere]\nk = 1\n", "es"), UsageError);
  CHECK_THROWS_AS(parse_config_text("[es]\nno equals sign\n", "es"), UsageError);
}

TEST_CASE("layering: defaults < file < command line") {
  const RunConfig cfg = resolve("es", {{"k", "0.5"}, {"c", "3"}}, {{"c", "4"}});
  CHECK(cfg.get("k") == "0.5");
  CHECK(cfg.get("c") == "4");
  CHECK(cfg.get("omega") == "8");
  CHECK(cfg.params.size() == defaults_for("es").size());
  CHECK_THROWS_AS(resolve("es", {}, {{"nope", "1"}}), UsageError);
}

TEST_CASE("argument parsing") {
  SUBCASE("avg with an eps list") {
    const char* argv[] = {"mfde", "avg", "--eps", "0.2,0.1"};
    const RunConfig cfg = parse_args(4, argv);
    CHECK(cfg.subcommand == "avg");
    CHECK(cfg.get("eps") == "0.2,0.1");
  }
  SUBCASE("es table1 preset") {
    const char* argv[] = {"mfde", "es", "--preset", "table1"};
    const RunConfig cfg = parse_args(4, argv);
    CHECK(cfg.get("preset") == "table1");
    CHECK(cfg.get("delay") == "sin5sq");
    CHECK(cfg.get("dt") == "1e-3");
  }
  SUBCASE("unknown flag") {
    const char* argv[] = {"mfde", "es", "--warp-speed", "9"};
    CHECK_THROWS_AS(parse_args(4, argv), UsageError);
  }
  SUBCASE("seed") {
    const char* argv[] = {"mfde", "integrate", "--seed", "7"};
    CHECK(parse_args(4, argv).seed == 7);
  }
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 6.02e23, -2.5e-300}) {
    CHECK(std::stod(fmt17(v)) == v);
  }
}

TEST_CASE("exit codes and files from the binary") {
  const fs::path d = scratch_dir("exit");
  CHECK(run_binary("") == 2);
  CHECK(run_binary("es --k banana --out " + (d / "bad").string()) == 2);
  CHECK(fs::is_empty(d));
  CHECK(run_binary("integrate --density one --f s") == 0);
}

TEST_CASE("es without predictor writes a converged summary") {
  const fs::path d = scratch_dir("es");
  const std::string prefix = (d / "run").string();
  REQUIRE(run_binary("es --predictor off --t-end 20 --tail-start 15 --out " + prefix) == 0);
  const std::string summary = slurp(prefix + "_summary.txt");
  CHECK(summary.find("[es]") != std::string::npos);
  CHECK(summary.find("[result]") != std::string::npos);
  CHECK(summary.find("converged") != std::string::npos);
  CHECK(fs::exists(prefix + "_trace.csv"));
  CHECK(fs::exists(prefix + "_pde.csv"));
}

TEST_CASE("summary round trip reproduces the outputs byte for byte") {
  const fs::path d = scratch_dir("roundtrip");
  const std::string first = (d / "first").string();
  const std::string second = (d / "second").string();
  REQUIRE(run_binary("es --predictor off --t-end 5 --tail-start 4 --out " + first) == 0);
  REQUIRE(run_binary("es --config " + first + "_summary.txt --out " + second) == 0);
  CHECK(slurp(first + "_trace.csv") == slurp(second + "_trace.csv"));
  CHECK(slurp(first + "_pde.csv") == slurp(second + "_pde.csv"));
}

TEST_CASE("mfde tanh run writes a trajectory and summary") {
  const fs::path d = scratch_dir("mfde");
  const std::string out = (d / "tanh.csv").string();
  REQUIRE(run_binary("mfde --example tanh --sigma 1 --step 0.01 --hypothesis-samples 5 --out " +
                     out) == 0);
  const std::string csv = slurp(out);
  CHECK(csv.rfind("t,value,post_jump_value", 0) == 0);
  CHECK(fs::exists(d / "tanh_summary.txt"));
}

}  // TEST_SUITE
