#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {
int run(const std::string& args) {
  const std::string cmd = std::string(DFRDD_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dfrdd_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("zero iterations write the initial row only") {
  const fs::path out = scratch("zero");
  REQUIRE(run("run --case case1 --iterations 0 --out " + out.string()) == 0);
  CHECK(line_count(out / "history.csv") == 2);
  for (const char* f : {"config_resolved.json", "solution.csv", "cover_final.json", "loss_final.json", "params.bin",
                        "params.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(out / f));
  }
  fs::remove_all(out);
}

TEST_CASE("summary line reports the final error without error logging") {
  const fs::path out = scratch("summary");
  const fs::path log = scratch("summary.txt");
  const std::string cmd = std::string(DFRDD_CLI) + " run --case 4 --iterations 5 --max-ref 0 --final-iterations 5" +
                          " --error-every 0 --out " + out.string() + " > " + log.string();
  REQUIRE(std::system(cmd.c_str()) == 0);
  const std::string text = slurp(log);
  CHECK(text.find("rel H1 error") != std::string::npos);
  CHECK(text.find("nan") == std::string::npos);
  fs::remove_all(out);
  fs::remove(log);
}

TEST_CASE("invalid input and divergence exit codes") {
  const fs::path out = scratch("codes");
  CHECK(run("run --case 9 --out " + out.string()) == 2);
  CHECK(run("run --case 4 --tau 1.5 --out " + out.string()) == 2);
  CHECK(run("run --case 4 --iterations 3 --lr 1e308 --out " + out.string()) == 3);
  CHECK(run("compare " + (out / "missing_a").string() + " " + (out / "missing_b").string()) == 2);
  fs::remove_all(out);
}

TEST_CASE("resolved config reproduces the run and compare is stable") {
  const fs::path a = scratch("a");
  const fs::path b = scratch("b");
  REQUIRE(run("run --case 4 --max-ref 1 --iterations 3 --final-iterations 2 --seed 2 --out " + a.string()) == 0);
  REQUIRE(run("run --config " + (a / "config_resolved.json").string() + " --out " + b.string()) == 0);
  CHECK(slurp(a / "history.csv") == slurp(b / "history.csv"));
  CHECK(fs::exists(a / "cover_level_0.json"));
  CHECK(fs::exists(a / "indicators_level_0.csv"));

  const fs::path cmp = scratch("cmp.csv");
  REQUIRE(run("compare " + a.string() + " " + b.string() + " --out " + cmp.string()) == 0);
  std::ifstream in(cmp);
  std::string header, ra, rb;
  std::getline(in, header);
  std::getline(in, ra);
  std::getline(in, rb);
  CHECK(header == "run,case,iterations,boxes,train_loss,val_loss,rel_h1_error_pct");
  CHECK(ra.substr(ra.find(',')) == rb.substr(rb.find(',')));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove(cmp);
}

TEST_CASE("verification report") {
  const fs::path out = scratch("verify");
  REQUIRE(run("run --verify lshape-xi --out " + out.string()) == 0);
  const std::string s = slurp(out / "verify_lshape-xi.json");
  const auto pos = s.find("\"xi_sq_estimate\"");
  REQUIRE(pos != std::string::npos);
  const double xi = std::stod(s.substr(s.find(':', pos) + 1));
  CHECK(xi >= 1.0);
  CHECK(xi <= 2.02);
  fs::remove_all(out);
}

TEST_CASE("full case 4 schedule") {
  const fs::path out = scratch("case4");
  REQUIRE(run("run --case case4 --seed 1 --val-every 500 --error-every 500 --out " + out.string()) == 0);
  CHECK(line_count(out / "history.csv") == 5 * 500 + 1000 + 1 + 1);
  for (int q = 0; q <= 5; ++q) CHECK(fs::exists(out / ("cover_level_" + std::to_string(q) + ".json")));
  fs::remove_all(out);
}
