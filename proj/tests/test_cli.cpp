#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "quasidiag/commands.hpp"
#include "quasidiag/config.hpp"
#include "quasidiag/errors.hpp"
#include "quasidiag/model.hpp"

using namespace quasidiag;
namespace fs = std::filesystem;

namespace {

std::string config_path(const std::string& name) { return std::string(QD_CONFIG_DIR) + "/" + name + ".json"; }

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("quasidiag_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& command, const std::string& config, const fs::path& out) {
  CliOptions o;
  o.command = command;
  o.config_path = config;
  o.out_dir = out.string();
  o.workers = 1;
  return run_command(o);
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

fs::path write_config(const std::string& name, nlohmann::json j) {
  fs::path p = fs::temp_directory_path() / ("quasidiag_cfg_" + name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("missing field is a config error") {
  auto j = load_json(config_path("reference"));
  j.erase("beta");
  auto cfg = write_config("missing", j);
  auto out = scratch("missing");
  CHECK(run("diagonalize", cfg.string(), out) == kExitConfig);
  try {
    load_config(cfg.string());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'beta'") != std::string::npos);
  }
}

TEST_CASE("unparseable arguments exit 2") {
  std::string cmd = std::string(QD_CLI) + " diagonalize > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}

TEST_CASE("resonant frequency fails verify") {
  auto out = scratch("half");
  int rc = run("verify", config_path("omega_half"), out);
  CHECK(rc != kExitPass);
  auto m = load_json(out / "manifest.json");
  CHECK(m["monitors"]["diophantine"] == "fail");
  CHECK(m["passed"] == false);
}

TEST_CASE("large beta is a regime failure") {
  auto out = scratch("large_beta");
  CHECK(run("verify", config_path("large_beta"), out) == kExitRegime);
  auto m = load_json(out / "manifest.json");
  CHECK(m["error"]["kind"] == "RegionOverlap");
}

TEST_CASE("eps zero diagonalize") {
  auto out = scratch("eps0");
  CHECK(run("diagonalize", config_path("eps0"), out) == kExitPass);
  auto rows = read_csv(out / "E_table.csv");
  REQUIRE(rows.size() == 65);
  CHECK(rows[0] == std::vector<std::string>{"x", "E"});
  auto f = PotentialSpec::sawtooth();
  for (size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][1]) == sample_potential(f, std::stod(rows[i][0])));
  auto m = load_json(out / "manifest.json");
  CHECK(m["passed"] == true);
  for (const auto& name : {"psi.csv", "E_table.csv", "family.csv", "diagnostics.json"}) {
    CHECK(fs::exists(out / name));
    bool listed = false;
    for (const auto& fl : m["files"]) listed = listed || fl == name;
    CHECK(listed);
  }
}

TEST_CASE("two-step spectrum") {
  auto out = scratch("two_step");
  CHECK(run("spectrum", config_path("two_step"), out) == kExitPass);
  auto g = load_json(out / "gaps.json");
  bool range_gap = false;
  for (const auto& gap : g["gaps"])
    if (gap["left"].get<double>() < 0.41 && gap["right"].get<double>() > 0.59) range_gap = true;
  CHECK(range_gap);
  auto cfg = load_json(config_path("two_step"));
  auto rows = read_csv(out / "rank_one.csv");
  CHECK(rows.size() - 1 == cfg["t_count"].get<size_t>() * cfg["rank_one_sites"].get<size_t>());
  CHECK(rows[0] == std::vector<std::string>{"t", "E"});
  for (int L : cfg["box_sizes"].get<std::vector<int>>()) CHECK(fs::exists(out / ("spectrum_L" + std::to_string(L) + ".csv")));
  CHECK(fs::exists(out / "ids.csv"));
}

TEST_CASE("diagonalize is deterministic") {
  auto a = scratch("det_a"), b = scratch("det_b");
  int ra = run("diagonalize", config_path("reference"), a);
  int rb = run("diagonalize", config_path("reference"), b);
  CHECK(ra == rb);
  for (const auto& name : {"psi.csv", "E_table.csv", "family.csv", "diagnostics.json"}) CHECK(slurp(a / name) == slurp(b / name));
  auto ma = load_json(a / "manifest.json"), mb = load_json(b / "manifest.json");
  for (const auto& key : {"started", "finished"}) {
    ma.erase(key);
    mb.erase(key);
  }
  CHECK(ma == mb);
}

TEST_CASE("manifest mirrors the exit code") {
  auto out = scratch("ref");
  int rc = run("diagonalize", config_path("reference"), out);
  auto m = load_json(out / "manifest.json");
  CHECK(m["exit_code"] == rc);
  CHECK(m["passed"] == (rc == kExitPass));
  CHECK(m["config_hash"].get<std::string>().size() == 16);
}
