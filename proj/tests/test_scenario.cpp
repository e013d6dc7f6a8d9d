#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ncfilter/error.hpp"
#include "ncfilter/scenario.hpp"

using namespace ncfilter;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("NCFILTER_TEST_TMP");
  fs::path base = env ? fs::path(env) : fs::temp_directory_path() / "ncfilter_test_scenario";
  fs::path p = base / name;
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kCustom = R"({
  // explicit operators and a tabulated photon profile
  "name": "custom",
  "system": {
    "dim": 2,
    "H": [[0.5, 0], [0, 0.1], [0, -0.1], [-0.5, 0]],
    "L": [[0, 0], [0.8, 0], [0, 0], [0, 0]],
    "S": [[0, 0], [1, 0], [1, 0], [0, 0]],
    "rho0": [[0.5, 0], [0.5, 0], [0.5, 0], [0.5, 0]]
  },
  "field": {
    "kind": "photon_combo",
    "gamma": {"g00": 0.5, "g11": 0.5, "g01": [0.3, 0.1]},
    "envelope": {"kind": "tabulated", "times": [0, 1, 2],
                 "values": [[0, 0], [1.224744871391589, 0], [0, 0]]}
  },
  "measurement": "homodyne",
  "grid": {"dt": 0.002, "T": 4},
  "ensemble": {"M": 10, "master_seed": 123},
  "output": {"path": "somewhere", "format": "json"}
})";

std::string expect_config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    return e.what();
  }
  FAIL("expected a config error");
  return "";
}

}  // namespace

TEST_CASE("built-in presets") {
  const ScenarioConfig f1 = preset("fig1-ground");
  const auto& p = f1.field_state().photon();
  CHECK(p.gamma.g11 == 0.8);
  CHECK(p.gamma.g00 == 0.2);
  CHECK(p.gamma.g01 == cplx(0.0));
  CHECK(p.xi.omega() == 1.46);
  CHECK(p.xi.t_c() == 3.0);
  CHECK(f1.rho0(0, 0) == cplx(1.0));
  CHECK(f1.kappa == 1.0);

  const ScenarioConfig f2 = preset("fig2-ground");
  const auto& c = f2.field_state().coherent();
  CHECK(c.weights == std::vector<double>{0.5, 0.5});
  CHECK(c.alphas[0].omega() == 2.4);
  CHECK(c.alphas[0].t_c() == 3.0);
  CHECK(c.alphas[1].t_c() == 5.0);
  CHECK(preset("fig2-excited").rho0(1, 1) == cplx(1.0));
  CHECK_THROWS_AS(preset("fig3"), Error);
  CHECK(preset_names().size() == 4);
}

TEST_CASE("validation errors name the field") {
  SUBCASE("gamma must be positive semidefinite") {
    const std::string msg = expect_config_error(R"({
      "system": {"preset": "two-level-decay"},
      "field": {"kind": "photon_combo", "gamma": {"g00": 0.5, "g11": 0.5, "g01": [0.6, 0]},
                "envelope": {"kind": "gaussian", "omega": 1.46, "t_c": 3}}})");
    CHECK(msg.find("field.gamma") != std::string::npos);
    CHECK(msg.find("positive semidefinite") != std::string::npos);
  }
  SUBCASE("unknown keys are listed") {
    const std::string msg = expect_config_error(R"({
      "system": {"preset": "two-level-decay", "kapa": 2, "rh0": "ground"},
      "field": {"kind": "photon_combo", "gamma": {"g00": 1, "g11": 0},
                "envelope": {"kind": "gaussian", "omega": 1.46, "t_c": 3}}})");
    CHECK(msg.find("kapa") != std::string::npos);
    CHECK(msg.find("rh0") != std::string::npos);
    CHECK(msg.find("system") != std::string::npos);
  }
  SUBCASE("invariants") {
    const std::string field = R"("field": {"kind": "photon_combo", "gamma": {"g00": 1, "g11": 0},
                "envelope": {"kind": "gaussian", "omega": 1.46, "t_c": 3}})";
    CHECK(expect_config_error(R"({"system": {"preset": "two-level-decay", "kappa": -1}, )" + field + "}")
              .find("system.kappa") != std::string::npos);
    CHECK(expect_config_error(R"({"system": {"preset": "two-level-decay"}, "grid": {"dt": 0}, )" + field + "}")
              .find("grid.dt") != std::string::npos);
    CHECK(expect_config_error(R"({"system": {"preset": "two-level-decay"}, "ensemble": {"M": 0}, )" + field + "}")
              .find("ensemble.M") != std::string::npos);
    CHECK(expect_config_error(R"({"system": {"preset": "three-level"}, )" + field + "}")
              .find("system.preset") != std::string::npos);
    CHECK(expect_config_error(R"({"system": {"preset": "two-level-decay"}, "measurement": "heterodyne", )" + field + "}")
              .find("measurement") != std::string::npos);
    CHECK(expect_config_error("{ not json").find("JSON") != std::string::npos);
  }
}

TEST_CASE("configs round-trip through their canonical JSON") {
  std::vector<ScenarioConfig> cfgs;
  for (const auto& name : preset_names()) cfgs.push_back(preset(name));
  cfgs.push_back(parse_config(kCustom));
  for (const auto& c : cfgs) {
    const ScenarioConfig back = parse_config(to_json(c));
    CHECK(back == c);
    CHECK(to_json(back) == to_json(c));
    CHECK(config_hash(back) == config_hash(c));
  }
  const ScenarioConfig custom = parse_config(kCustom);
  CHECK(custom.measurement == Measurement::homodyne);
  CHECK(custom.M == 10);
  CHECK(custom.master_seed == 123u);
  CHECK(custom.format == "json");
  CHECK(custom.model.H(0, 1) == cplx(0.0, 0.1));
}

TEST_CASE("config hash tracks semantic fields only") {
  const ScenarioConfig base = preset("fig1-ground");
  const std::uint64_t h = config_hash(base);
  ScenarioConfig c = base;
  c.out_path = "elsewhere";
  c.format = "json";
  CHECK(config_hash(c) == h);
  c = base;
  c.dt = 5e-4;
  CHECK(config_hash(c) != h);
  c = base;
  c.master_seed += 1;
  CHECK(config_hash(c) != h);
  c = base;
  c.measurement = Measurement::homodyne;
  CHECK(config_hash(c) != h);
  CHECK(config_hash(preset("fig1-excited")) != h);
  CHECK(hash_hex(h).size() == 16);
}

TEST_CASE("deterministic runs") {
  SUBCASE("single-photon combination limit") {
    const Table t = run_scenario(preset("fig1-ground"));
    CHECK(t.columns == std::vector<std::string>{"t", "flux", "P_exc", "P_atleast_one_count"});
    CHECK(std::abs(t.column("P_atleast_one_count").back() - 0.8) < 1e-3);
    CHECK(std::abs(run_scenario(preset("fig1-excited")).column("P_atleast_one_count").back() - 1.0) <
          1e-3);
  }
  SUBCASE("measurement none has no count column") {
    ScenarioConfig c = preset("fig2-ground");
    c.measurement = Measurement::none;
    c.T = 4.0;
    const Table t = run_scenario(c);
    CHECK(t.columns == std::vector<std::string>{"t", "flux", "P_exc"});
    CHECK(t.rows() == 4001);
    CHECK_THROWS_AS(run_trajectories(c), Error);
  }
}

TEST_CASE("output files") {
  ScenarioConfig c = preset("fig1-ground");
  c.T = 2.0;
  c.M = 5;
  c.out_path = scratch("csv").string();
  const Table t = run_trajectories(c, 1);
  const std::string path = write_outputs(c, t);
  CHECK(fs::path(path).filename() == "fig1-ground.csv");
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  CHECK(header ==
        "t,flux,P_exc,P_atleast_one_count,P_exc_mean,P_exc_stderr,rate_mean,rate_stderr,"
        "P_atleast_one_count_mean,P_atleast_one_count_stderr");
  std::getline(in, row);
  std::getline(in, row);
  // second row: t = 0.001 printed with 17 significant digits
  CHECK(row.substr(0, row.find(',')) == "0.001");
  std::getline(in, row);
  CHECK(row.substr(0, row.find(',')) == "0.002");
  std::size_t lines = 4;
  while (std::getline(in, row)) ++lines;
  CHECK(lines == t.rows() + 1);
  // a value that needs all 17 digits survives the round trip
  const double flux = t.column("flux")[1];
  {
    std::ifstream again(path);
    std::getline(again, row);
    std::getline(again, row);
    std::getline(again, row);
    std::stringstream ss(row);
    std::string cell;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    CHECK(std::stod(cell) == flux);
  }

  const auto meta = nlohmann::json::parse(read_file(fs::path(c.out_path) / "fig1-ground.meta.json"));
  CHECK(meta["hash"] == hash_hex(config_hash(c)));
  CHECK(meta["seed"] == c.master_seed);
  CHECK(meta["tool_version"] == tool_version());
  CHECK(parse_config(meta["config"].dump()) == c);
  CHECK(meta.contains("count_distribution"));

  c.format = "json";
  c.out_path = scratch("json").string();
  const std::string jpath = write_outputs(c, run_scenario(c));
  const auto data = nlohmann::json::parse(read_file(jpath));
  CHECK(data["columns"].size() == 4);
  CHECK(data["rows"].size() == 2001);
}

TEST_CASE("IO failures are reported") {
  const fs::path dir = scratch("io");
  fs::create_directories(dir);
  std::ofstream(dir / "blocker") << "x";
  ScenarioConfig c = preset("fig1-ground");
  c.T = 1.0;
  c.out_path = (dir / "blocker" / "sub").string();
  try {
    write_outputs(c, run_scenario(c));
    FAIL("expected an IO error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), Error);
}

TEST_CASE("oracle comparison") {
  ScenarioConfig c = preset("fig1-ground");
  c.T = 8.0;
  const OracleReport ok = compare_oracle(c, 2);
  CHECK(ok.passed());
  for (const auto& check : ok.checks) CHECK(check.deviation < 1e-6);
  CHECK(ok.text().find("all checks passed") != std::string::npos);

  ScenarioConfig f2 = preset("fig2-ground");
  f2.T = 8.0;
  const OracleReport ok2 = compare_oracle(f2, 2);
  CHECK(ok2.passed());
  for (const auto& check : ok2.checks) CHECK(check.deviation < 1e-6);

  c.reduced_coupling_scale = 1.05;
  const OracleReport bad = compare_oracle(c, 1);
  CHECK_FALSE(bad.passed());
  CHECK(bad.text().find("FAIL") != std::string::npos);
}
