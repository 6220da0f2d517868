#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "config.hpp"
#include "json.hpp"

#include <fmt/format.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ptrot;
using namespace ptrot::cli;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path work_dir() {
  static fs::path d = [] {
    fs::path p = fs::temp_directory_path() / "ptrot_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::path p = work_dir() / name;
  std::ofstream(p) << text;
  return p;
}

// Exit code of the command line tool.
int run(const std::string& args) {
  std::string cmd = fmt::format("\"{}\" {} >> \"{}\" 2>&1", PTROT_BIN, args, (work_dir() / "log.txt").string());
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// The single run directory of a command under `out`.
fs::path run_dir(const fs::path& out, const std::string& command) {
  fs::path found;
  int count = 0;
  for (const auto& e : fs::directory_iterator(out))
    if (e.is_directory() && e.path().filename().string().rfind(command + "-", 0) == 0) {
      found = e.path();
      ++count;
    }
  REQUIRE(count == 1);
  return found;
}

const char* kSmallBand =
    "[map]\nkind = band\nalpha = 0.3\nbeta = 0.45\n"
    "[decomposition]\nm = 8\nn_radius = 40\nn_angle = 40\n"
    "[range]\nb_min = 3\nb_max = 3\n"
    "[quadrature]\nsamples = 3000\nbatch = 300\n"
    "[flow]\nseeds = 2\nt_end = 1\nlipschitz_pairs = 200\n"
    "[mesh]\norbits = 48\nlevels = 48\n"
    "[theorem1]\nb_max = 3\nbound_pairs = 50\nbound_b_max = 3\n";

}  // namespace

TEST_CASE("config round trip") {
  ExperimentConfig c;
  c.map.alpha = 0.1 + 0.2;
  c.run.seed = 18446744073709551615ull;
  c.flow.mesh = false;
  c.range.a_rule = "convergents";
  ExperimentConfig back = parse_config(to_ini(c));
  CHECK(back.map == c.map);
  CHECK(back.run == c.run);
  CHECK(back.flow == c.flow);
  CHECK(back.range == c.range);
  CHECK(to_ini(back) == to_ini(c));
  ExperimentConfig g = load_config(std::string(PTROT_CONFIGS) + "/golden.ini");
  CHECK(g.map.alpha == 0.6180339887498949);
  CHECK(g.decomposition.m == 10);
  CHECK(load_config(std::string(PTROT_CONFIGS) + "/band.ini").map.kind == "band");
  CHECK(c.cache_dir() == "runs/cache");
  c.mesh.cache_dir = "/tmp/x";
  CHECK(c.cache_dir() == "/tmp/x");
}

TEST_CASE("config errors") {
  CHECK_THROWS_WITH_AS(parse_config("[map]\ncolour = red\n"), doctest::Contains("unknown config key 'map.colour'"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config("alpha = 0.3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[map]\nalpha = 0.3x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[flow]\nmesh = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[decomposition]\nm = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[range]\na_rule = random\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[map]\nkind = shear\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[map]\nalpha = 0.5\nbeta = 0.4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[quadrature]\nscheme = simpson\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[map\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/ptrot.ini"), ConfigError);
}

TEST_CASE("pairs of the range") {
  ExperimentConfig c = parse_config(kSmallBand);
  c.range.b_max = 7;
  using P = std::vector<std::pair<int, int>>;
  CHECK(c.pairs() == P{{1, 3}, {2, 5}, {2, 6}, {3, 7}});
  c.range.a_rule = "convergents";
  CHECK(c.pairs() == P{{1, 3}, {3, 7}});
  c.range.b_min = 20;
  c.range.b_max = 20;
  c.range.a_rule = "all";
  CHECK(c.pairs() == P{{7, 20}, {8, 20}});
  c.range.a_rule = "smallest";
  CHECK(c.pairs() == P{{7, 20}});
}

TEST_CASE("exit codes") {
  fs::path out = work_dir() / "exit";
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("--config /nonexistent.ini decompose") == 2);
  fs::path bad = write_config("bad.ini", "[map]\nkind = band\ncolour = red\n");
  CHECK(run(fmt::format("--config {} --out {} decompose", bad.string(), out.string())) == 2);
  fs::path rot = write_config("rot.ini", "[map]\nkind = rotation\nalpha = 0.3\n");
  CHECK(run(fmt::format("--config {} --out {} theorem1", rot.string(), out.string())) == 2);
  fs::path one = write_config("one.ini", "[map]\nkind = band\n[decomposition]\nm = 1\nn_radius = 20\nn_angle = 20\n");
  CHECK(run(fmt::format("--config {} --out {} decompose", one.string(), out.string())) == 1);
}

TEST_CASE("decompose writes a reproducible certificate") {
  fs::path cfg = write_config("small.ini", kSmallBand);
  fs::path out = work_dir() / "decompose";
  REQUIRE(run(fmt::format("--config {} --out {} decompose", cfg.string(), out.string())) == 0);
  fs::path dir = run_dir(out, "decompose");
  std::string cert = read_file(dir / "certificate.txt");
  CHECK(cert.find("not a proof") != std::string::npos);
  json j = json::parse(read_file(dir / "decompose.json"));
  CHECK(j["pass"] == true);
  CHECK(j["m"] == 8);
  CHECK(j["factors"].size() >= 1);
  CHECK(j["composition_residual"].get<double>() < 1e-8);
  std::string manifest = read_file(dir / "manifest.sha256");
  for (const char* name : {"certificate.txt", "config.ini", "decompose.json"})
    CHECK(manifest.find(std::string("  ") + name + "\n") != std::string::npos);
  CHECK(parse_config(read_file(dir / "config.ini")).decomposition.m == 8);
  REQUIRE(run(fmt::format("--config {} --out {} decompose", cfg.string(), out.string())) == 0);
  CHECK(read_file(dir / "certificate.txt") == cert);
  CHECK(read_file(dir / "manifest.sha256") == manifest);
  REQUIRE(run(fmt::format("--config {} --out {} --seed 5 decompose", cfg.string(), out.string())) == 0);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(out)) dirs += e.is_directory() ? 1 : 0;
  CHECK(dirs == 2);
}

TEST_CASE("calabi estimators of a rotation and the identity") {
  fs::path out = work_dir() / "calabi";
  fs::path rot = write_config("calrot.ini", "[map]\nkind = rotation\nalpha = 0.3\n[quadrature]\nsamples = 4000\n");
  REQUIRE(run(fmt::format("--config {} --out {} calabi", rot.string(), out.string())) == 0);
  json j = json::parse(read_file(run_dir(out, "calabi") / "calabi.json"));
  CHECK(j["pass"] == true);
  double expected = kPi * kPi * 0.3;
  for (const auto& e : j["estimates"]) {
    CHECK(std::abs(e["value"].get<double>() - expected) <= e["error"].get<double>() + 1e-9);
    CHECK(e["map_hash"] == j["map_hash"]);
  }
  fs::path out2 = work_dir() / "calabi_id";
  fs::path id = write_config("calid.ini", "[map]\nkind = identity\n[quadrature]\nsamples = 2000\n");
  REQUIRE(run(fmt::format("--config {} --out {} calabi", id.string(), out2.string())) == 0);
  json k = json::parse(read_file(run_dir(out2, "calabi") / "calabi.json"));
  for (const auto& e : k["estimates"]) CHECK(std::abs(e["value"].get<double>()) < 1e-12);
  CHECK(read_file(run_dir(out2, "calabi") / "calabi.csv").rfind("estimator,value,error,samples,seed\n", 0) == 0);
}

TEST_CASE("flow checks on a small band run") {
  fs::path cfg = write_config("small.ini", kSmallBand);
  fs::path out = work_dir() / "flow";
  REQUIRE(run(fmt::format("--config {} --out {} flow", cfg.string(), out.string())) == 0);
  fs::path dir = run_dir(out, "flow");
  json j = json::parse(read_file(dir / "flow.json"));
  CHECK(j["pass"] == true);
  std::string checks = read_file(dir / "flow_checks.csv");
  CHECK(checks.find("energy_identity") != std::string::npos);
  CHECK(checks.find("gronwall") != std::string::npos);
  CHECK(checks.find("linking_pairs") != std::string::npos);
}

TEST_CASE("theorem1 is reproducible and rejects a corrupted cache") {
  fs::path cfg = write_config("small.ini", kSmallBand);
  fs::path out = work_dir() / "theorem1";
  REQUIRE(run(fmt::format("--config {} --out {} theorem1", cfg.string(), out.string())) == 0);
  fs::path dir = run_dir(out, "theorem1");
  std::string csv = read_file(dir / "theorem1.csv");
  json j = json::parse(read_file(dir / "theorem1.json"));
  CHECK(j["pass"] == true);
  REQUIRE(j["rows"].size() == 2);
  CHECK(j["rows"][0]["skipped"] == true);
  CHECK(j["rows"][1]["a"] == 1);
  CHECK(j["rows"][1]["b"] == 3);
  // second run loads the cached invariant disk and reproduces the table
  REQUIRE(run(fmt::format("--config {} --out {} theorem1", cfg.string(), out.string())) == 0);
  CHECK(read_file(dir / "theorem1.csv") == csv);
  fs::path cache;
  for (const auto& e : fs::directory_iterator(out / "cache")) cache = e.path();
  REQUIRE(!cache.empty());
  {
    std::fstream io(cache, std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(0);
    io.write("garbage!", 8);
  }
  CHECK(run(fmt::format("--config {} --out {} theorem1", cfg.string(), out.string())) == 2);
}
