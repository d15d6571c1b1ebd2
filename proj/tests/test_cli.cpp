#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bmjb/cli.hpp"

using namespace bmjb;
using namespace bmjb::cli;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

const Interval kUnit(0.0, 1.0);

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("bmjb-test-" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "bmjb");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  return main_entry(static_cast<int>(argv.size()), argv.data());
}

const ReportFile& file(const ReportBundle& bundle, const std::string& name) {
  for (const ReportFile& f : bundle.files)
    if (f.name == name) return f;
  FAIL("missing report file " << name);
  throw std::logic_error("unreachable");
}

// Rows of a CSV file with a header line.
std::vector<std::vector<double>> rows(const std::string& csv) {
  std::vector<std::vector<double>> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) row.push_back(std::stod(field));
    out.push_back(row);
  }
  return out;
}

std::size_t parse_position(const std::string& text) {
  try {
    parse_measure(text, kUnit);
  } catch (const ParseError& e) {
    return e.position();
  }
  FAIL("no parse error for " << text);
  return 0;
}

}  // namespace

TEST_CASE("measure grammar") {
  const JumpMeasure d = parse_measure("dirac:0.5", kUnit);
  REQUIRE(std::holds_alternative<JumpMeasure::Dirac>(d.kind()));
  CHECK(std::get<JumpMeasure::Dirac>(d.kind()).point == 0.5);

  const JumpMeasure m = parse_measure("mix:0.3:0.5,0.7:0.5", kUnit);
  REQUIRE(std::holds_alternative<JumpMeasure::Mixture>(m.kind()));
  CHECK(std::get<JumpMeasure::Mixture>(m.kind()).atoms.size() == 2);

  CHECK(parse_measure("qsd", kUnit).kind_name() == "quasistationary");
  CHECK_THROWS_AS(parse_measure("dirac:1.0", kUnit), ValidationError);
  CHECK_THROWS_AS(parse_measure("mix:0.3:0.5,0.7:0.4", kUnit), ValidationError);

  CHECK(parse_position("dirac:x") == 6);
  CHECK(parse_position("dirac:0.5z") == 9);
  CHECK(parse_position("mix:0.3:0.5,0.7") == 15);
  CHECK(parse_position("mix:0.3;0.5") == 7);
  CHECK(parse_position("uniform:0.2") == 0);
  CHECK(parse_position("dirac") == 5);
  CHECK(parse_position("grid:") == 5);
}

TEST_CASE("grid files and start laws") {
  TempDir dir("grid");
  write(dir.path / "g.txt", "0, 1 1\n1 0\n");
  const JumpMeasure g = parse_measure("grid:" + (dir.path / "g.txt").string(), kUnit);
  CHECK(g.support_min() == Approx(0.2));
  CHECK(g.cdf(0.5) == Approx(0.5));
  write(dir.path / "bad.txt", "0 1 x 0");
  CHECK_THROWS_AS(parse_measure("grid:" + (dir.path / "bad.txt").string(), kUnit), ParseError);
  CHECK_THROWS(parse_measure("grid:" + (dir.path / "missing.txt").string(), kUnit));

  CHECK(std::get<double>(parse_start("0.3", kUnit)) == 0.3);
  CHECK(std::holds_alternative<JumpMeasure>(parse_start("dirac:0.3", kUnit)));
}

TEST_CASE("number formatting round-trips and hashing is stable") {
  for (double v : {0.1, 1.0 / 3.0, 19.739208802178717, -2.5e-300, 1e300}) CHECK(std::stod(format_number(v)) == v);
  CHECK(hex64(fnv1a("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("the config hash follows semantic inputs only") {
  ExperimentSpec base;
  base.command = "couple";
  const std::uint64_t h = base.config_hash();

  ExperimentSpec same = base;
  same.output = "/elsewhere";
  same.force = true;
  same.workers = 3;
  same.dt = 0.5;  // not read by couple
  CHECK(same.config_hash() == h);

  for (auto edit : std::vector<void (*)(ExperimentSpec&)>{
           [](ExperimentSpec& s) { s.seed = 2; },
           [](ExperimentSpec& s) { s.x = 0.46; },
           [](ExperimentSpec& s) { s.measure = "dirac:0.6"; },
           [](ExperimentSpec& s) { s.b = 2.0; },
           [](ExperimentSpec& s) { s.replicates = 17; },
           [](ExperimentSpec& s) { s.plots = false; },
           [](ExperimentSpec& s) { s.tolerances["truncation"] = 1e-6; }}) {
    ExperimentSpec changed = base;
    edit(changed);
    CHECK(changed.config_hash() != h);
  }
}

TEST_CASE("spectrum command reports the first root") {
  ExperimentSpec spec;
  spec.command = "spectrum";
  spec.measure = "dirac:0.5";
  const ReportBundle bundle = run(spec);
  const auto table = rows(file(bundle, "spectrum.csv").content);
  REQUIRE_FALSE(table.empty());
  CHECK(std::abs(table[0][0] - 2.0 * std::numbers::pi * std::numbers::pi) < 1e-8);
  CHECK(std::abs(table[0][1]) < 1e-8);
  CHECK(bundle.status == kOk);
  CHECK(bundle.files.back().name == "manifest.json");
}

TEST_CASE("invariant command gives the tent") {
  ExperimentSpec spec;
  spec.command = "invariant";
  spec.measure = "dirac:0.5";
  spec.points = 201;
  const auto table = rows(file(run(spec), "density.csv").content);
  REQUIRE(table.size() == 201);
  double peak = 0.0, at = 0.0;
  for (const auto& row : table)
    if (row[1] > peak) peak = row[1], at = row[0];
  CHECK(peak == Approx(2.0).epsilon(1e-12));
  CHECK(at == Approx(0.5));
}

TEST_CASE("reruns are byte-identical and outputs are not overwritten") {
  TempDir dir("rerun");
  const std::string first = (dir.path / "one").string(), second = (dir.path / "two").string();
  const std::vector<std::string> args = {"couple", "--replicates", "2000", "--seed", "5", "--x", "0.5", "--y", "0.58"};
  auto with_out = [&](const std::string& out) {
    std::vector<std::string> a = {"--out", out, "--workers", "1"};
    a.insert(a.end(), args.begin(), args.end());
    return a;
  };
  REQUIRE(invoke(with_out(first)) == kOk);
  REQUIRE(invoke(with_out(second)) == kOk);
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(first)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    CHECK(read(entry.path()) == read(fs::path(second) / name));
    ++compared;
  }
  CHECK(compared >= 2);
  const std::string manifest = read(fs::path(first) / "manifest.json");
  CHECK(manifest.find("config_hash") != std::string::npos);

  const std::string before = read(fs::path(first) / "couplings.csv");
  CHECK(invoke(with_out(first)) == kIo);
  CHECK(read(fs::path(first) / "couplings.csv") == before);
  std::vector<std::string> forced = with_out(first);
  forced.insert(forced.begin(), "--force");
  CHECK(invoke(forced) == kOk);
}

TEST_CASE("SVG output is deterministic") {
  Plot plot{"t", "x", "y", true, {{"a", {0.0, 1.0, 2.0}, {1.0, 0.1, 0.01}, false}, {"b", {0.0, 1.0}, {0.5, 0.5}, true}}};
  const std::string svg = render_svg(plot);
  CHECK(svg == render_svg(plot));
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("exit codes") {
  TempDir dir("codes");
  const std::string out = (dir.path / "o").string();
  CHECK(invoke({"frobnicate"}) == kUsage);
  CHECK(invoke({"spectrum", "--no-such-flag"}) == kUsage);
  CHECK(invoke({"--out", out, "spectrum", "--measure", "dirac:"}) == kConfig);
  CHECK(invoke({"--out", out, "spectrum", "--measure", "dirac:1.5"}) == kPrecondition);
  CHECK(invoke({"--out", out, "couple", "--x", "0.1", "--y", "0.9"}) == kPrecondition);
  CHECK(invoke({"--out", out, "law", "--tolerance", "bogus=1"}) == kConfig);
  CHECK(invoke({"--out", out, "law", "--tolerance", "truncation"}) == kConfig);
  CHECK(invoke({"--out", (dir.path / "tol").string(), "law", "--tolerance", "truncation=1e-9", "--tolerance",
                "richardson=1e-3"}) == kOk);
  CHECK(read(dir.path / "tol" / "manifest.json").find("\"tolerance.truncation\"") != std::string::npos);

  write(dir.path / "bad.ini", "[spectrum]\nmeasure dirac:0.5\n");
  CHECK(invoke({"--config", (dir.path / "bad.ini").string(), "spectrum"}) == kConfig);
  write(dir.path / "extra.ini", "[spectrum]\nmeasuer = dirac:0.5\n");
  CHECK(invoke({"--config", (dir.path / "extra.ini").string(), "spectrum"}) == kConfig);
  CHECK(invoke({"--config", (dir.path / "absent.ini").string(), "spectrum"}) == kConfig);

  write(dir.path / "good.ini", "out = " + out + "\n[spectrum]\nmeasure = dirac:0.3\n");
  CHECK(invoke({"--config", (dir.path / "good.ini").string(), "spectrum"}) == kOk);
  CHECK(fs::exists(fs::path(out) / "spectrum.csv"));

  fs::create_directories(dir.path / "blocked");
  write(dir.path / "blocked" / "file", "x");
  CHECK(invoke({"--out", (dir.path / "blocked" / "file" / "sub").string(), "spectrum"}) == kIo);
}

TEST_CASE("config files carry mixture measures intact") {
  TempDir dir("mixconfig");
  const std::string out = (dir.path / "o").string();
  write(dir.path / "mix.ini", "out = " + out + "\n[spectrum]\nmeasure = mix:0.3:0.25,0.6:0.75\nre-max = 120\n");
  REQUIRE(invoke({"--config", (dir.path / "mix.ini").string(), "spectrum"}) == kOk);
  const auto table = rows(read(fs::path(out) / "spectrum.csv"));
  REQUIRE(table.size() == 3);
  CHECK(table[1][0] == Approx(50.299067136515016).epsilon(1e-10));
}

TEST_CASE("the output directory defaults to the environment variable") {
  TempDir dir("env");
  ::setenv("BMJB_OUT_DIR", dir.path.c_str(), 1);
  CHECK(invoke({"spectrum"}) == kOk);
  ::unsetenv("BMJB_OUT_DIR");
  CHECK(fs::exists(dir.path / "spectrum" / "spectrum.csv"));
  CHECK(fs::exists(dir.path / "spectrum" / "manifest.json"));
}
