#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bmjb/model.hpp"
#include "bmjb/process.hpp"

namespace bmjb::cli {

enum ExitCode : int {
  kOk = 0,
  kPrecondition = 2,
  kNumerical = 3,
  kUsage = 4,   // unknown command or bad flags
  kConfig = 5,  // malformed config or measure text
  kIo = 6,
};

// Malformed measure or config text; position is a 0-based character offset.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, const std::string& message);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// dirac:<p> | mix:<p1>:<w1>,<p2>:<w2>,... | grid:<path> | qsd
// Grid files hold one density value per equal cell, separated by whitespace
// or commas; the values are normalized. Throws ParseError on bad syntax and
// ValidationError on inadmissible measures.
JumpMeasure parse_measure(std::string_view text, const Interval& interval);

// Start law: a bare number is a point, anything else a measure.
StartLaw parse_start(std::string_view text, const Interval& interval);

std::uint64_t fnv1a(std::string_view data, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Round-trip formatting (17 significant digits).
std::string format_number(double value);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool bars = false;  // step histogram instead of a polyline
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<Series> series;
};

// Deterministic SVG: fixed layout, fixed number formatting, no timestamps.
std::string render_svg(const Plot& plot);

struct ExperimentSpec {
  std::string command;
  double a = 0.0;
  double b = 1.0;
  std::string measure = "dirac:0.5";
  std::string partner;  // second measure: right-end law or sweep partner
  std::string start = "0.5";
  std::uint64_t seed = 1;
  std::size_t replicates = 0;  // 0: command default
  double horizon = 1.0;
  std::map<std::string, double> tolerances;
  std::filesystem::path output;
  bool force = false;
  unsigned workers = 0;
  bool plots = true;

  // Command parameters.
  double x = 0.45;
  double y = 0.55;
  double lo = 0.0;   // renewal indicator
  double hi = 0.5;
  double dt = 1e-3;
  int points = 201;
  int bins = 50;
  double re_min = 0.0;  // 0 selects the default region
  double re_max = 0.0;
  double im_max = 0.0;
  std::vector<int> levels;
  std::string sweep = "quantize";  // quantize | truncate | two-dirac
  std::vector<double> grid;        // sweep parameters, tv-rate starts
  std::vector<double> times;       // tv-rate and tails time grids

  Interval interval() const { return {a, b}; }
  // Canonical key=value lines of every input that can change an output.
  std::map<std::string, std::string> semantic() const;
  std::uint64_t config_hash() const;
};

struct ReportFile {
  std::string name;
  std::string content;
};

struct ReportBundle {
  std::vector<ReportFile> files;  // CSV and SVG, then manifest.json
  std::string summary;            // human-readable, printed to stdout
  std::vector<std::string> warnings;
  int status = kOk;
};

const std::vector<std::string>& commands();

// Dispatches the command. Library errors propagate as exceptions.
ReportBundle run(const ExperimentSpec& spec);

// Refuses to overwrite any existing file unless force is set.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& directory, bool force);

// Full command-line entry point; returns the process exit status.
int main_entry(int argc, char** argv);

}  // namespace bmjb::cli
