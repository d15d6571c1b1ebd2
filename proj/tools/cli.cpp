#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include "bmjb/cli.hpp"
#include "bmjb/coupling.hpp"
#include "bmjb/parallel.hpp"
#include "bmjb/process.hpp"
#include "bmjb/spectrum.hpp"
#include "bmjb/verify.hpp"

namespace bmjb::cli {

namespace {

constexpr const char* kVersion = "1.0.0";

class Cursor {
 public:
  explicit Cursor(std::string_view text, std::size_t offset = 0) : text_(text), pos_(offset) {}

  std::size_t position() const { return pos_; }
  bool done() const { return pos_ >= text_.size(); }

  double number() {
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    if (first < last && *first == '+') ++first;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) throw ParseError(pos_, "expected a number");
    if (!std::isfinite(value)) throw ParseError(pos_, "number must be finite");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return value;
  }

  void expect(char ch) {
    if (done() || text_[pos_] != ch)
      throw ParseError(pos_, std::string("expected '") + ch + "'");
    ++pos_;
  }

  bool accept(char ch) {
    if (!done() && text_[pos_] == ch) {
      ++pos_;
      return true;
    }
    return false;
  }

  void finish() {
    if (!done()) throw ParseError(pos_, "unexpected trailing text");
  }

 private:
  std::string_view text_;
  std::size_t pos_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<double> parse_grid_values(const std::string& content, std::size_t base) {
  std::vector<double> values;
  std::size_t i = 0;
  while (i < content.size()) {
    const char ch = content[i];
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      ++i;
      continue;
    }
    if (ch == '#') {
      while (i < content.size() && content[i] != '\n') ++i;
      continue;
    }
    Cursor cursor(content, i);
    try {
      values.push_back(cursor.number());
    } catch (const ParseError& e) {
      throw ParseError(base, "grid file, byte " + std::to_string(e.position()) + ": " + e.what());
    }
    i = cursor.position();
  }
  if (values.empty()) throw ParseError(base, "grid file holds no values");
  return values;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_number(values[i]);
  }
  return out;
}

std::string join(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

// Identifies a measure argument including the contents of referenced files.
std::string measure_key(const std::string& text) {
  if (text.rfind("grid:", 0) == 0) {
    std::string key = text + "#";
    try {
      key += hex64(fnv1a(read_file(text.substr(5))));
    } catch (const IoError&) {
      key += "missing";
    }
    return key;
  }
  return text;
}

std::size_t default_replicates(const std::string& command) {
  if (command == "simulate") return 1000;
  if (command == "tv-rate") return 20000;
  if (command == "couple") return 10000;
  if (command == "tails") return 100000;
  return 0;
}

std::size_t replicates_of(const ExperimentSpec& spec) {
  return spec.replicates ? spec.replicates : default_replicates(spec.command);
}

std::vector<double> uniform_grid(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return out;
}

std::vector<double> tail_times(const ExperimentSpec& spec) {
  if (!spec.times.empty()) return spec.times;
  const double L2 = (spec.b - spec.a) * (spec.b - spec.a);
  return uniform_grid(0.0, L2, 101);
}

std::vector<double> tv_times(const ExperimentSpec& spec) {
  if (!spec.times.empty()) return spec.times;
  const double L2 = (spec.b - spec.a) * (spec.b - spec.a);
  return uniform_grid(0.03 * L2, 0.12 * L2, 7);
}

std::vector<double> tv_starts(const ExperimentSpec& spec) {
  if (!spec.grid.empty()) return spec.grid;
  const double L = spec.b - spec.a;
  return uniform_grid(spec.a + 0.1 * L, spec.a + 0.9 * L, 9);
}

std::vector<int> sweep_levels(const ExperimentSpec& spec) {
  if (!spec.levels.empty()) return spec.levels;
  return {4, 8, 16, 32, 64, 128, 256};
}

std::vector<double> sweep_parameters(const ExperimentSpec& spec) {
  if (!spec.grid.empty()) return spec.grid;
  return uniform_grid(0.05, 0.45, 9);
}

double tolerance(const ExperimentSpec& spec, const std::string& key, double fallback) {
  const auto it = spec.tolerances.find(key);
  return it == spec.tolerances.end() ? fallback : it->second;
}

const std::vector<std::string>& tolerance_keys() {
  static const std::vector<std::string> keys = {"truncation", "richardson"};
  return keys;
}

// ---------------------------------------------------------------------------
// Report assembly

struct Builder {
  ReportBundle bundle;
  bool plots;

  void csv(const std::string& name, const Table& table) {
    bundle.files.push_back({name + ".csv", table.to_csv()});
  }

  void svg(const std::string& name, const Plot& plot) {
    if (!plots) return;
    try {
      bundle.files.push_back({name + ".svg", render_svg(plot)});
    } catch (const std::exception& e) {
      bundle.warnings.push_back("plot " + name + " skipped: " + e.what());
    }
  }

  void line(const std::string& text) { bundle.summary += text + "\n"; }
};

std::vector<double> final_positions(const StartLaw& start, const JumpMeasure& nu, double horizon,
                                    std::size_t n, std::uint64_t seed, unsigned workers,
                                    std::vector<PathSkeleton>* paths = nullptr) {
  const Simulator sim(nu);
  auto skeletons = parallel_map(
      n,
      [&](std::size_t i) {
        RandomStream rng(seed, i);
        return sim.path(start, horizon, rng);
      },
      workers);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = skeletons[i].position;
  if (paths) *paths = std::move(skeletons);
  return out;
}

// Histogram as a density on bin centres.
Table histogram_table(const std::vector<double>& samples, const Interval& I, int bins) {
  const auto counts = histogram(samples, I, bins);
  const double width = I.length() / bins;
  Table table{{"y", "value"}, {}};
  for (int k = 0; k < bins; ++k) {
    table.rows.push_back({I.a() + (k + 0.5) * width,
                          counts[static_cast<std::size_t>(k)] / (samples.size() * width)});
  }
  return table;
}

Series column_series(const Table& table, std::size_t xc, std::size_t yc, std::string label,
                     bool bars = false) {
  Series s{std::move(label), {}, {}, bars};
  for (const auto& row : table.rows) {
    s.x.push_back(row[xc]);
    s.y.push_back(row[yc]);
  }
  return s;
}

void density_overlay(Builder& out, const ExperimentSpec& spec, const Table& exact,
                     const std::string& exact_label, const std::string& title,
                     const StartLaw& start, const JumpMeasure& nu) {
  Plot plot{title, "y", "density", false, {}};
  const std::size_t n = replicates_of(spec);
  if (n > 0) {
    const auto samples = final_positions(start, nu, spec.horizon, n, spec.seed, spec.workers);
    const Table hist = histogram_table(samples, nu.interval(), spec.bins);
    out.csv("histogram", hist);
    plot.series.push_back(column_series(hist, 0, 1, "Monte Carlo histogram", true));
    out.line("histogram: " + std::to_string(n) + " paths to t = " + format_number(spec.horizon));
  }
  plot.series.push_back(column_series(exact, 0, 1, exact_label));
  out.svg("density", plot);
}

Table density_table(const Interval& I, int points, const std::function<double(double)>& f) {
  Table table{{"y", "value"}, {}};
  for (double y : uniform_grid(I.a(), I.b(), points)) table.rows.push_back({y, f(y)});
  return table;
}

void run_simulate(Builder& out, const ExperimentSpec& spec) {
  const Interval I = spec.interval();
  const JumpMeasure nu = parse_measure(spec.measure, I);
  const StartLaw start = parse_start(spec.start, I);
  RunConfig config{spec.seed, replicates_of(spec), start, spec.horizon, spec.tolerances};
  config.validate(I);

  std::vector<PathSkeleton> paths;
  const auto samples =
      final_positions(start, nu, spec.horizon, config.replicates, spec.seed, spec.workers, &paths);
  Table path{{"replicate", "epoch", "position"}, {}};
  std::size_t jumps = 0;
  for (std::size_t r = 0; r < paths.size(); ++r) {
    const PathSkeleton& p = paths[r];
    const double rd = static_cast<double>(r);
    path.rows.push_back({rd, 0.0, p.start});
    for (std::size_t k = 0; k < p.epochs.size(); ++k) path.rows.push_back({rd, p.epochs[k], p.targets[k]});
    path.rows.push_back({rd, p.horizon, p.position});
    jumps += p.epochs.size();
  }
  out.csv("path", path);

  const Table hist = histogram_table(samples, I, spec.bins);
  out.csv("histogram", hist);
  const LawAtTime law(StartPoints::from(start, I), nu, spec.horizon,
                      LawOptions{.truncation = tolerance(spec, "truncation", 1e-8)});
  const Table exact = density_table(I, spec.points, [&](double y) { return law.density(y); });
  out.csv("density", exact);
  out.svg("density", Plot{"Law at t = " + format_number(spec.horizon), "y", "density", false,
                          {column_series(hist, 0, 1, "Monte Carlo histogram", true),
                           column_series(exact, 0, 1, "exact law")}});

  out.line("simulated " + std::to_string(paths.size()) + " paths to t = " +
           format_number(spec.horizon) + ", mean jumps per path " +
           format_number(static_cast<double>(jumps) / static_cast<double>(paths.size())));
}

void run_invariant(Builder& out, const ExperimentSpec& spec) {
  const Interval I = spec.interval();
  const JumpMeasure nu = parse_measure(spec.measure, I);
  const InvariantMeasure mu = invariant_density(nu);
  const Table exact = density_table(I, spec.points, [&](double y) { return mu.density(y); });
  out.csv("density", exact);
  density_overlay(out, spec, exact, "invariant density", "Invariant law",
                  parse_start(spec.start, I), nu);

  auto peak = std::max_element(exact.rows.begin(), exact.rows.end(),
                               [](const auto& l, const auto& r) { return l[1] < r[1]; });
  out.line("invariant density: peak " + format_number((*peak)[1]) + " at y = " +
           format_number((*peak)[0]) + ", mean cycle length " + format_number(mu.normalizer()));
}

void run_law(Builder& out, const ExperimentSpec& spec) {
  const Interval I = spec.interval();
  const JumpMeasure nu = parse_measure(spec.measure, I);
  const StartLaw start = parse_start(spec.start, I);
  const LawAtTime law(StartPoints::from(start, I), nu, spec.horizon,
                      LawOptions{.truncation = tolerance(spec, "truncation", 1e-8)});
  const Table exact = density_table(I, spec.points, [&](double y) { return law.density(y); });
  out.csv("density", exact);
  density_overlay(out, spec, exact, "exact law", "Law at t = " + format_number(spec.horizon),
                  start, nu);
  out.line("law at t = " + format_number(spec.horizon) + ": mass " + format_number(law.mass()) +
           ", jump orders " + std::to_string(law.jumps()) + ", truncation bound " +
           format_number(law.truncation_bound()));
}

void run_renewal(Builder& out, const ExperimentSpec& spec) {
  const Interval I = spec.interval();
  const JumpMeasure nu = parse_measure(spec.measure, I);
  std::optional<double> start;
  if (spec.start != "nu") {
    const StartLaw law = parse_start(spec.start, I);
    if (!std::holds_alternative<double>(law))
      throw ValidationError("renewal: start must be a point or 'nu'");
    start = std::get<double>(law);
    if (!I.contains(*start)) throw ValidationError("renewal: start " + format_number(*start) + " outside the interval");
  }
  RenewalOptions options;
  options.dt = spec.dt;
  options.horizon = spec.horizon;
  options.tolerance = tolerance(spec, "richardson", options.tolerance);
  const RenewalSystem sys = renewal_solve(Indicator{spec.lo, spec.hi}, nu, start, options);

  Table table{{"t", "Z", "z"}, {}};
  for (std::size_t i = 0; i < sys.times.size(); ++i) table.rows.push_back({sys.times[i], sys.Z[i], sys.z[i]});
  out.csv("renewal", table);
  Series limit{"limit", {sys.times.front(), sys.times.back()}, {sys.limit, sys.limit}};
  out.svg("renewal", Plot{"Renewal solution", "t", "Z(t)", false,
                          {column_series(table, 0, 1, "Z"), column_series(table, 0, 2, "z"), limit}});

  out.line("renewal: limit " + format_number(sys.limit) + ", Z(horizon) " +
           format_number(sys.Z.back()) + ", Richardson error " + format_number(sys.richardson_error) +
           ", observed order " + format_number(sys.observed_order));
  if (sys.accuracy_warning) {
    out.bundle.warnings.push_back(sys.warning);
    out.bundle.status = kNumerical;
  }
}

void run_tv_rate(Builder& out, const ExperimentSpec& spec) {
  const Interval I = spec.interval();
  const JumpMeasure nu = parse_measure(spec.measure, I);
  const RateEstimate est = tv_rate_estimate(nu, tv_starts(spec), tv_times(spec), replicates_of(spec),
                                            spec.seed, spec.bins, spec.workers);
  Table table{{"t", "tv", "stderr", "argmax_x"}, {}};
  for (const TvPoint& p : est.series) table.rows.push_back({p.t, p.tv, p.stderr_, p.argmax_x});
  out.csv("tvseries", table);

  Series fit{"fitted rate", {}, {}};
  const double t0 = est.series.front().t;
  const double v0 = est.series.front().tv;
  for (const TvPoint& p : est.series) {
    fit.x.push_back(p.t);
    fit.y.push_back(v0 * std::exp(-est.rate * (p.t - t0)));
  }
  out.svg("tvseries", Plot{"sup TV distance to the invariant law", "t", "TV", true,
                           {column_series(table, 0, 1, "Monte Carlo"), fit}});
  const double target = dirichlet_eigenvalue(I, 1);
  out.line("tv rate " + format_number(est.rate) + " +- " + format_number(est.stderr_) + " (95% [" +
           format_number(est.ci_low) + ", " + format_number(est.ci_high) + "]), reference 2 pi^2 / L^2 = " +
           format_number(target));
}

void run_spectrum(Builder& out, const ExperimentSpec& spec) {
  const Interval I = spec.interval();
  const JumpMeasure nu = parse_measure(spec.measure, I);
  const CharacteristicSystem system = spec.partner.empty()
                                          ? CharacteristicSystem(nu)
                                          : CharacteristicSystem(nu, parse_measure(spec.partner, I));
  SearchRegion region = default_region(I);
  if (spec.re_min > 0) region.re_min = spec.re_min;
  if (spec.re_max > 0) region.re_max = spec.re_max;
  if (spec.im_max > 0) region.im_max = spec.im_max;
  const SpectrumResult result = find_spectrum(system, region, spec.workers);

  Table table{{"re", "im", "multiplicity", "residual"}, {}};
  for (const SpectralRoot& r : result.roots)
    table.rows.push_back({r.value.real(), r.value.imag(), static_cast<double>(r.multiplicity), r.residual});
  out.csv("spectrum", table);

  out.line("region Re (" + format_number(region.re_min) + ", " + format_number(region.re_max) +
           "], |Im| <= " + format_number(region.im_max) + ": " +
           std::to_string(result.total_multiplicity()) + " roots, winding " +
           std::to_string(result.winding));
  if (result.gap) out.line("smallest real part " + format_number(*result.gap));
  if (result.total_multiplicity() != result.winding) {
    out.bundle.warnings.push_back("root multiplicities do not add up to the winding number");
    out.bundle.status = kNumerical;
  }
}

void run_gap_sweep(Builder& out, const ExperimentSpec& spec) {
  const Interval I = spec.interval();
  SweepTable sweep;
  std::string x_label;
  if (spec.sweep == "two-dirac") {
    const auto family = [&](double p) {
      return MeasurePair{JumpMeasure::dirac(I, I.a() + p * I.length()),
                         JumpMeasure::dirac(I, I.b() - p * I.length())};
    };
    sweep = parameter_sweep(sweep_parameters(spec), family, spec.workers);
    x_label = "relative distance of both atoms to their end";
  } else if (spec.sweep == "quantize" || spec.sweep == "truncate") {
    const JumpMeasure nu = parse_measure(spec.measure, I);
    std::optional<JumpMeasure> partner;
    if (!spec.partner.empty()) partner = parse_measure(spec.partner, I);
    const SweepKind kind = spec.sweep == "quantize" ? SweepKind::quantize : SweepKind::truncate;
    sweep = continuity_sweep(nu, sweep_levels(spec), kind, partner, spec.workers);
    x_label = "level n";
  } else {
    throw ValidationError("gap-sweep: unknown sweep '" + spec.sweep + "' (quantize, truncate, two-dirac)");
  }

  Table table{{"param", "gap"}, {}};
  for (const SweepRow& row : sweep.rows) table.rows.push_back({row.parameter, row.gap});
  out.csv("sweep", table);
  Plot plot{"Spectral gap sweep", x_label, "gap", false, {column_series(table, 0, 1, "gap")}};
  if (std::isfinite(sweep.limit)) {
    plot.series.push_back(
        {"limit", {table.rows.front()[0], table.rows.back()[0]}, {sweep.limit, sweep.limit}});
    out.line("limit " + format_number(sweep.limit));
  }
  out.svg("sweep", plot);
  out.line(std::to_string(sweep.rows.size()) + " sweep points, max deviation " +
           format_number(sweep.max_deviation));
}

void run_couple(Builder& out, const ExperimentSpec& spec) {
  const Interval I = spec.interval();
  const JumpMeasure nu = parse_measure(spec.measure, I);
  const std::size_t n = replicates_of(spec);
  const auto records = coupling_samples(spec.x, spec.y, nu, n, spec.seed, spec.workers);
  Table table{{"replicate", "tau", "stages_visited"}, {}};
  std::vector<double> taus;
  for (std::size_t r = 0; r < records.size(); ++r) {
    table.rows.push_back({static_cast<double>(r), records[r].time,
                          static_cast<double>(records[r].stages_visited())});
    taus.push_back(records[r].time);
  }
  out.csv("couplings", table);

  std::vector<double> sorted = taus;
  std::sort(sorted.begin(), sorted.end());
  Series surv{"P(tau > t)", {}, {}};
  for (double t : tail_times(spec)) {
    surv.x.push_back(t);
    surv.y.push_back(empirical_survival(sorted, t));
  }
  out.svg("couplings", Plot{"Coupling time survival", "t", "survival", true, {surv}});

  const MeanEstimate mean = mean_estimate(taus);
  out.line(std::to_string(n) + " couplings: mean time " + format_number(mean.mean) + " +- " +
           format_number(mean.stderr_));
  try {
    const TailFit fit = fit_tail_exponent(taus, kTailLow, kTailHigh);
    out.line("tail rate " + format_number(fit.rate) + " +- " + format_number(fit.stderr_) +
             ", reference 2 pi^2 / L^2 = " + format_number(dirichlet_eigenvalue(I, 1)));
  } catch (const NumericalError& e) {
    out.bundle.warnings.push_back(std::string("tail fit skipped: ") + e.what());
  }
}

void run_tails(Builder& out, const ExperimentSpec& spec) {
  const Interval I = spec.interval();
  const JumpMeasure nu = parse_measure(spec.measure, I);
  const TailComparison cmp =
      tail_vs_sum5(spec.x, spec.y, nu, replicates_of(spec), tail_times(spec), spec.seed, spec.workers);
  Table table{{"t", "surv_coupl", "surv_sum5", "chernoff"}, {}};
  for (std::size_t i = 0; i < cmp.times.size(); ++i)
    table.rows.push_back({cmp.times[i], cmp.coupling_survival[i], cmp.sum5_survival[i], cmp.chernoff[i]});
  out.csv("tails", table);
  out.svg("tails", Plot{"Coupling time against five centre exits", "t", "survival", true,
                        {column_series(table, 0, 1, "coupling time"),
                         column_series(table, 0, 2, "sum of 5 exits"),
                         column_series(table, 0, 3, "Chernoff bound")}});

  out.line(std::string("dominated by the sum of five exits: ") + (cmp.dominated ? "yes" : "no") +
           ", Chernoff envelope: " + (cmp.envelope ? "yes" : "no"));
  if (cmp.tail)
    out.line("tail rate " + format_number(cmp.tail->rate) + " +- " + format_number(cmp.tail->stderr_) +
             ", reference 2 pi^2 / L^2 = " + format_number(dirichlet_eigenvalue(I, 1)));
  else
    out.bundle.warnings.push_back("tail fit skipped: " + cmp.tail_note);
  if (!cmp.dominated || !cmp.envelope) out.bundle.status = kNumerical;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

void run_verify(Builder& out, const ExperimentSpec& spec) {
  VerifyOptions options{spec.seed, spec.workers};
  const auto results = verify_all(options, [](const CriterionResult& r) {
    std::cout << format_result(r) << std::endl;
  });
  std::string csv = "id,name,passed,seconds,detail\n";
  int passed = 0;
  for (const CriterionResult& r : results) {
    passed += r.passed;
    csv += std::to_string(r.id) + "," + csv_field(r.name) + "," + (r.passed ? "1" : "0") + "," +
           format_number(r.seconds) + "," + csv_field(r.detail) + "\n";
  }
  out.bundle.files.push_back({"verify.csv", csv});
  out.line(std::to_string(passed) + "/" + std::to_string(results.size()) + " criteria passed");
  if (passed != static_cast<int>(results.size())) out.bundle.status = kNumerical;
}

using Runner = void (*)(Builder&, const ExperimentSpec&);

const std::vector<std::pair<std::string, Runner>>& runners() {
  static const std::vector<std::pair<std::string, Runner>> table = {
      {"simulate", run_simulate}, {"invariant", run_invariant}, {"law", run_law},
      {"renewal", run_renewal},   {"tv-rate", run_tv_rate},     {"spectrum", run_spectrum},
      {"gap-sweep", run_gap_sweep}, {"couple", run_couple},     {"tails", run_tails},
      {"verify-all", run_verify}};
  return table;
}

nlohmann::ordered_json manifest(const ExperimentSpec& spec, const ReportBundle& bundle,
                                double seconds) {
  nlohmann::ordered_json m;
  m["command"] = spec.command;
  m["config_hash"] = hex64(spec.config_hash());
  m["config"] = spec.semantic();
  m["seed"] = spec.seed;
  m["versions"] = {
      {"bmjb", kVersion},
      {"compiler", __VERSION__},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                    "." + std::to_string(EIGEN_MINOR_VERSION)},
      {"boost", std::to_string(BOOST_VERSION / 100000) + "." +
                    std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                    std::to_string(BOOST_VERSION % 100)}};
  m["wall_time_seconds"] = seconds;
  m["status"] = bundle.status;
  m["warnings"] = bundle.warnings;
  auto files = nlohmann::ordered_json::array();
  std::uint64_t all = fnv1a("");
  for (const ReportFile& f : bundle.files) {
    const std::string h = hex64(fnv1a(f.content));
    files.push_back({{"name", f.name}, {"bytes", f.content.size()}, {"fnv1a", h}});
    all = fnv1a(f.name + ":" + h + "\n", all);
  }
  m["files"] = files;
  m["files_hash"] = hex64(all);
  return m;
}

}  // namespace

ParseError::ParseError(std::size_t position, const std::string& message)
    : std::runtime_error("at position " + std::to_string(position) + ": " + message),
      position_(position) {}

JumpMeasure parse_measure(std::string_view text, const Interval& interval) {
  if (text == "qsd") return JumpMeasure::quasistationary(interval);
  const std::size_t colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ParseError(text.size(), "expected 'dirac:', 'mix:', 'grid:' or 'qsd'");
  const std::string_view kind = text.substr(0, colon);
  Cursor cursor(text, colon + 1);
  if (kind == "dirac") {
    const double p = cursor.number();
    cursor.finish();
    return JumpMeasure::dirac(interval, p);
  }
  if (kind == "mix") {
    std::vector<Atom> atoms;
    do {
      const double p = cursor.number();
      cursor.expect(':');
      const double w = cursor.number();
      atoms.push_back({p, w});
    } while (cursor.accept(','));
    cursor.finish();
    return JumpMeasure::mixture(interval, std::move(atoms));
  }
  if (kind == "grid") {
    const std::string path(text.substr(colon + 1));
    if (path.empty()) throw ParseError(colon + 1, "expected a file path");
    return JumpMeasure::grid(interval, parse_grid_values(read_file(path), colon + 1), true);
  }
  throw ParseError(0, "unknown measure kind '" + std::string(kind) + "'");
}

StartLaw parse_start(std::string_view text, const Interval& interval) {
  Cursor cursor(text);
  try {
    const double x = cursor.number();
    cursor.finish();
    return x;
  } catch (const ParseError&) {
    return parse_measure(text, interval);
  }
}

std::map<std::string, std::string> ExperimentSpec::semantic() const {
  std::map<std::string, std::string> m;
  m["command"] = command;
  if (command != "verify-all") {
    m["interval"] = format_number(a) + "," + format_number(b);
    m["measure"] = measure_key(measure);
    m["plots"] = plots ? "1" : "0";
  }
  for (const auto& [key, value] : tolerances) m["tolerance." + key] = format_number(value);

  const std::size_t n = replicates_of(*this);
  auto monte_carlo = [&] {
    m["seed"] = std::to_string(seed);
    m["replicates"] = std::to_string(n);
  };
  if (command == "simulate" || command == "invariant" || command == "law") {
    m["points"] = std::to_string(points);
    if (command != "invariant") {
      m["start"] = measure_key(start);
      m["horizon"] = format_number(horizon);
    }
    if (command == "simulate" || n > 0) {
      monte_carlo();
      m["start"] = measure_key(start);
      m["horizon"] = format_number(horizon);
      m["bins"] = std::to_string(bins);
    }
  } else if (command == "renewal") {
    m["start"] = start == "nu" ? start : measure_key(start);
    m["indicator"] = format_number(lo) + "," + format_number(hi);
    m["dt"] = format_number(dt);
    m["horizon"] = format_number(horizon);
  } else if (command == "tv-rate") {
    monte_carlo();
    m["starts"] = join(tv_starts(*this));
    m["times"] = join(tv_times(*this));
    m["bins"] = std::to_string(bins);
  } else if (command == "spectrum") {
    m["partner"] = measure_key(partner);
    m["region"] = format_number(re_min) + "," + format_number(re_max) + "," + format_number(im_max);
  } else if (command == "gap-sweep") {
    m["sweep"] = sweep;
    if (sweep == "two-dirac") {
      m.erase("measure");
      m["parameters"] = join(sweep_parameters(*this));
    } else {
      m["partner"] = measure_key(partner);
      m["levels"] = join(sweep_levels(*this));
    }
  } else if (command == "couple" || command == "tails") {
    monte_carlo();
    m["pair"] = format_number(x) + "," + format_number(y);
    m["times"] = join(tail_times(*this));
  } else if (command == "verify-all") {
    m["seed"] = std::to_string(seed);
  }
  return m;
}

std::uint64_t ExperimentSpec::config_hash() const {
  std::uint64_t h = fnv1a("");
  for (const auto& [key, value] : semantic()) h = fnv1a(key + "=" + value + "\n", h);
  return h;
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : runners()) out.push_back(name);
    return out;
  }();
  return names;
}

ReportBundle run(const ExperimentSpec& spec) {
  const auto it = std::find_if(runners().begin(), runners().end(),
                               [&](const auto& entry) { return entry.first == spec.command; });
  if (it == runners().end()) throw CLI::ValidationError("unknown command '" + spec.command + "'");
  for (const auto& [key, value] : spec.tolerances) {
    (void)value;
    if (std::find(tolerance_keys().begin(), tolerance_keys().end(), key) == tolerance_keys().end())
      throw ParseError(0, "unknown tolerance '" + key + "' (known: truncation, richardson)");
  }
  if (spec.points < 2) throw ValidationError("points must be at least 2");
  if (spec.bins < 1) throw ValidationError("bins must be at least 1");

  const auto begin = std::chrono::steady_clock::now();
  Builder out{{}, spec.plots};
  it->second(out, spec);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  out.bundle.files.push_back({"manifest.json", manifest(spec, out.bundle, seconds).dump(2) + "\n"});
  return out.bundle;
}

namespace {

// INI reader that rejects lines that are neither sections nor key = value.
class StrictConfig : public CLI::ConfigINI {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::stringstream copy;
    copy << input.rdbuf();
    std::string line;
    int number = 0;
    while (std::getline(copy, line)) {
      ++number;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == ';' || line[first] == '#') continue;
      const auto last = line.find_last_not_of(" \t\r");
      const bool section = line[first] == '[' && line[last] == ']' &&
                           line.find_first_of("[]", first + 1) == last;
      if (!section && line.find('=') == std::string::npos)
        throw CLI::ConfigError("line " + std::to_string(number) + ": expected [section] or key = value");
    }
    copy.clear();
    copy.seekg(0);
    std::vector<CLI::ConfigItem> items = CLI::ConfigINI::from_config(copy);
    // Measure text contains commas, which the INI reader treats as list separators.
    for (CLI::ConfigItem& item : items) {
      if (item.inputs.size() < 2 || (item.name != "measure" && item.name != "start" && item.name != "partner"))
        continue;
      std::string joined = item.inputs.front();
      for (std::size_t i = 1; i < item.inputs.size(); ++i) joined += "," + item.inputs[i];
      item.inputs = {joined};
    }
    return items;
  }
};

std::filesystem::path output_directory(const ExperimentSpec& spec) {
  if (!spec.output.empty()) return spec.output;
  const char* env = std::getenv("BMJB_OUT_DIR");
  const std::filesystem::path base = env && *env ? env : "bmjb-out";
  return base / spec.command;
}

void add_options(CLI::App& sub, ExperimentSpec& spec, const std::string& name) {
  sub.add_option("--interval", [&spec](const CLI::results_t& r) {
       spec.a = std::stod(r.at(0));
       spec.b = std::stod(r.at(1));
       return true;
     }, "Interval end points a b")
      ->expected(2)
      ->type_name("A B");
  const bool mc = name == "simulate" || name == "invariant" || name == "law" ||
                  name == "tv-rate" || name == "couple" || name == "tails";
  if (name != "verify-all") {
    sub.add_option("--measure", spec.measure, "Jump measure: dirac:P | mix:P:W,... | grid:PATH | qsd");
    sub.add_option("--tolerance", [&spec](const CLI::results_t& r) {
         for (const std::string& item : r) {
           if (item.empty()) continue;
           const auto eq = item.find('=');
           if (eq == std::string::npos) throw ParseError(0, "tolerance '" + item + "' needs NAME=VALUE");
           spec.tolerances[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
         }
         return true;
       }, "Tolerance override NAME=VALUE (truncation, richardson)")
        ->expected(1, CLI::detail::expected_max_vector_size)
        ->type_name("NAME=VALUE");
    sub.add_flag("!--no-plots", spec.plots, "Skip SVG output");
  }
  if (mc || name == "verify-all") sub.add_option("--seed", spec.seed, "Random seed");
  if (mc) sub.add_option("--replicates", spec.replicates, "Monte Carlo replicates (0: command default)");
  if (name == "simulate" || name == "invariant" || name == "law" || name == "renewal") {
    sub.add_option("--start", spec.start, "Start point or start measure");
    sub.add_option("--horizon", spec.horizon, "Time horizon");
  }
  if (name == "simulate" || name == "invariant" || name == "law") {
    sub.add_option("--points", spec.points, "Density grid points");
    sub.add_option("--bins", spec.bins, "Histogram bins");
  }
  if (name == "renewal") {
    sub.add_option("--lo", spec.lo, "Indicator lower end");
    sub.add_option("--hi", spec.hi, "Indicator upper end");
    sub.add_option("--dt", spec.dt, "Renewal mesh");
  }
  if (name == "tv-rate") {
    sub.add_option("--starts", spec.grid, "Start points for the supremum")->delimiter(',');
    sub.add_option("--times", spec.times, "Time grid")->delimiter(',');
    sub.add_option("--bins", spec.bins, "Histogram bins");
  }
  if (name == "spectrum" || name == "gap-sweep")
    sub.add_option("--partner", spec.partner, "Right-end law (spectrum) or sweep partner");
  if (name == "spectrum") {
    sub.add_option("--re-min", spec.re_min, "Region lower real bound (0: default)");
    sub.add_option("--re-max", spec.re_max, "Region upper real bound (0: default)");
    sub.add_option("--im-max", spec.im_max, "Region imaginary half-height (0: default)");
  }
  if (name == "gap-sweep") {
    sub.add_option("--sweep", spec.sweep, "quantize | truncate | two-dirac");
    sub.add_option("--levels", spec.levels, "Quantization or truncation levels")->delimiter(',');
    sub.add_option("--parameters", spec.grid, "two-dirac relative atom distances")->delimiter(',');
  }
  if (name == "couple" || name == "tails") {
    sub.add_option("--x", spec.x, "First start point");
    sub.add_option("--y", spec.y, "Second start point");
    sub.add_option("--times", spec.times, "Survival time grid")->delimiter(',');
  }
}

}  // namespace

int main_entry(int argc, char** argv) {
  ExperimentSpec spec;
  CLI::App app{"Brownian motion with jump boundary: experiments and checks", "bmjb"};
  app.set_version_flag("--version", kVersion);
  app.config_formatter(std::make_shared<StrictConfig>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "INI/TOML config; [command] sections hold that command's keys");
  std::string output;
  app.add_option("--out", output, "Output directory (default $BMJB_OUT_DIR/<command>)");
  app.add_flag("--force", spec.force, "Overwrite existing output files");
  app.add_option("--workers", spec.workers, "Worker threads (0: logical cores)");
  app.require_subcommand(1);
  app.fallthrough();

  const std::vector<std::pair<std::string, std::string>> help = {
      {"simulate", "Simulate paths and compare the time-t law with the exact density"},
      {"invariant", "Invariant density, optionally against a Monte Carlo histogram"},
      {"law", "Exact law at a fixed time"},
      {"renewal", "Solve the renewal equation for an indicator"},
      {"tv-rate", "Decay rate of the sup total variation distance"},
      {"spectrum", "Roots of the characteristic function in a rectangle"},
      {"gap-sweep", "Spectral gap along a family of jump measures"},
      {"couple", "Sample coupling times"},
      {"tails", "Coupling-time tail against five centre exits"},
      {"verify-all", "Run all acceptance criteria"}};
  for (const auto& [name, text] : help) {
    CLI::App* sub = app.add_subcommand(name, text);
    add_options(*sub, spec, name);
    sub->callback([&spec, name = name] { spec.command = name; });
  }

  if (argc > 1 && argv[1][0] != '-' &&
      std::find(commands().begin(), commands().end(), argv[1]) == commands().end()) {
    std::cerr << "usage error: unknown command '" << argv[1] << "'\n";
    return kUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const CLI::FileError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error " << e.what() << "\n";
    return kConfig;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: bad number: " << e.what() << "\n";
    return kUsage;
  }
  if (!output.empty()) spec.output = output;

  try {
    const ReportBundle bundle = run(spec);
    const std::filesystem::path dir = output_directory(spec);
    write_bundle(bundle, dir, spec.force);
    std::cout << bundle.summary;
    for (const std::string& w : bundle.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << bundle.files.size() << " files to " << dir.string() << "\n";
    return bundle.status;
  } catch (const ParseError& e) {
    std::cerr << "parse error " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return kPrecondition;
  } catch (const ValidationError& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return kPrecondition;
  } catch (const DomainError& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return kPrecondition;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace bmjb::cli
