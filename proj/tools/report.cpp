#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "bmjb/cli.hpp"

namespace bmjb::cli {

std::uint64_t fnv1a(std::string_view data, std::uint64_t hash) {
  for (unsigned char ch : data) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (j) out += ',';
    out += columns[j];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += format_number(row[j]);
    }
    out += '\n';
  }
  return out;
}

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 180.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fixed(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.2f", value);
  return buffer;
}

std::string tick_label(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.4g", value);
  return buffer;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return !(lo <= hi); }
  void pad() {
    if (hi - lo < 1e-300) {
      const double d = std::max(1.0, std::abs(lo)) * 0.5;
      lo -= d;
      hi += d;
    }
  }
};

}  // namespace

std::string render_svg(const Plot& plot) {
  auto ty = [&](double v) { return plot.log_y ? (v > 0 ? std::log10(v) : NAN) : v; };

  Range xr, yr;
  for (const Series& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double y = ty(s.y[i]);
      if (!std::isfinite(y)) continue;
      xr.add(s.x[i]);
      yr.add(y);
    }
  }
  if (xr.empty() || yr.empty()) throw std::runtime_error("plot '" + plot.title + "' has no finite points");
  xr.pad();
  yr.pad();
  if (!plot.log_y && yr.lo > 0 && yr.lo < 0.5 * yr.hi) yr.lo = 0.0;
  if (plot.log_y) {
    yr.lo = std::floor(yr.lo);
    yr.hi = std::ceil(yr.hi);
  }

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(plot.title) << "</text>\n";
  svg << "<rect x=\"" << fixed(kLeft) << "\" y=\"" << fixed(kTop) << "\" width=\"" << fixed(pw)
      << "\" height=\"" << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  const int ticks = 5;
  for (int k = 0; k <= ticks; ++k) {
    const double xv = xr.lo + (xr.hi - xr.lo) * k / ticks;
    const double X = px(xv);
    svg << "<line x1=\"" << fixed(X) << "\" y1=\"" << fixed(kTop + ph) << "\" x2=\"" << fixed(X)
        << "\" y2=\"" << fixed(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fixed(X) << "\" y=\"" << fixed(kTop + ph + 20)
        << "\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
  }
  const int yticks = plot.log_y ? static_cast<int>(yr.hi - yr.lo) : ticks;
  const int ystep = std::max(1, yticks / 8);
  for (int k = 0; k <= yticks; k += ystep) {
    const double yv = yr.lo + (yr.hi - yr.lo) * k / std::max(yticks, 1);
    const double Y = py(yv);
    svg << "<line x1=\"" << fixed(kLeft - 5) << "\" y1=\"" << fixed(Y) << "\" x2=\"" << fixed(kLeft)
        << "\" y2=\"" << fixed(Y) << "\" stroke=\"black\"/>\n";
    const std::string label = plot.log_y ? "1e" + tick_label(yv) : tick_label(yv);
    svg << "<text x=\"" << fixed(kLeft - 8) << "\" y=\"" << fixed(Y + 4)
        << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  svg << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << fixed(kHeight - 15)
      << "\" text-anchor=\"middle\">" << escape(plot.x_label) << "</text>\n";
  svg << "<text transform=\"translate(18 " << fixed(kTop + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(plot.y_label) << "</text>\n";

  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const Series& series = plot.series[s];
    const char* color = kPalette[s % std::size(kPalette)];
    std::string points;
    auto add = [&](double x, double y) {
      if (!points.empty()) points += ' ';
      points += fixed(px(x)) + ',' + fixed(py(std::clamp(y, yr.lo, yr.hi)));
    };
    const std::size_t n = std::min(series.x.size(), series.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double y = ty(series.y[i]);
      if (!std::isfinite(y)) continue;
      if (series.bars) {
        // x holds bin centres on a uniform grid.
        const double half = n > 1 ? 0.5 * (series.x[1] - series.x[0]) : 0.5;
        add(series.x[i] - half, y);
        add(series.x[i] + half, y);
      } else {
        add(series.x[i], y);
      }
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
        << points << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(s);
    svg << "<line x1=\"" << fixed(kLeft + pw + 12) << "\" y1=\"" << fixed(ly) << "\" x2=\""
        << fixed(kLeft + pw + 36) << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fixed(kLeft + pw + 42) << "\" y=\"" << fixed(ly + 4) << "\">"
        << escape(series.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& directory, bool force) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create output directory " + directory.string() + ": " + ec.message());
  if (!force) {
    for (const ReportFile& file : bundle.files) {
      const fs::path path = directory / file.name;
      if (fs::exists(path)) throw IoError(path.string() + " exists (use --force to overwrite)");
    }
  }
  for (const ReportFile& file : bundle.files) {
    const fs::path path = directory / file.name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << file.content;
    out.close();
    if (!out) throw IoError("cannot write " + path.string());
  }
}

}  // namespace bmjb::cli
