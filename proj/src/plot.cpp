#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "spdhg/harness.hpp"

namespace spdhg {

namespace {

constexpr double kWidth = 860.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 180.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                "#9467bd", "#ff7f0e", "#8c564b"};
constexpr size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Index-aligned envelope across seeds: the runner logs every seed on the same
// iteration grid, so points at equal indices share an epoch.
struct Envelope {
  std::vector<double> x, mean, lo, hi;
};

Envelope make_envelope(const PlotSeries& s) {
  Envelope e;
  size_t len = std::numeric_limits<size_t>::max();
  for (const auto& seed : s.per_seed) len = std::min(len, seed.size());
  if (s.per_seed.empty() || len == std::numeric_limits<size_t>::max()) return e;
  for (size_t i = 0; i < len; ++i) {
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    size_t count = 0;
    for (const auto& seed : s.per_seed) {
      const double v = seed[i].second;
      if (!std::isfinite(v)) continue;
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      ++count;
    }
    if (count == 0) continue;
    e.x.push_back(s.per_seed.front()[i].first);
    e.mean.push_back(sum / static_cast<double>(count));
    e.lo.push_back(lo);
    e.hi.push_back(hi);
  }
  return e;
}

}  // namespace

void write_plot_svg(std::ostream& out, const std::string& metric_name,
                    const std::vector<PlotSeries>& series) {
  std::vector<Envelope> envs;
  envs.reserve(series.size());
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -std::numeric_limits<double>::infinity();
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  for (const PlotSeries& s : series) {
    envs.push_back(make_envelope(s));
    const Envelope& e = envs.back();
    for (size_t i = 0; i < e.x.size(); ++i) {
      xmin = std::min(xmin, e.x[i]);
      xmax = std::max(xmax, e.x[i]);
      for (double v : {e.mean[i], e.lo[i], e.hi[i]}) {
        if (v > 0.0) {
          ymin = std::min(ymin, v);
          ymax = std::max(ymax, v);
        }
      }
    }
  }

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth)
      << "\" height=\"" << num(kHeight) << "\" viewBox=\"0 0 " << num(kWidth)
      << ' ' << num(kHeight) << "\">\n";
  out << "<rect width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
      << "\" fill=\"white\"/>\n";

  const double x0 = kLeft, x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom, y1 = kTop;
  const bool have_data = std::isfinite(xmin) && std::isfinite(ymin) && ymax > 0.0;
  if (!have_data) {
    out << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\">no positive data for "
        << metric_name << "</text>\n</svg>\n";
    return;
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  double dec_lo = std::floor(std::log10(ymin));
  double dec_hi = std::ceil(std::log10(ymax));
  if (dec_hi <= dec_lo) dec_hi = dec_lo + 1.0;

  const auto px = [&](double x) {
    return x0 + (x - xmin) / (xmax - xmin) * (x1 - x0);
  };
  const auto py = [&](double v) {
    const double t = (std::log10(v) - dec_lo) / (dec_hi - dec_lo);
    return y0 + t * (y1 - y0);
  };

  // Grid and ticks: one horizontal rule per decade (thinned past 12), five
  // evenly spaced x ticks.
  long step = 1;
  while ((static_cast<long>(dec_hi - dec_lo) + step - 1) / step > 12) ++step;
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (long d = static_cast<long>(dec_lo); d <= static_cast<long>(dec_hi);
       d += step) {
    const double y = py(std::pow(10.0, static_cast<double>(d)));
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(x1) << "\" y2=\"" << num(y)
        << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double x = xmin + (xmax - xmin) * t / 4.0;
    out << "<line x1=\"" << num(px(x)) << "\" y1=\"" << num(y0) << "\" x2=\""
        << num(px(x)) << "\" y2=\"" << num(y0 + 4)
        << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << num(px(x)) << "\" y=\"" << num(y0 + 18)
        << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
  }
  out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\""
      << num(kHeight - 12) << "\" text-anchor=\"middle\">epochs</text>\n";
  out << "<text x=\"16\" y=\"" << num((y0 + y1) / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num((y0 + y1) / 2) << ")\">" << metric_name << "</text>\n";
  out << "</g>\n";
  out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\""
      << num(x1 - x0) << "\" height=\"" << num(y0 - y1)
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";

  const double floor_v = std::pow(10.0, dec_lo);
  for (size_t s = 0; s < envs.size(); ++s) {
    const Envelope& e = envs[s];
    const char* color = kPalette[s % kPaletteSize];
    if (e.x.empty()) continue;
    // Min-max band: forward over the max edge, back over the min edge.
    out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" "
        << "stroke=\"none\" points=\"";
    for (size_t i = 0; i < e.x.size(); ++i)
      out << num(px(e.x[i])) << ',' << num(py(std::max(e.hi[i], floor_v)))
          << ' ';
    for (size_t i = e.x.size(); i-- > 0;)
      out << num(px(e.x[i])) << ',' << num(py(std::max(e.lo[i], floor_v)))
          << (i == 0 ? "" : " ");
    out << "\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (size_t i = 0; i < e.x.size(); ++i) {
      if (!(e.mean[i] > 0.0)) continue;
      if (!first) out << ' ';
      out << num(px(e.x[i])) << ',' << num(py(e.mean[i]));
      first = false;
    }
    out << "\"/>\n";
  }

  // Legend, right margin.
  out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
  double ly = y1 + 10.0;
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    out << "<line x1=\"" << num(x1 + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(x1 + 34) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(x1 + 40) << "\" y=\"" << num(ly + 4) << "\">"
        << series[s].label << "</text>\n";
    ly += 18.0;
  }
  out << "</g>\n</svg>\n";
}

}  // namespace spdhg
