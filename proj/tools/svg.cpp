// Copyright 2026 The lvlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lvlab::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 190.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi - lo < 1e-9) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double p = 0.05 * (hi - lo);
    lo -= p;
    hi += p;
  }
};

// Tick positions in log10 units: decades, or powers of two on short ranges.
std::vector<double> ticks(const Range& r) {
  std::vector<double> out;
  for (double k = std::ceil(r.lo); k <= r.hi; k += 1.0) out.push_back(k);
  if (out.size() >= 2) return out;
  out.clear();
  const double l2 = std::log10(2.0);
  for (double k = std::ceil(r.lo / l2); k * l2 <= r.hi; k += 1.0) out.push_back(k * l2);
  return out;
}

}  // namespace

std::string render(const LogLogPlot& plot) {
  Range xr, yr;
  for (const auto& s : plot.series)
    for (const auto& [x, y] : s.points)
      if (x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y)) {
        xr.add(std::log10(x));
        yr.add(std::log10(y));
      }
  if (!(xr.lo <= xr.hi)) throw std::invalid_argument("plot has no positive points");
  for (const auto& ref : plot.references) {
    yr.add(std::log10(ref.y0) + ref.slope * (xr.lo - std::log10(ref.x0)));
    yr.add(std::log10(ref.y0) + ref.slope * (xr.hi - std::log10(ref.x0)));
  }
  xr.pad();
  yr.pad();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double lx) { return kLeft + (lx - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double ly) { return kTop + (yr.hi - ly) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
    << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<defs><clipPath id=\"plot-area\"><rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\""
    << num(pw) << "\" height=\"" << num(ph) << "\"/></clipPath></defs>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(plot.title) << "</text>\n";

  for (double t : ticks(xr)) {
    o << "<line class=\"grid\" x1=\"" << num(px(t)) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(px(t))
      << "\" y2=\"" << num(kTop + ph) << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
      << tick_label(std::pow(10.0, t)) << "</text>\n";
  }
  for (double t : ticks(yr)) {
    o << "<line class=\"grid\" x1=\"" << num(kLeft) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(kLeft + pw)
      << "\" y2=\"" << num(py(t)) << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">"
      << tick_label(std::pow(10.0, t)) << "</text>\n";
  }
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 16) << "\" text-anchor=\"middle\">"
    << escape(plot.x_label) << "</text>\n";
  o << "<text transform=\"translate(20," << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(plot.y_label) << "</text>\n";

  o << "<g clip-path=\"url(#plot-area)\">\n";
  for (const auto& ref : plot.references) {
    const double y_lo = std::log10(ref.y0) + ref.slope * (xr.lo - std::log10(ref.x0));
    const double y_hi = std::log10(ref.y0) + ref.slope * (xr.hi - std::log10(ref.x0));
    o << "<line class=\"reference\" x1=\"" << num(px(xr.lo)) << "\" y1=\"" << num(py(y_lo)) << "\" x2=\""
      << num(px(xr.hi)) << "\" y2=\"" << num(py(y_hi)) << "\" stroke=\"" << ref.color
      << "\" stroke-dasharray=\"6 4\"/>\n";
  }
  for (const auto& s : plot.series) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [x, y] : s.points)
      if (x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y))
        pts.emplace_back(px(std::log10(x)), py(std::log10(y)));
    if (s.line && pts.size() > 1) {
      o << "<polyline class=\"series\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < pts.size(); ++k) o << (k ? " " : "") << num(pts[k].first) << ',' << num(pts[k].second);
      o << "\"/>\n";
    }
    if (s.markers)
      for (const auto& [x, y] : pts)
        o << "<circle class=\"marker\" cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3.5\" fill=\"" << s.color
          << "\"/>\n";
  }
  o << "</g>\n";

  double ly = kTop + 10;
  const double lx = kLeft + pw + 16;
  auto legend = [&](const std::string& label, const std::string& color, bool dashed) {
    o << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 24) << "\" y2=\"" << num(ly)
      << "\" stroke=\"" << color << '"' << (dashed ? " stroke-dasharray=\"6 4\"" : " stroke-width=\"1.5\"")
      << "/>\n";
    o << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(ly + 4) << "\">" << escape(label) << "</text>\n";
    ly += 20;
  };
  for (const auto& s : plot.series) legend(s.label, s.color, false);
  for (const auto& ref : plot.references) legend(ref.label, ref.color, true);
  o << "</svg>\n";
  return o.str();
}

}  // namespace lvlab::svg
