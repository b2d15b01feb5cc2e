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


// Static log-log plots written as SVG text.

#ifndef LVLAB_TOOLS_SVG_HPP
#define LVLAB_TOOLS_SVG_HPP

#include <string>
#include <utility>
#include <vector>

namespace lvlab::svg {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  ///< (x, y), both > 0
  std::string color = "#1f77b4";
  bool line = true;
  bool markers = true;
};

/// y = y0 (x / x0)^slope across the plotted x range.
struct ReferenceLine {
  std::string label;
  double slope = 0.0;
  double x0 = 1.0;
  double y0 = 1.0;
  std::string color = "#7f7f7f";
};

struct LogLogPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<ReferenceLine> references;
};

/// Throws std::invalid_argument when no series has a positive point.
std::string render(const LogLogPlot& plot);

}  // namespace lvlab::svg

#endif  // LVLAB_TOOLS_SVG_HPP
