// include/s2i/svg.hpp

// Copyright 2026  The s2i authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef S2I_SVG_HPP_
#define S2I_SVG_HPP_

#include <string>
#include <utility>
#include <vector>

namespace s2i {

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

// Self-contained SVG line chart: fixed viewBox, linear scales, one polyline
// per series, embedded legend and axis labels. No external resources.
std::string render_line_chart(const std::string& title,
                              const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<SvgSeries>& series);

}  // namespace s2i

#endif  // S2I_SVG_HPP_
