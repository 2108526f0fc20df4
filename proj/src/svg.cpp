// src/svg.cpp

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

#include "s2i/svg.hpp"

#include <algorithm>
#include <cstdio>

#include "s2i/common.hpp"

namespace s2i {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 640.0;   // plot area right edge; legend lives beyond
constexpr double kTop = 50.0;
constexpr double kBottom = 440.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_line_chart(const std::string& title,
                              const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<SvgSeries>& series) {
  require(!series.empty(), ErrorCode::kConfig, "no series to plot");
  double x_min = series[0].points.at(0).first;
  double x_max = x_min;
  double y_min = series[0].points.at(0).second;
  double y_max = y_min;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_max - x_min < 1e-12) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  // Accuracy-style data gets the full unit range; anything else is padded.
  if (y_min >= 0.0 && y_max <= 1.0) {
    y_min = 0.0;
    y_max = 1.0;
  } else {
    const double pad = 0.05 * (y_max - y_min + 1e-12);
    y_min -= pad;
    y_max += pad;
  }

  const auto sx = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * (kRight - kLeft);
  };
  const auto sy = [&](double y) {
    return kBottom - (y - y_min) / (y_max - y_min) * (kBottom - kTop);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " +
         num(kWidth) + " " + num(kHeight) + "\">\n";
  svg += "<rect width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num((kLeft + kRight) / 2) +
         "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">" +
         escape(title) + "</text>\n";

  // Axes.
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kBottom) + "\" x2=\"" +
         num(kRight) + "\" y2=\"" + num(kBottom) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" +
         num(kLeft) + "\" y2=\"" + num(kBottom) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  // Ticks: 5 on each axis.
  for (int i = 0; i <= 4; ++i) {
    const double fx = x_min + (x_max - x_min) * i / 4.0;
    const double fy = y_min + (y_max - y_min) * i / 4.0;
    svg += "<line x1=\"" + num(sx(fx)) + "\" y1=\"" + num(kBottom) +
           "\" x2=\"" + num(sx(fx)) + "\" y2=\"" + num(kBottom + 5) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(sx(fx)) + "\" y=\"" + num(kBottom + 20) +
           "\" text-anchor=\"middle\" font-size=\"11\" "
           "font-family=\"sans-serif\">" +
           num(fx) + "</text>\n";
    svg += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(sy(fy)) +
           "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(sy(fy)) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(kLeft - 9) + "\" y=\"" + num(sy(fy) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\" "
           "font-family=\"sans-serif\">" +
           num(fy) + "</text>\n";
  }

  // Axis labels.
  svg += "<text x=\"" + num((kLeft + kRight) / 2) + "\" y=\"" +
         num(kBottom + 45) +
         "\" text-anchor=\"middle\" font-size=\"13\" "
         "font-family=\"sans-serif\">" +
         escape(x_label) + "</text>\n";
  svg += "<text x=\"20\" y=\"" + num((kTop + kBottom) / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 20 " +
         num((kTop + kBottom) / 2) + ")\">" +
         escape(y_label) + "</text>\n";

  // One polyline per series plus a legend row.
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    std::string points;
    for (const auto& [x, y] : series[s].points)
      points += num(sx(x)) + "," + num(sy(y)) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    const double ly = kTop + 18.0 * static_cast<double>(s);
    svg += "<line x1=\"" + num(kRight + 14) + "\" y1=\"" + num(ly) +
           "\" x2=\"" + num(kRight + 38) + "\" y2=\"" + num(ly) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(kRight + 44) + "\" y=\"" + num(ly + 4) +
           "\" font-size=\"12\" font-family=\"sans-serif\">" +
           escape(series[s].label) + "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace s2i
