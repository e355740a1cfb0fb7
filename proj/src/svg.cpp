// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#include "culturesteer/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace culturesteer {

namespace {

// Fixed-precision screen coordinates keep the emitted bytes reproducible.
std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double min_x, max_x, min_y, max_y;
  double width, height, margin;

  double sx(double x) const {
    return margin + (x - min_x) / (max_x - min_x) * (width - 2 * margin);
  }
  double sy(double y) const {
    // SVG y grows downward.
    return height - margin - (y - min_y) / (max_y - min_y) * (height - 2 * margin);
  }
};

void grow(double& lo, double& hi) {
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  } else {
    double pad = (hi - lo) * 0.08;
    lo -= pad;
    hi += pad;
  }
}

}  // namespace

std::string svg_culture_map(
    const HumanAnchors& anchors,
    const std::vector<CulturalCoordinate>& coordinates,
    const std::vector<std::pair<CulturalCoordinate, CulturalCoordinate>>&
        arrows) {
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  auto take = [&](double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  };
  for (const auto& [country, xy] : anchors.coords) take(xy.first, xy.second);
  for (const auto& c : coordinates) take(c.x, c.y);
  for (const auto& [a, b] : arrows) {
    take(a.x, a.y);
    take(b.x, b.y);
  }
  if (min_x > max_x) take(0, 0);
  grow(min_x, max_x);
  grow(min_y, max_y);

  Frame f{min_x, max_x, min_y, max_y, 760, 560, 48};
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"560\" "
       "viewBox=\"0 0 760 560\">\n";
  s += "<rect width=\"760\" height=\"560\" fill=\"white\"/>\n";
  s += "<text x=\"380\" y=\"546\" text-anchor=\"middle\" font-size=\"13\" "
       "font-family=\"sans-serif\">Survival vs. Self-Expression</text>\n";
  s += "<text x=\"16\" y=\"280\" text-anchor=\"middle\" font-size=\"13\" "
       "font-family=\"sans-serif\" transform=\"rotate(-90 16 280)\">"
       "Traditional vs. Secular-Rational</text>\n";
  // Zero axes when inside the frame.
  if (min_x < 0 && max_x > 0) {
    s += "<line x1=\"" + px(f.sx(0)) + "\" y1=\"" + px(f.sy(min_y)) +
         "\" x2=\"" + px(f.sx(0)) + "\" y2=\"" + px(f.sy(max_y)) +
         "\" stroke=\"#dddddd\"/>\n";
  }
  if (min_y < 0 && max_y > 0) {
    s += "<line x1=\"" + px(f.sx(min_x)) + "\" y1=\"" + px(f.sy(0)) +
         "\" x2=\"" + px(f.sx(max_x)) + "\" y2=\"" + px(f.sy(0)) +
         "\" stroke=\"#dddddd\"/>\n";
  }
  for (const auto& [country, xy] : anchors.coords) {
    s += "<circle cx=\"" + px(f.sx(xy.first)) + "\" cy=\"" +
         px(f.sy(xy.second)) + "\" r=\"3\" fill=\"#9aa0a6\"/>\n";
    s += "<text x=\"" + px(f.sx(xy.first) + 5) + "\" y=\"" +
         px(f.sy(xy.second) - 4) +
         "\" font-size=\"9\" font-family=\"sans-serif\" fill=\"#5f6368\">" +
         escape(country) + "</text>\n";
  }
  for (const auto& [from, to] : arrows) {
    s += "<line x1=\"" + px(f.sx(from.x)) + "\" y1=\"" + px(f.sy(from.y)) +
         "\" x2=\"" + px(f.sx(to.x)) + "\" y2=\"" + px(f.sy(to.y)) +
         "\" stroke=\"#d93025\" stroke-width=\"1.5\"/>\n";
    s += "<circle cx=\"" + px(f.sx(to.x)) + "\" cy=\"" + px(f.sy(to.y)) +
         "\" r=\"3\" fill=\"#d93025\"/>\n";
  }
  for (const auto& c : coordinates) {
    s += "<circle cx=\"" + px(f.sx(c.x)) + "\" cy=\"" + px(f.sy(c.y)) +
         "\" r=\"5\" fill=\"#1a73e8\"/>\n";
    if (!c.label.empty()) {
      s += "<text x=\"" + px(f.sx(c.x) + 7) + "\" y=\"" + px(f.sy(c.y) + 4) +
           "\" font-size=\"11\" font-family=\"sans-serif\" fill=\"#174ea6\">" +
           escape(c.label) + "</text>\n";
    }
  }
  s += "</svg>\n";
  return s;
}

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label,
                           const std::vector<std::pair<double, double>>& points) {
  if (points.empty()) throw Error(Errc::bad_argument, "no points to plot");
  double min_x = points[0].first, max_x = points[0].first;
  double min_y = points[0].second, max_y = points[0].second;
  for (const auto& [x, y] : points) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  grow(min_x, max_x);
  grow(min_y, max_y);
  Frame f{min_x, max_x, min_y, max_y, 640, 420, 52};

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
       "viewBox=\"0 0 640 420\">\n";
  s += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\" "
       "font-family=\"sans-serif\">" +
       escape(title) + "</text>\n";
  s += "<text x=\"320\" y=\"408\" text-anchor=\"middle\" font-size=\"12\" "
       "font-family=\"sans-serif\">" +
       escape(x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"210\" text-anchor=\"middle\" font-size=\"12\" "
       "font-family=\"sans-serif\" transform=\"rotate(-90 16 210)\">" +
       escape(y_label) + "</text>\n";
  s += "<line x1=\"" + px(f.sx(min_x)) + "\" y1=\"" + px(f.sy(min_y)) +
       "\" x2=\"" + px(f.sx(max_x)) + "\" y2=\"" + px(f.sy(min_y)) +
       "\" stroke=\"#5f6368\"/>\n";
  s += "<line x1=\"" + px(f.sx(min_x)) + "\" y1=\"" + px(f.sy(min_y)) +
       "\" x2=\"" + px(f.sx(min_x)) + "\" y2=\"" + px(f.sy(max_y)) +
       "\" stroke=\"#5f6368\"/>\n";

  std::string path = "M";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) path += " L";
    path += px(f.sx(points[i].first)) + " " + px(f.sy(points[i].second));
  }
  s += "<path d=\"" + path +
       "\" fill=\"none\" stroke=\"#1a73e8\" stroke-width=\"2\"/>\n";
  for (const auto& [x, y] : points) {
    s += "<circle cx=\"" + px(f.sx(x)) + "\" cy=\"" + px(f.sy(y)) +
         "\" r=\"3.5\" fill=\"#1a73e8\"/>\n";
    s += "<text x=\"" + px(f.sx(x)) + "\" y=\"" + px(f.sy(y) - 8) +
         "\" text-anchor=\"middle\" font-size=\"10\" "
         "font-family=\"sans-serif\" fill=\"#174ea6\">" +
         fmt_double(y).substr(0, 6) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace culturesteer
