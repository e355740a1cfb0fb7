// Copyright 2026 The culturesteer Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CULTURESTEER_SVG_HPP_
#define CULTURESTEER_SVG_HPP_

#include <string>
#include <utility>
#include <vector>

#include "culturesteer/analysis.hpp"

namespace culturesteer {

// Scatter map of human anchors (grey), model coordinates (colored), and
// optional baseline->steered arrows. Pure string emission, no I/O.
std::string svg_culture_map(
    const HumanAnchors& anchors,
    const std::vector<CulturalCoordinate>& coordinates,
    const std::vector<std::pair<CulturalCoordinate, CulturalCoordinate>>&
        arrows);

// Single-series line chart, used for the perplexity-vs-alpha curve.
std::string svg_line_chart(const std::string& title,
                           const std::string& x_label,
                           const std::string& y_label,
                           const std::vector<std::pair<double, double>>& points);

}  // namespace culturesteer

#endif  // CULTURESTEER_SVG_HPP_
