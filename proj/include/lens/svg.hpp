// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0
//
// Hand-rolled SVG line charts: axes, one polyline per series, and a
// horizontal rule at y = 0 marking the unreduced baseline. CSV is the
// machine contract; these are for eyeballs.

#ifndef LENS_SVG_HPP
#define LENS_SVG_HPP

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

namespace lens {

struct SvgSeries {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<std::pair<double, double>> points;  // (x, y)
};

namespace detail {

inline std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace detail

inline std::string render_line_chart(const std::string& title,
                                     const std::string& x_label,
                                     const std::string& y_label,
                                     const std::vector<SvgSeries>& series) {
    const double width = 640, height = 420;
    const double ml = 70, mr = 20, mt = 40, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = 0, xmax = 1, ymin = 0, ymax = 0;
    for (const SvgSeries& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (ymax == ymin) { ymax += 1.0; ymin -= 1.0; }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;
    if (xmax == xmin) xmax = xmin + 1.0;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt2(width) +
           "\" height=\"" + detail::fmt2(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::fmt2(width / 2) + "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";

    // axes
    svg += "<line x1=\"" + detail::fmt2(ml) + "\" y1=\"" + detail::fmt2(mt) +
           "\" x2=\"" + detail::fmt2(ml) + "\" y2=\"" + detail::fmt2(mt + ph) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + detail::fmt2(ml) + "\" y1=\"" + detail::fmt2(mt + ph) +
           "\" x2=\"" + detail::fmt2(ml + pw) + "\" y2=\"" + detail::fmt2(mt + ph) +
           "\" stroke=\"black\"/>\n";

    // zero baseline (the unreduced model)
    if (ymin <= 0.0 && 0.0 <= ymax) {
        svg += "<line x1=\"" + detail::fmt2(ml) + "\" y1=\"" + detail::fmt2(py(0)) +
               "\" x2=\"" + detail::fmt2(ml + pw) + "\" y2=\"" + detail::fmt2(py(0)) +
               "\" stroke=\"#888\" stroke-dasharray=\"6,4\"/>\n";
    }

    // x ticks at data fractions 0, .25, .5, .75, 1 of the range
    for (int i = 0; i <= 4; ++i) {
        const double x = xmin + (xmax - xmin) * i / 4.0;
        svg += "<line x1=\"" + detail::fmt2(px(x)) + "\" y1=\"" + detail::fmt2(mt + ph) +
               "\" x2=\"" + detail::fmt2(px(x)) + "\" y2=\"" + detail::fmt2(mt + ph + 5) +
               "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + detail::fmt2(px(x)) + "\" y=\"" + detail::fmt2(mt + ph + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::fmt_g(x) + "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double y = ymin + (ymax - ymin) * i / 4.0;
        svg += "<line x1=\"" + detail::fmt2(ml - 5) + "\" y1=\"" + detail::fmt2(py(y)) +
               "\" x2=\"" + detail::fmt2(ml) + "\" y2=\"" + detail::fmt2(py(y)) +
               "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + detail::fmt2(ml - 8) + "\" y=\"" + detail::fmt2(py(y) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::fmt_g(y) + "</text>\n";
    }

    svg += "<text x=\"" + detail::fmt2(ml + pw / 2) + "\" y=\"" + detail::fmt2(height - 10) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           x_label + "</text>\n";
    svg += "<text x=\"16\" y=\"" + detail::fmt2(mt + ph / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 16 " + detail::fmt2(mt + ph / 2) + ")\">" +
           y_label + "</text>\n";

    double legend_y = mt + 10;
    for (const SvgSeries& s : series) {
        if (s.points.empty()) continue;
        std::string pts;
        for (const auto& [x, y] : s.points) {
            if (!pts.empty()) pts += " ";
            pts += detail::fmt2(px(x)) + "," + detail::fmt2(py(y));
        }
        svg += "<polyline fill=\"none\" stroke=\"" + s.color +
               "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
        for (const auto& [x, y] : s.points)
            svg += "<circle cx=\"" + detail::fmt2(px(x)) + "\" cy=\"" + detail::fmt2(py(y)) +
                   "\" r=\"3\" fill=\"" + s.color + "\"/>\n";
        if (!s.label.empty()) {
            svg += "<line x1=\"" + detail::fmt2(ml + pw - 130) + "\" y1=\"" +
                   detail::fmt2(legend_y) + "\" x2=\"" + detail::fmt2(ml + pw - 110) +
                   "\" y2=\"" + detail::fmt2(legend_y) + "\" stroke=\"" + s.color +
                   "\" stroke-width=\"2\"/>\n";
            svg += "<text x=\"" + detail::fmt2(ml + pw - 104) + "\" y=\"" +
                   detail::fmt2(legend_y + 4) +
                   "\" font-family=\"sans-serif\" font-size=\"11\">" + s.label + "</text>\n";
            legend_y += 16;
        }
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace lens

#endif  // LENS_SVG_HPP
