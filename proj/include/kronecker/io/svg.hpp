#pragma once

// Minimal standalone SVG line plots (800 x 600, axes, ticks, legend).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "kronecker/error.hpp"

namespace kronecker::io {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct PlotStyle {
    std::string title;
    std::string x_label = "t";
    std::string y_label;
    int width = 800;
    int height = 600;
};

namespace detail {

inline std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

inline std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Round step (1, 2 or 5 times a power of ten) giving about `count` ticks.
inline double nice_step(double span, int count) {
    const double raw = span / count;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
}

}  // namespace detail

inline std::string plot_svg(const std::vector<Series>& series, const PlotStyle& style = {}) {
    bool any = false;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            any = true;
            x0 = std::min(x0, x), x1 = std::max(x1, x);
            y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
    }
    if (!any) throw error(errc::empty_plot, "nothing to plot");
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12 * std::max(1.0, std::abs(y0))) {
        const double pad = std::max(0.5, std::abs(y0) * 0.1);
        y0 -= pad, y1 += pad;
    }

    const double left = 80, right = 170, top = 50, bottom = 60;
    const double pw = style.width - left - right, ph = style.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(style.width) + "\" height=\"" +
           std::to_string(style.height) + "\" viewBox=\"0 0 " + std::to_string(style.width) + " " +
           std::to_string(style.height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!style.title.empty())
        out += "<text x=\"" + detail::fmt(left + pw / 2) + "\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">" +
               detail::escape_xml(style.title) + "</text>\n";
    out += "<g stroke=\"black\" stroke-width=\"1\">\n";
    out += "<line x1=\"" + detail::fmt(left) + "\" y1=\"" + detail::fmt(top + ph) + "\" x2=\"" + detail::fmt(left + pw) +
           "\" y2=\"" + detail::fmt(top + ph) + "\"/>\n";
    out += "<line x1=\"" + detail::fmt(left) + "\" y1=\"" + detail::fmt(top) + "\" x2=\"" + detail::fmt(left) +
           "\" y2=\"" + detail::fmt(top + ph) + "\"/>\n";
    out += "</g>\n<g font-size=\"11\" font-family=\"sans-serif\">\n";
    const double xs = detail::nice_step(x1 - x0, 6), ys = detail::nice_step(y1 - y0, 6);
    for (double v = std::ceil(x0 / xs) * xs; v <= x1 + 1e-9 * xs; v += xs) {
        out += "<line x1=\"" + detail::fmt(px(v)) + "\" y1=\"" + detail::fmt(top + ph) + "\" x2=\"" +
               detail::fmt(px(v)) + "\" y2=\"" + detail::fmt(top + ph + 5) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + detail::fmt(px(v)) + "\" y=\"" + detail::fmt(top + ph + 18) +
               "\" text-anchor=\"middle\">" + detail::tick_label(v) + "</text>\n";
    }
    for (double v = std::ceil(y0 / ys) * ys; v <= y1 + 1e-9 * ys; v += ys) {
        out += "<line x1=\"" + detail::fmt(left - 5) + "\" y1=\"" + detail::fmt(py(v)) + "\" x2=\"" +
               detail::fmt(left) + "\" y2=\"" + detail::fmt(py(v)) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + detail::fmt(left - 8) + "\" y=\"" + detail::fmt(py(v) + 4) +
               "\" text-anchor=\"end\">" + detail::tick_label(v) + "</text>\n";
    }
    out += "<text x=\"" + detail::fmt(left + pw / 2) + "\" y=\"" + detail::fmt(style.height - 15.0) +
           "\" text-anchor=\"middle\">" + detail::escape_xml(style.x_label) + "</text>\n";
    if (!style.y_label.empty())
        out += "<text x=\"20\" y=\"" + detail::fmt(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
               detail::fmt(top + ph / 2) + ")\">" + detail::escape_xml(style.y_label) + "</text>\n";
    out += "</g>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = palette[k % std::size(palette)];
        std::string pts;
        for (const auto& [x, y] : series[k].points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (!pts.empty()) pts += ' ';
            pts += detail::fmt(px(x)) + "," + detail::fmt(py(y));
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
               "\"/>\n";
        const double ly = top + 10 + 18.0 * static_cast<double>(k);
        out += "<line x1=\"" + detail::fmt(left + pw + 15) + "\" y1=\"" + detail::fmt(ly) + "\" x2=\"" +
               detail::fmt(left + pw + 40) + "\" y2=\"" + detail::fmt(ly) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + detail::fmt(left + pw + 45) + "\" y=\"" + detail::fmt(ly + 4) +
               "\" font-size=\"12\" font-family=\"sans-serif\">" + detail::escape_xml(series[k].label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace kronecker::io
