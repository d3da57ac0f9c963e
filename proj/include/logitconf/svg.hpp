#pragma once

// Reliability-diagram rendering: accuracy bars over confidence bins with
// the identity diagonal. Output bytes are a pure function of the rows
// (fixed-precision formatting), so diagrams are golden-file testable.

#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>

#include "logitconf/metrics.hpp"

namespace logitconf {

namespace detail {

inline void svg_append(std::string& s, const char* fmt, double a, double b,
                       double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
    s += buf;
}

} // namespace detail

inline std::string render_reliability_svg(std::span<const BinStats> rows) {
    // 60px margins around a 360x360 plot area; y axis points up.
    const double x0 = 60.0, y0 = 420.0, side = 360.0;
    auto px = [&](double v) { return x0 + v * side; };
    auto py = [&](double v) { return y0 - v * side; };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" "
         "viewBox=\"0 0 480 480\">\n";
    s += "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n";

    // bars first so the grid and diagonal stay visible on top
    for (const auto& r : rows) {
        const double x = px(r.lower);
        const double w = (r.upper - r.lower) * side;
        const double h = r.accuracy * side;
        detail::svg_append(s,
            "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
            "fill=\"#4878a8\" fill-opacity=\"0.75\" stroke=\"#2b4a68\" stroke-width=\"1\"/>\n",
            x, py(r.accuracy), w, h);
        // tick at the bin's mean confidence
        detail::svg_append(s,
            "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
            "stroke=\"#b03030\" stroke-width=\"2\"/>\n",
            px(r.mean_confidence), py(r.accuracy) - 5.0,
            px(r.mean_confidence), py(r.accuracy) + 5.0);
    }

    for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        detail::svg_append(s,
            "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
            px(v), y0, px(v), y0 + 6.0);
        detail::svg_append(s,
            "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
            x0 - 6.0, py(v), x0, py(v));
        detail::svg_append(s,
            "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">",
            px(v), y0 + 20.0);
        char label[16];
        std::snprintf(label, sizeof(label), "%.1f", v);
        s += label;
        s += "</text>\n";
        detail::svg_append(s,
            "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"end\">",
            x0 - 10.0, py(v) + 4.0);
        s += label;
        s += "</text>\n";
    }

    detail::svg_append(s,
        "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
        x0, y0, x0 + side, y0);
    detail::svg_append(s,
        "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
        x0, y0, x0, y0 - side);
    detail::svg_append(s,
        "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
        "stroke=\"#888888\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n",
        px(0.0), py(0.0), px(1.0), py(1.0));

    s += "<text x=\"240\" y=\"460\" font-size=\"14\" text-anchor=\"middle\">confidence</text>\n";
    s += "<text x=\"18\" y=\"240\" font-size=\"14\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 240)\">accuracy</text>\n";
    s += "</svg>\n";
    return s;
}

inline void write_reliability_svg(const std::string& path, std::span<const BinStats> rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const std::string s = render_reliability_svg(rows);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace logitconf
