#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "nbv/common.hpp"

namespace nbv {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out.push_back(c);
    }
    return out;
}

}  // namespace detail

// Self-contained line plot; deterministic text so artifact diffs are clean.
inline std::string render_line_plot(const std::string& title,
                                    const std::string& x_label,
                                    const std::string& y_label,
                                    const std::vector<PlotSeries>& series) {
    static const char* kPalette[] = {"#1b6ca8", "#d1495b", "#3a7d44",
                                     "#8e7cc3", "#e09f3e", "#444444"};
    const double width = 640, height = 420;
    const double x0 = 78, y0 = 52, x1 = 600, y1 = 352;

    double lo_x = 0, hi_x = 1, lo_y = 0, hi_y = 1;
    bool first = true;
    for (const PlotSeries& s : series) {
        if (s.x.size() != s.y.size()) throw ConfigError("plot series size mismatch");
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                lo_x = hi_x = s.x[i];
                lo_y = hi_y = s.y[i];
                first = false;
            }
            lo_x = std::min(lo_x, s.x[i]);
            hi_x = std::max(hi_x, s.x[i]);
            lo_y = std::min(lo_y, s.y[i]);
            hi_y = std::max(hi_y, s.y[i]);
        }
    }
    if (hi_x - lo_x < 1e-12) hi_x = lo_x + 1;
    if (hi_y - lo_y < 1e-12) hi_y = lo_y + 1;
    lo_y = std::min(lo_y, 0.0);  // anchor rate/error axes at zero

    const auto px = [&](double x) { return x0 + (x - lo_x) / (hi_x - lo_x) * (x1 - x0); };
    const auto py = [&](double y) { return y1 - (y - lo_y) / (hi_y - lo_y) * (y1 - y0); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           detail::svg_num(width) + "\" height=\"" + detail::svg_num(height) +
           "\" viewBox=\"0 0 " + detail::svg_num(width) + " " +
           detail::svg_num(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::svg_num((x0 + x1) / 2) +
           "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">" +
           detail::svg_escape(title) + "</text>\n";

    // Gridlines and ticks: 5 divisions each way.
    for (int i = 0; i <= 5; ++i) {
        const double fx = lo_x + (hi_x - lo_x) * i / 5.0;
        const double fy = lo_y + (hi_y - lo_y) * i / 5.0;
        out += "<line x1=\"" + detail::svg_num(px(fx)) + "\" y1=\"" +
               detail::svg_num(y0) + "\" x2=\"" + detail::svg_num(px(fx)) +
               "\" y2=\"" + detail::svg_num(y1) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out += "<line x1=\"" + detail::svg_num(x0) + "\" y1=\"" +
               detail::svg_num(py(fy)) + "\" x2=\"" + detail::svg_num(x1) +
               "\" y2=\"" + detail::svg_num(py(fy)) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out += "<text x=\"" + detail::svg_num(px(fx)) + "\" y=\"" +
               detail::svg_num(y1 + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"11\">" +
               detail::svg_num(fx) + "</text>\n";
        out += "<text x=\"" + detail::svg_num(x0 - 8) + "\" y=\"" +
               detail::svg_num(py(fy) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::svg_num(fy) + "</text>\n";
    }
    out += "<rect x=\"" + detail::svg_num(x0) + "\" y=\"" + detail::svg_num(y0) +
           "\" width=\"" + detail::svg_num(x1 - x0) + "\" height=\"" +
           detail::svg_num(y1 - y0) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
    out += "<text x=\"" + detail::svg_num((x0 + x1) / 2) + "\" y=\"" +
           detail::svg_num(height - 10) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
           detail::svg_escape(x_label) + "</text>\n";
    out += "<text x=\"18\" y=\"" + detail::svg_num((y0 + y1) / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 18 " +
           detail::svg_num((y0 + y1) / 2) + ")\">" + detail::svg_escape(y_label) +
           "</text>\n";

    for (size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % 6];
        std::string points;
        for (size_t i = 0; i < series[s].x.size(); ++i) {
            if (i) points += " ";
            points += detail::svg_num(px(series[s].x[i])) + "," +
                      detail::svg_num(py(series[s].y[i]));
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
        for (size_t i = 0; i < series[s].x.size(); ++i)
            out += "<circle cx=\"" + detail::svg_num(px(series[s].x[i])) + "\" cy=\"" +
                   detail::svg_num(py(series[s].y[i])) + "\" r=\"3\" fill=\"" +
                   color + "\"/>\n";
        const double ly = y0 + 16 + 18 * static_cast<double>(s);
        out += "<line x1=\"" + detail::svg_num(x1 - 150) + "\" y1=\"" +
               detail::svg_num(ly - 4) + "\" x2=\"" + detail::svg_num(x1 - 126) +
               "\" y2=\"" + detail::svg_num(ly - 4) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + detail::svg_num(x1 - 120) + "\" y=\"" +
               detail::svg_num(ly) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" +
               detail::svg_escape(series[s].label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << content;
}

}  // namespace nbv
