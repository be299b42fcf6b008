// Copyright 2026 The metalic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/// Static SVG line plots: one polyline per series over x = 0, 1, ..., with axes, end-point tick
/// labels and a legend. The output depends only on the inputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace metalic {

struct Series {
    std::string name;
    std::vector<double> values;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string svg_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string svg_escape(const std::string& s) {
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

}  // namespace detail

/// Non-finite values are skipped when computing the y range and break nothing else.
inline void write_line_svg(std::ostream& os, const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<Series>& series) {
    constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    std::size_t nmax = 0;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : series) {
        nmax = std::max(nmax, s.values.size());
        for (double v : s.values) {
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi == lo) lo -= 0.5, hi += 0.5;
    const double xmax = nmax > 1 ? static_cast<double>(nmax - 1) : 1.0;
    auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
    auto py = [&](double y) { return H - B - (H - T - B) * (y - lo) / (hi - lo); };
    using detail::svg_num;

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       << detail::svg_escape(title) << "</text>\n";
    os << "<polyline fill=\"none\" stroke=\"black\" points=\"" << L << ',' << T << ' ' << L << ',' << H - B << ' '
       << W - R << ',' << H - B << "\"/>\n";
    auto text = [&](double x, double y, const char* anchor, const std::string& s) {
        os << "<text x=\"" << svg_num(x) << "\" y=\"" << svg_num(y) << "\" text-anchor=\"" << anchor
           << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::svg_escape(s) << "</text>\n";
    };
    text(L, H - B + 16, "middle", "0");
    text(W - R, H - B + 16, "middle", detail::svg_label(xmax));
    text(L - 6, H - B, "end", detail::svg_label(lo));
    text(L - 6, T + 4, "end", detail::svg_label(hi));
    text((L + W - R) / 2, H - 12, "middle", xlabel);
    os << "<text transform=\"translate(16," << svg_num((T + H - B) / 2)
       << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << detail::svg_escape(ylabel) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = colors[k % std::size(colors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < series[k].values.size(); ++i) {
            const double v = series[k].values[i];
            if (!std::isfinite(v)) continue;
            os << (first ? "" : " ") << svg_num(px(static_cast<double>(i))) << ',' << svg_num(py(v));
            first = false;
        }
        os << "\"/>\n";
        const double ly = T + 14 + 16 * static_cast<double>(k);
        os << "<line x1=\"" << L + 10 << "\" y1=\"" << svg_num(ly - 4) << "\" x2=\"" << L + 30 << "\" y2=\""
           << svg_num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        text(L + 36, ly, "start", series[k].name);
    }
    os << "</svg>\n";
}

}  // namespace metalic
