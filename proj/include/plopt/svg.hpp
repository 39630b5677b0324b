#pragma once

// Static SVG log-log plots: one polyline per loss curve, dashed overlays for
// fitted power laws, vertical threshold markers, decade ticks. Output is a
// pure function of the inputs (coordinates rounded to 1/100 px).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "plopt/util.hpp"

namespace plopt::svg {

struct Series {
    std::string label;
    std::vector<double> x, y;
    std::string color;
    bool dashed = false;
};

struct VLine {
    double x = 0.0;
    std::string label;
};

namespace detail {

inline std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f6fb2", "#d1462f", "#2e8540", "#8c5cb4",
                                   "#c28e0e", "#11808f", "#b0368c", "#5c6670"};
    return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

} // namespace detail

class LogLogPlot {
public:
    LogLogPlot(std::string title, std::string xlabel, std::string ylabel)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

    void add_series(Series s) {
        if (s.color.empty()) s.color = detail::palette(series_.size());
        series_.push_back(std::move(s));
    }

    void add_vline(double x, std::string label) { vlines_.push_back({x, std::move(label)}); }

    // Log-log means only finite positive points participate; a series whose
    // curve touches zero simply ends there on the plot.
    void write(std::ostream& out) const {
        double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
        bool any = false;
        for (const auto& s : series_)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!usable(s.x[i], s.y[i])) continue;
                if (!any) {
                    xmin = xmax = s.x[i];
                    ymin = ymax = s.y[i];
                    any = true;
                } else {
                    xmin = std::min(xmin, s.x[i]);
                    xmax = std::max(xmax, s.x[i]);
                    ymin = std::min(ymin, s.y[i]);
                    ymax = std::max(ymax, s.y[i]);
                }
            }
        if (!any) throw data_error("svg: no positive finite points to plot");
        for (const auto& v : vlines_)
            if (v.x > 0.0 && std::isfinite(v.x)) {
                xmin = std::min(xmin, v.x);
                xmax = std::max(xmax, v.x);
            }
        double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
        double ly0 = std::log10(ymin), ly1 = std::log10(ymax);
        if (lx1 - lx0 < 0.5) { lx0 -= 0.25; lx1 += 0.25; }
        if (ly1 - ly0 < 0.5) { ly0 -= 0.25; ly1 += 0.25; }
        const double padx = 0.03 * (lx1 - lx0), pady = 0.03 * (ly1 - ly0);
        lx0 -= padx; lx1 += padx;
        ly0 -= pady; ly1 += pady;

        const double W = 840, H = 560, ml = 74, mr = 170, mt = 44, mb = 56;
        const double pw = W - ml - mr, ph = H - mt - mb;
        auto X = [&](double x) { return ml + (std::log10(x) - lx0) / (lx1 - lx0) * pw; };
        auto Y = [&](double y) { return mt + (ly1 - std::log10(y)) / (ly1 - ly0) * ph; };

        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
            << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
        out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
        out << "<text x=\"" << detail::px(ml + pw / 2) << "\" y=\"24\" font-family=\"sans-serif\""
            << " font-size=\"16\" text-anchor=\"middle\">" << detail::escape(title_) << "</text>\n";

        // decade grid and tick labels
        for (int e = static_cast<int>(std::ceil(lx0)); e <= static_cast<int>(std::floor(lx1)); ++e) {
            const double x = X(std::pow(10.0, e));
            out << "<line x1=\"" << detail::px(x) << "\" y1=\"" << detail::px(mt) << "\" x2=\""
                << detail::px(x) << "\" y2=\"" << detail::px(mt + ph)
                << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
            out << "<text x=\"" << detail::px(x) << "\" y=\"" << detail::px(mt + ph + 20)
                << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">10<tspan"
                << " baseline-shift=\"super\" font-size=\"9\">" << e << "</tspan></text>\n";
        }
        for (int e = static_cast<int>(std::ceil(ly0)); e <= static_cast<int>(std::floor(ly1)); ++e) {
            const double y = Y(std::pow(10.0, e));
            out << "<line x1=\"" << detail::px(ml) << "\" y1=\"" << detail::px(y) << "\" x2=\""
                << detail::px(ml + pw) << "\" y2=\"" << detail::px(y)
                << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
            out << "<text x=\"" << detail::px(ml - 8) << "\" y=\"" << detail::px(y + 4)
                << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">10<tspan"
                << " baseline-shift=\"super\" font-size=\"9\">" << e << "</tspan></text>\n";
        }
        out << "<rect x=\"" << detail::px(ml) << "\" y=\"" << detail::px(mt) << "\" width=\""
            << detail::px(pw) << "\" height=\"" << detail::px(ph)
            << "\" fill=\"none\" stroke=\"#333333\"/>\n";

        for (const auto& v : vlines_) {
            if (!(v.x > 0.0) || !std::isfinite(v.x)) continue;
            const double lx = std::log10(v.x);
            if (lx < lx0 || lx > lx1) continue;
            const double x = X(v.x);
            out << "<line x1=\"" << detail::px(x) << "\" y1=\"" << detail::px(mt) << "\" x2=\""
                << detail::px(x) << "\" y2=\"" << detail::px(mt + ph)
                << "\" stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"2,4\"/>\n";
            out << "<text x=\"" << detail::px(x + 4) << "\" y=\"" << detail::px(mt + 14)
                << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#666666\">"
                << detail::escape(v.label) << "</text>\n";
        }

        for (const auto& s : series_) {
            // split at unusable points so log gaps break the line
            std::vector<std::pair<double, double>> seg;
            auto flush = [&] {
                if (seg.size() < 2) { seg.clear(); return; }
                out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
                if (s.dashed) out << " stroke-dasharray=\"7,4\"";
                out << " points=\"";
                for (std::size_t i = 0; i < seg.size(); ++i) {
                    if (i) out << ' ';
                    out << detail::px(seg[i].first) << ',' << detail::px(seg[i].second);
                }
                out << "\"/>\n";
                seg.clear();
            };
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!usable(s.x[i], s.y[i])) {
                    flush();
                    continue;
                }
                seg.emplace_back(X(s.x[i]), Y(s.y[i]));
            }
            flush();
        }

        // legend
        double ly = mt + 10;
        for (const auto& s : series_) {
            out << "<line x1=\"" << detail::px(ml + pw + 12) << "\" y1=\"" << detail::px(ly)
                << "\" x2=\"" << detail::px(ml + pw + 40) << "\" y2=\"" << detail::px(ly)
                << "\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
            if (s.dashed) out << " stroke-dasharray=\"7,4\"";
            out << "/>\n";
            out << "<text x=\"" << detail::px(ml + pw + 46) << "\" y=\"" << detail::px(ly + 4)
                << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::escape(s.label)
                << "</text>\n";
            ly += 18;
        }

        out << "<text x=\"" << detail::px(ml + pw / 2) << "\" y=\"" << detail::px(H - 12)
            << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
            << detail::escape(xlabel_) << "</text>\n";
        out << "<text x=\"18\" y=\"" << detail::px(mt + ph / 2)
            << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\""
            << " transform=\"rotate(-90 18 " << detail::px(mt + ph / 2) << ")\">"
            << detail::escape(ylabel_) << "</text>\n";
        out << "</svg>\n";
        if (!out) throw io_error("svg: stream failure");
    }

private:
    static bool usable(double x, double y) {
        return x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y);
    }

    std::string title_, xlabel_, ylabel_;
    std::vector<Series> series_;
    std::vector<VLine> vlines_;
};

} // namespace plopt::svg
