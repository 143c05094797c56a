#pragma once

// Result tables, CSV serialization and static SVG log-log plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "subdiff/errors.hpp"

namespace subdiff {

/// A numeric table with frozen column names and a units line. Missing
/// values are NaN and serialize as empty cells.
struct Table {
    std::string title;
    std::string units;  // emitted as a "# units:" comment
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> notes;  // extra "# " comment lines after the header

    void add_row(std::vector<double> r) {
        if (r.size() != columns.size()) throw InvalidInput("row width does not match the table schema");
        rows.push_back(std::move(r));
    }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw InvalidInput("no column named '" + name + "'");
    }

    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline std::string format_number(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const Table& t) {
    os << "# " << t.title << "\n";
    os << "# units: " << t.units << "\n";
    for (const auto& n : t.notes) os << "# " << n << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_number(r[i]);
        os << "\n";
    }
}

inline std::string to_csv(const Table& t) {
    std::ostringstream os;
    write_csv(os, t);
    return os.str();
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
    std::string label;
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    bool dashed = false;
    bool markers = true;
};

struct LogLogPlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    bool log_x = true;
    bool log_y = true;
};

namespace svg_detail {

inline std::string escape(const std::string& s) {
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

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace svg_detail

inline void write_svg(std::ostream& os, const LogLogPlot& p) {
    using svg_detail::num;
    constexpr double W = 720, H = 480, L = 80, R = 180, T = 40, B = 60;
    auto tx = [&](double v) { return p.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return p.log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!p.log_x || x > 0) && (!p.log_y || y > 0);
    };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.04 * (x1 - x0), pady = 0.06 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
    auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num((W - R + L) / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
       << svg_detail::escape(p.title) << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";

    // Ticks at decades for log axes, at 5 even steps otherwise.
    auto ticks = [](double a, double b, bool log) {
        std::vector<double> out;
        if (log) {
            for (double e = std::ceil(a); e <= std::floor(b); e += 1.0) out.push_back(std::pow(10.0, e));
            if (out.size() < 2)
                for (double e = std::floor(a * 2) / 2; e <= b; e += 0.5)
                    if (e >= a) out.push_back(std::pow(10.0, e));
        } else {
            for (int i = 0; i <= 5; ++i) out.push_back(a + (b - a) * i / 5.0);
        }
        return out;
    };
    for (double v : ticks(x0, x1, p.log_x)) {
        const double x = px(v);
        os << "<line x1=\"" << num(x) << "\" y1=\"" << H - B << "\" x2=\"" << num(x) << "\" y2=\"" << T
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << num(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
           << svg_detail::tick_label(v) << "</text>\n";
    }
    for (double v : ticks(y0, y1, p.log_y)) {
        const double y = py(v);
        os << "<line x1=\"" << L << "\" y1=\"" << num(y) << "\" x2=\"" << W - R << "\" y2=\"" << num(y)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
           << svg_detail::tick_label(v) << "</text>\n";
    }
    os << "<text x=\"" << num((W - R + L) / 2) << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">"
       << svg_detail::escape(p.x_label) << "</text>\n";
    os << "<text x=\"18\" y=\"" << num((H - B + T) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << num((H - B + T) / 2) << ")\">" << svg_detail::escape(p.y_label) << "</text>\n";

    double ly = T + 10;
    for (const auto& s : p.series) {
        std::string pts;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
        }
        if (!pts.empty()) pts.pop_back();
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\""
           << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"" << pts << "\"/>\n";
        if (s.markers)
            for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
                if (usable(s.x[i], s.y[i]))
                    os << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"3\" fill=\""
                       << s.color << "\"/>\n";
        os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << num(ly) << "\" x2=\"" << W - R + 36 << "\" y2=\""
           << num(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
           << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
        os << "<text x=\"" << W - R + 42 << "\" y=\"" << num(ly + 4) << "\">" << svg_detail::escape(s.label)
           << "</text>\n";
        ly += 18;
    }
    os << "</svg>\n";
}

inline std::string to_svg(const LogLogPlot& p) {
    std::ostringstream os;
    write_svg(os, p);
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace subdiff
