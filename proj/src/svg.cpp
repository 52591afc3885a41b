#include "exitwise/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "exitwise/errors.hpp"
#include "exitwise/io_util.hpp"

namespace exitwise {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string render_line_chart(const std::vector<SvgSeries>& series,
                              const SvgChartOptions& options) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const SvgSeries& s : series) {
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    // A little headroom around the data.
    const double xpad = (xmax - xmin) * 0.05, ypad = (ymax - ymin) * 0.05;
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    const int W = options.width, H = options.height;
    const int ml = 64, mr = 24, mt = 40, mb = 48;
    const double pw = W - ml - mr, ph = H - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
        << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << escape(options.title)
        << "</text>\n";

    // Frame and ticks.
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << num(pw)
        << "\" height=\"" << num(ph)
        << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double fx = xmin + (xmax - xmin) * i / ticks;
        const double fy = ymin + (ymax - ymin) * i / ticks;
        svg << "<line x1=\"" << num(px(fx)) << "\" y1=\"" << mt + ph << "\" x2=\""
            << num(px(fx)) << "\" y2=\"" << num(mt + ph + 4)
            << "\" stroke=\"#444\"/>\n";
        svg << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(mt + ph + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"11\">"
            << tick_label(fx) << "</text>\n";
        svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << num(py(fy)) << "\" x2=\"" << ml
            << "\" y2=\"" << num(py(fy)) << "\" stroke=\"#444\"/>\n";
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << num(py(fy) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << tick_label(fy) << "</text>\n";
    }
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape(options.x_label) << "</text>\n";
    svg << "<text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">"
        << escape(options.y_label) << "</text>\n";

    if (options.diagonal_reference) {
        const double lo = std::max(xmin, ymin), hi = std::min(xmax, ymax);
        if (hi > lo) {
            svg << "<line x1=\"" << num(px(lo)) << "\" y1=\"" << num(py(lo))
                << "\" x2=\"" << num(px(hi)) << "\" y2=\"" << num(py(hi))
                << "\" stroke=\"#999\" stroke-dasharray=\"6 4\"/>\n";
        }
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const SvgSeries& s = series[si];
        const std::string color =
            s.color.empty() ? kPalette[si % 8] : s.color;
        if (s.points.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.8\"";
            if (s.dashed) svg << " stroke-dasharray=\"5 3\"";
            svg << " points=\"";
            for (const auto& [x, y] : s.points)
                svg << num(px(x)) << "," << num(py(y)) << " ";
            svg << "\"/>\n";
        }
        if (s.markers) {
            for (const auto& [x, y] : s.points)
                svg << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y))
                    << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        }
        // Legend entry.
        const double ly = mt + 14 + 16 * static_cast<double>(si);
        svg << "<line x1=\"" << ml + 10 << "\" y1=\"" << num(ly) << "\" x2=\""
            << ml + 34 << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"";
        if (s.dashed) svg << " stroke-dasharray=\"5 3\"";
        svg << "/>\n<text x=\"" << ml + 40 << "\" y=\"" << num(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.label)
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_line_chart(const std::filesystem::path& path,
                      const std::vector<SvgSeries>& series,
                      const SvgChartOptions& options) {
    write_file_atomic(path, render_line_chart(series, options));
}

std::string render_heatmap(const std::vector<std::vector<int>>& cells,
                           const SvgHeatmapOptions& options) {
    if (cells.empty() || cells.front().empty())
        throw ParameterError("heatmap needs at least one cell");
    const std::size_t rows = cells.size(), cols = cells.front().size();
    int lo = cells[0][0], hi = cells[0][0];
    for (const auto& row : cells) {
        if (row.size() != cols) throw ParameterError("heatmap rows must be uniform");
        for (int v : row) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const int cs = options.cell_size;
    const int ml = 84, mt = 48, mr = 24, mb = 64;
    const int W = ml + static_cast<int>(cols) * cs + mr;
    const int H = mt + static_cast<int>(rows) * cs + mb;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
        << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << escape(options.title)
        << "</text>\n";

    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const int v = cells[r][c];
            const double f = hi == lo ? 0.5
                                      : static_cast<double>(v - lo) /
                                            static_cast<double>(hi - lo);
            // Light blue to dark blue ramp.
            const int red = static_cast<int>(224 - 160 * f);
            const int green = static_cast<int>(236 - 150 * f);
            const int blue = 255 - static_cast<int>(65 * f);
            const int x = ml + static_cast<int>(c) * cs;
            const int y = mt + static_cast<int>(r) * cs;
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cs
                << "\" height=\"" << cs << "\" fill=\"rgb(" << red << "," << green
                << "," << blue << ")\" stroke=\"#fff\" stroke-width=\"0.5\"/>\n";
            svg << "<text x=\"" << x + cs / 2 << "\" y=\"" << y + cs / 2 + 4
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                << "font-size=\"12\" fill=\"" << (f > 0.6 ? "#fff" : "#123")
                << "\">" << v << "</text>\n";
        }
    }
    // Row/column tick labels (thinned when dense).
    const std::size_t xstep = std::max<std::size_t>(1, cols / 12);
    for (std::size_t c = 0; c < options.x_ticks.size() && c < cols; c += xstep) {
        svg << "<text x=\"" << ml + static_cast<int>(c) * cs + cs / 2 << "\" y=\""
            << mt + static_cast<int>(rows) * cs + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"10\">"
            << escape(options.x_ticks[c]) << "</text>\n";
    }
    const std::size_t ystep = std::max<std::size_t>(1, rows / 12);
    for (std::size_t r = 0; r < options.y_ticks.size() && r < rows; r += ystep) {
        svg << "<text x=\"" << ml - 8 << "\" y=\""
            << mt + static_cast<int>(r) * cs + cs / 2 + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << escape(options.y_ticks[r]) << "</text>\n";
    }
    svg << "<text x=\"" << ml + static_cast<int>(cols) * cs / 2 << "\" y=\""
        << H - 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"12\">" << escape(options.x_label) << "</text>\n";
    svg << "<text x=\"20\" y=\"" << mt + static_cast<int>(rows) * cs / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 20 " << mt + static_cast<int>(rows) * cs / 2
        << ")\">" << escape(options.y_label) << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

void write_heatmap(const std::filesystem::path& path,
                   const std::vector<std::vector<int>>& cells,
                   const SvgHeatmapOptions& options) {
    write_file_atomic(path, render_heatmap(cells, options));
}

}  // namespace exitwise
