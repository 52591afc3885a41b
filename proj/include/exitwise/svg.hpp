#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace exitwise {

// Self-contained SVG emitters: inline styling, no external assets.

struct SvgSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
    std::string color = "#1f77b4";
    bool dashed = false;
    bool markers = true;
};

struct SvgChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool diagonal_reference = false;  // dashed y = x line
    int width = 720;
    int height = 480;
};

std::string render_line_chart(const std::vector<SvgSeries>& series,
                              const SvgChartOptions& options);

void write_line_chart(const std::filesystem::path& path,
                      const std::vector<SvgSeries>& series,
                      const SvgChartOptions& options);

// Heat map of small integer labels (depths); cell text shows the label.
struct SvgHeatmapOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<std::string> x_ticks;
    std::vector<std::string> y_ticks;
    int cell_size = 36;
};

std::string render_heatmap(const std::vector<std::vector<int>>& cells,
                           const SvgHeatmapOptions& options);

void write_heatmap(const std::filesystem::path& path,
                   const std::vector<std::vector<int>>& cells,
                   const SvgHeatmapOptions& options);

}  // namespace exitwise
