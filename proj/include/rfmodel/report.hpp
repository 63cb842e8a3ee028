#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rfmodel::report {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;  // NaN breaks the line
    std::string color = "#1f77b4";
    bool dashed = false;
    bool markers = false;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 720;
    int height = 420;
};

/// Renders a line plot. Output depends only on the input, so identical plots
/// produce identical bytes.
std::string render_svg(const Plot& plot);
void write_svg(const Plot& plot, const std::filesystem::path& path);

}  // namespace rfmodel::report
