// Minimal SVG line plots for sweep and robustness curves.

#pragma once

#include <string>
#include <vector>

namespace collossl::plot {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series);

}  // namespace collossl::plot
