#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pullback {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartLabels {
    std::string title;
    std::string x_label;
    std::string y_label;
};

// Self-contained SVG documents. Output depends only on the arguments; numbers
// are printed with fixed precision. Non-finite points are dropped, and a chart
// with nothing left to draw still gets its axes.
std::string line_chart_svg(const ChartLabels& labels, const std::vector<Series>& series, bool log_x = false);
std::string histogram_svg(const ChartLabels& labels, std::span<const double> values, std::size_t bins = 30);

// Equal-width bin counts over [min, max] of the finite values; the top edge
// falls into the last bin.
std::vector<std::size_t> histogram_counts(std::span<const double> values, std::size_t bins, double& lo, double& hi);

}  // namespace pullback
