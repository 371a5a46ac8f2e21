// Dependency-free SVG output: line charts for force/depth overlays and a
// heatmap for confusion matrices. Layout is fixed-size, meant for reports.
#pragma once

#include <string>
#include <vector>

namespace gsn::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;

    void add(std::string label, std::vector<double> x, std::vector<double> y) {
        series.push_back({std::move(label), std::move(x), std::move(y)});
    }
    std::string render(int width = 860, int height = 540) const;
};

// labels index both axes (rows = true class, columns = predicted class).
std::string heatmap(const std::vector<std::vector<long>>& counts,
                    const std::vector<std::string>& labels,
                    const std::string& title);

void write_file(const std::string& path, const std::string& content);

} // namespace gsn::svg
