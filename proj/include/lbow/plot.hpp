#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lbow {

// Minimal SVG line chart writer for the training-curve plots.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<Series>& series);

void write_svg(const std::filesystem::path& path, const std::string& svg);

}  // namespace lbow
