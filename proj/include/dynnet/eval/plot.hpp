#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dynnet::eval {

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
  bool scatter = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

// Minimal standalone SVG line/scatter chart. Non-finite points are skipped.
std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);
void write_svg(const std::filesystem::path& path, const PlotSpec& spec,
               const std::vector<PlotSeries>& series);

}  // namespace dynnet::eval
