#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tfa {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Deterministic static SVG line chart (axes, ticks, legend). Re-running
/// over identical inputs produces an identical file.
void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series);

/// Scans a report directory for metrics (*.jsonl) and report JSON files and
/// emits one SVG per plottable artifact. Returns the number of files
/// written; an empty directory yields zero files and is not an error.
int emit_plots(const std::filesystem::path& reports_dir, const std::filesystem::path& out_dir);

}  // namespace tfa
