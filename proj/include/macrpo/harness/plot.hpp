#pragma once

// Self-contained SVG line chart of evaluation return against iteration, one
// line per run with a shaded mean +- std band.
//
// Curves and bands are drawn inside a group whose transform maps data
// coordinates to the canvas, so every point attribute holds the original
// (iteration, value) pair and can be checked against the aggregate CSV.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "macrpo/harness/harness.hpp"

namespace macrpo {

struct PlotSeries {
  std::string label;
  std::vector<AggregateRow> rows;
};

std::string render_plot(std::span<const PlotSeries> series, const std::string& title = "Evaluation return");

// Reads each manifest's aggregate CSV and writes the chart to `path`.
void emit_plot(std::span<const RunManifest> manifests, const std::filesystem::path& path);

}  // namespace macrpo
