#include "macrpo/harness/plot.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "macrpo/errors.hpp"
#include "macrpo/nn/checkpoint.hpp"

namespace macrpo {

namespace {

constexpr double kWidth = 820, kHeight = 500;
constexpr double kLeft = 80, kRight = 200, kTop = 50, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string point(double x, double y) { return nn::format_double(x) + "," + nn::format_double(y); }

}  // namespace

std::string render_plot(std::span<const PlotSeries> series, const std::string& title) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  std::size_t points = 0;
  for (const PlotSeries& s : series) {
    for (const AggregateRow& r : s.rows) {
      x0 = std::min(x0, static_cast<double>(r.iteration));
      x1 = std::max(x1, static_cast<double>(r.iteration));
      y0 = std::min(y0, r.mean - r.std);
      y1 = std::max(y1, r.mean + r.std);
      ++points;
    }
  }
  if (points == 0) throw ContractError("emit_plot: nothing to plot");
  if (x1 - x0 < 1.0) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-9) {
    y0 -= 1.0;
    y1 += 1.0;
  } else {
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const double sx = pw / (x1 - x0);
  const double sy = ph / (y1 - y0);
  auto px = [&](double x) { return kLeft + (x - x0) * sx; };
  auto py = [&](double y) { return kTop + ph - (y - y0) * sy; };

  std::string svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight);
  svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, 28,
                     escape(title));

  // Axes and ticks.
  svg += fmt::format("<g class=\"axes\" stroke=\"#444\" fill=\"none\">\n");
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/>\n", kLeft, kTop + ph, kLeft + pw);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\"/>\n", kLeft, kTop, kTop + ph);
  svg += "</g>\n<g class=\"ticks\" fill=\"#222\">\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0;
    const double yv = y0 + (y1 - y0) * k / 5.0;
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:.4g}</text>\n", px(xv), kTop + ph + 18,
                       xv);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.4g}</text>\n", kLeft - 6, py(yv) + 4, yv);
    svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#eee\"/>\n", kLeft,
                       py(yv), kLeft + pw);
  }
  svg += "</g>\n";
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">iteration</text>\n", kLeft + pw / 2,
                     kHeight - 15);
  svg += fmt::format(
      "<text x=\"18\" y=\"{0:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0:.2f})\">mean evaluation "
      "return</text>\n",
      kTop + ph / 2);

  // Data layer: point coordinates are (iteration, value).
  svg += fmt::format("<g class=\"data\" transform=\"matrix({} 0 0 {} {} {})\">\n", nn::format_double(sx),
                     nn::format_double(-sy), nn::format_double(kLeft - x0 * sx), nn::format_double(kTop + ph + y0 * sy));
  for (std::size_t k = 0; k < series.size(); ++k) {
    const PlotSeries& s = series[k];
    if (s.rows.empty()) continue;
    const char* color = kPalette[k % std::size(kPalette)];
    std::string band, line;
    for (const AggregateRow& r : s.rows) band += point(static_cast<double>(r.iteration), r.mean + r.std) + " ";
    for (auto it = s.rows.rbegin(); it != s.rows.rend(); ++it) {
      band += point(static_cast<double>(it->iteration), it->mean - it->std) + " ";
    }
    for (const AggregateRow& r : s.rows) line += point(static_cast<double>(r.iteration), r.mean) + " ";
    band.pop_back();
    line.pop_back();
    svg += fmt::format(
        "<polygon class=\"band\" data-series=\"{}\" points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
        k, band, color);
    svg += fmt::format(
        "<polyline class=\"mean\" data-series=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" "
        "vector-effect=\"non-scaling-stroke\"/>\n",
        k, line, color);
  }
  svg += "</g>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const PlotSeries& s = series[k];
    if (s.rows.size() != 1) continue;
    const AggregateRow& r = s.rows.front();
    svg += fmt::format(
        "<circle class=\"marker\" data-series=\"{}\" data-x=\"{}\" data-y=\"{}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" "
        "fill=\"{}\"/>\n",
        k, r.iteration, nn::format_double(r.mean), px(static_cast<double>(r.iteration)), py(r.mean),
        kPalette[k % std::size(kPalette)]);
  }

  svg += "<g class=\"legend-box\">\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = kTop + 10 + 22.0 * static_cast<double>(k);
    const double x = kLeft + pw + 20;
    svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"14\" height=\"10\" fill=\"{}\"/>\n", x, y - 9,
                       kPalette[k % std::size(kPalette)]);
    svg += fmt::format("<text class=\"legend\" data-series=\"{}\" x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", k, x + 20, y,
                       escape(series[k].label));
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

void emit_plot(std::span<const RunManifest> manifests, const std::filesystem::path& path) {
  std::vector<PlotSeries> series;
  for (const RunManifest& m : manifests) series.push_back({m.label, read_aggregate(m.aggregate_csv)});
  const std::string svg = render_plot(series);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << svg;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace macrpo
