#include "protoseg/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "protoseg/error.hpp"
#include "protoseg/report_io.hpp"

namespace protoseg {

namespace {

std::string number(double v, const char* fmt = "%.6g") {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, fmt, v);
  return buffer;
}

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
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

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

std::uint8_t gray_level(double value, double lo, double hi) {
  const double t = std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(255.0 * t + 0.5));
}

std::string encode_pgm(const RealMap& map, double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw Error(ErrorCode::kPreconditionViolation, "heatmap scale needs finite lo < hi");
  }
  if (map.values.size() != map.height * map.width || map.values.empty()) {
    throw Error(ErrorCode::kDimMismatch, "heatmap values do not match its dims");
  }
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (!std::isfinite(map.values[i])) throw Error(ErrorCode::kNonFinite, "non-finite heatmap value").with_index(i);
  }
  std::string out = "P5\n# min=" + number(lo, "%.6f") + " max=" + number(hi, "%.6f") + "\n" +
                    std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
  out.reserve(out.size() + map.values.size());
  for (double v : map.values) out += static_cast<char>(gray_level(v, lo, hi));
  return out;
}

void render_heatmap(const RealMap& map, const std::filesystem::path& path, double lo, double hi) {
  write_text(path, encode_pgm(map, lo, hi));
}

std::string encode_svg(std::span<const CurveSeries> series, const CurveLabels& labels) {
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -x_min;
  double y_min = x_min;
  double y_max = -x_min;
  std::size_t points = 0;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) throw Error(ErrorCode::kNonFinite, "non-finite curve point");
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
      ++points;
    }
  }
  if (points == 0) throw Error(ErrorCode::kIoFailure, "cannot render an empty series");
  if (x_max == x_min) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (y_max == y_min) {
    y_min -= 0.5;
    y_max += 0.5;
  }

  constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  const auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!labels.title.empty()) {
    svg += "<text x=\"" + number(kLeft + plot_w / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           escape_xml(labels.title) + "</text>\n";
  }
  svg += "<g stroke=\"black\" fill=\"none\">\n";
  svg += "<line x1=\"" + number(kLeft) + "\" y1=\"" + number(kTop + plot_h) + "\" x2=\"" + number(kLeft + plot_w) +
         "\" y2=\"" + number(kTop + plot_h) + "\"/>\n";
  svg += "<line x1=\"" + number(kLeft) + "\" y1=\"" + number(kTop) + "\" x2=\"" + number(kLeft) + "\" y2=\"" +
         number(kTop + plot_h) + "\"/>\n";
  svg += "</g>\n<g font-size=\"11\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x_min + (x_max - x_min) * t / 4.0;
    const double fy = y_min + (y_max - y_min) * t / 4.0;
    svg += "<text x=\"" + number(px(fx)) + "\" y=\"" + number(kTop + plot_h + 16) + "\" text-anchor=\"middle\">" +
           number(fx, "%.3g") + "</text>\n";
    svg += "<text x=\"" + number(kLeft - 6) + "\" y=\"" + number(py(fy) + 4) + "\" text-anchor=\"end\">" +
           number(fy, "%.3g") + "</text>\n";
  }
  svg += "</g>\n";
  svg += "<text x=\"" + number(kLeft + plot_w / 2) + "\" y=\"" + number(kHeight - 16) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + escape_xml(labels.x_label) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + number(kTop + plot_h / 2) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
         number(kTop + plot_h / 2) + ")\">" + escape_xml(labels.y_label) + "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    if (series[s].points.empty()) continue;
    const char* color = kPalette[s % std::size(kPalette)];
    std::string pts;
    for (const auto& [x, y] : series[s].points) {
      if (!pts.empty()) pts += ' ';
      pts += number(px(x)) + "," + number(py(y));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(s);
    svg += "<line x1=\"" + number(kLeft + plot_w + 12) + "\" y1=\"" + number(ly - 4) + "\" x2=\"" +
           number(kLeft + plot_w + 32) + "\" y2=\"" + number(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + number(kLeft + plot_w + 36) + "\" y=\"" + number(ly) + "\" font-size=\"11\">" +
           escape_xml(series[s].name) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void render_curve(std::span<const CurveSeries> series, const std::filesystem::path& path, const CurveLabels& labels) {
  write_text(path, encode_svg(series, labels));
}

}  // namespace protoseg
