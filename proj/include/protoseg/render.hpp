#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "protoseg/types.hpp"

namespace protoseg {

/// 8-bit gray level of `value` on the [lo, hi] scale: clamped, then
/// floor(255 * t + 0.5), so 0.5 on [0, 1] maps to 128.
std::uint8_t gray_level(double value, double lo, double hi);

/// Binary PGM (P5) bytes with a "# min=<lo> max=<hi>" comment line.
std::string encode_pgm(const RealMap& map, double lo = 0.0, double hi = 1.0);

/// Throws kNonFinite, kPreconditionViolation (hi <= lo) or kIoFailure.
void render_heatmap(const RealMap& map, const std::filesystem::path& path, double lo = 0.0, double hi = 1.0);

struct CurveSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct CurveLabels {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
};

std::string encode_svg(std::span<const CurveSeries> series, const CurveLabels& labels);

/// Standalone SVG line chart. With no points at all it throws kIoFailure and
/// writes nothing.
void render_curve(std::span<const CurveSeries> series, const std::filesystem::path& path,
                  const CurveLabels& labels = {});

}  // namespace protoseg
