#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "protoseg/types.hpp"

namespace protoseg {

/// Desk-scale stand-in for a network's feature dumps: a blob-shaped object on
/// background, Gaussian features whose class means sit `separation` sigmas
/// apart, and a simulated network output that disagrees with the truth on a
/// fraction of the boundary pixels.
struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 1;
  double separation = 0.0;  // object mean in units of noise_sigma
  double object_fraction = 0.3;
  double noise_sigma = 1.0;
  double output_flip_fraction = 0.1;  // share of boundary pixels flipped in the output
  /// Per-channel separations; overrides `separation` when non-empty.
  std::vector<double> channel_separation;
};

struct SyntheticSample {
  FeatureMap feature;
  LabelMask truth;
  LabelMask output;
};

/// Throws kInvalidSpec on out-of-range fields.
SyntheticSample gen_synthetic(const SyntheticSpec& spec);

/// Star-shaped blob covering round(fraction * H * W) pixels (at least one
/// pixel of each class).
LabelMask synthesize_blob(std::size_t height, std::size_t width, double object_fraction, std::uint64_t seed);

/// Features N(0, sigma^2) on background and N(sep_c * sigma, sigma^2) on the
/// object, one separation per channel.
FeatureMap synthesize_features(const LabelMask& truth, std::span<const double> channel_separation, double sigma,
                               std::uint64_t seed);

/// Copy of `truth` with round(fraction * |boundary|) boundary pixels flipped;
/// never removes the last pixel of a class.
LabelMask simulate_output(const LabelMask& truth, double flip_fraction, std::uint64_t seed);

/// Nearest-neighbour resize of a label grid.
LabelMask resize_mask(const LabelMask& mask, std::size_t height, std::size_t width);

/// One image of the confidence bed: `unit_count` last-layer units sharing the
/// image's separation, a network output thresholded from their average plus
/// independent output noise, and the resulting mu and output Dice.
struct ConfidenceSample {
  std::string image_id;
  double separation = 0.0;
  double mu = 0.0;
  std::size_t unit_count = 0;
  double dice = 0.0;
};

struct ConfidenceBedSpec {
  std::uint64_t seed = 0;
  std::size_t images = 50;
  std::size_t units = 8;
  double min_separation = 0.0;
  double max_separation = 4.0;
  std::size_t height = 64;
  std::size_t width = 64;
  double object_fraction = 0.3;
};

std::vector<ConfidenceSample> make_confidence_bed(const ConfidenceBedSpec& spec, std::size_t jobs = 1);

/// Random small problem for gradient checks: N(0, 1) features, and an
/// initial mask and target that each hold both classes.
struct GradCheckCase {
  FeatureMap feature;
  LabelMask init_mask;
  LabelMask target;
};

GradCheckCase random_gradcheck_case(std::uint64_t seed, std::size_t height = 4, std::size_t width = 4,
                                    std::size_t channels = 3);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace protoseg
