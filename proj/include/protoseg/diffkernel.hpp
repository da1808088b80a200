#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "protoseg/types.hpp"

namespace protoseg {

/// Whether the loss gradient flows through the prototype means (the full
/// graph) or treats the prototypes as constants.
enum class GradMode { kThroughPrototypes, kDetachedPrototypes };

GradMode parse_grad_mode(std::string_view name);
std::string_view to_string(GradMode mode);

/// dL/df with the dims of the source feature map.
struct GradientTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  double at(std::size_t y, std::size_t x, std::size_t c) const { return values[(y * width + x) * channels + c]; }
};

struct SoftDiceOptions {
  std::size_t positive_class = 1;
  double epsilon = 1e-6;
};

/// 1 - (2 sum p g + eps) / (sum p + sum g + eps) on the positive-class
/// probability channel. Throws kDimMismatch and kPreconditionViolation
/// (epsilon <= 0 or a positive class outside the map).
double soft_dice_loss(const ProbabilityMap& p, const LabelMask& g, std::size_t positive_class = 1,
                      double epsilon = 1e-6);

/// Soft Dice loss of the ProtoSeg probability map of `f` seeded by
/// `init_mask`, evaluated in extended precision.
double protoseg_loss(const FeatureMap& f, const LabelMask& init_mask, const LabelMask& g,
                     const SoftDiceOptions& options = {});

struct LossAndGradient {
  double loss = 0.0;
  GradientTensor gradient;
};

/// Exact analytic gradient of protoseg_loss with respect to every entry of f.
LossAndGradient protoseg_loss_and_gradient(const FeatureMap& f, const LabelMask& init_mask, const LabelMask& g,
                                           GradMode mode = GradMode::kThroughPrototypes,
                                           const SoftDiceOptions& options = {});

GradientTensor protoseg_backward(const FeatureMap& f, const LabelMask& init_mask, const LabelMask& g,
                                 GradMode mode = GradMode::kThroughPrototypes, const SoftDiceOptions& options = {});

/// Max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-12)
/// with central differences of size `step`, all in extended precision.
/// Throws kPreconditionViolation unless step > 0.
double finite_diff_check(const FeatureMap& f, const LabelMask& init_mask, const LabelMask& g,
                         GradMode mode = GradMode::kThroughPrototypes, double step = 1e-5,
                         const SoftDiceOptions& options = {});

}  // namespace protoseg
