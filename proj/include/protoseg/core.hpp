#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "protoseg/types.hpp"

namespace protoseg {

enum class Interpolation { kNearest, kBilinear };

Interpolation parse_interpolation(std::string_view name);
std::string_view to_string(Interpolation mode);

/// Class means of `f` over the pixels of each label.
/// Throws kDimMismatch if the spatial dims differ and kEmptyClass (index = k)
/// if some class k has no pixel.
PrototypeSet compute_prototypes(const FeatureMap& f, const LabelMask& mask);

/// Binary prototypes from a soft object mask: the object center is the
/// B-weighted mean and the background center the (1 - B)-weighted mean.
/// Membership counts (and kEmptyClass) use the 0.5 threshold.
PrototypeSet compute_prototypes(const FeatureMap& f, const WeightMask& mask);

/// Per-pixel softmax over classes of the negative squared Euclidean distance
/// to each prototype. Saturates to one-hot, never NaN.
ProbabilityMap probability_map(const FeatureMap& f, const PrototypeSet& protos);

/// Per-pixel argmax. Ties go to the lowest class index, so a binary tie is
/// background.
SegmentationAbilityMap hard_segment(const ProbabilityMap& p);

struct ProtoSegResult {
  PrototypeSet prototypes;
  ProbabilityMap probabilities;
  SegmentationAbilityMap sam;
};

ProtoSegResult protoseg(const FeatureMap& f, const LabelMask& init_mask);
ProtoSegResult protoseg(const FeatureMap& f, const WeightMask& init_mask);

/// Same result as protoseg(upsample(f, mask dims, mode), mask) without
/// materializing the upsampled tensor. Interpolation is linear, so prototype
/// sums are taken against the back-projected mask and the class logits
/// (minus the class-independent |f|^2 term) are interpolated instead of the
/// features. Cost is O(h*w*C + H*W*K) for an h x w source and H x W mask.
ProtoSegResult protoseg_resampled(const FeatureMap& f, const LabelMask& init_mask,
                                  Interpolation mode = Interpolation::kBilinear);
ProtoSegResult protoseg_resampled(const FeatureMap& f, const WeightMask& init_mask,
                                  Interpolation mode = Interpolation::kBilinear);

/// Resize to target_h x target_w. Bilinear follows the align-corners=false
/// convention; nearest picks source index floor((i + 0.5) * src / dst).
FeatureMap upsample(const FeatureMap& f, std::size_t target_h, std::size_t target_w,
                    Interpolation mode = Interpolation::kBilinear);

/// H x W x 1 slice of channel `c`, tagged with unit_id = c.
FeatureMap extract_unit(const FeatureMap& f, std::size_t c);

namespace detail {

/// Two-tap interpolation stencil along one axis.
struct AxisTap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double hi_weight = 0.0;  // weight of `lo` is 1 - hi_weight
};

std::vector<AxisTap> axis_taps(std::size_t src, std::size_t dst, Interpolation mode);

/// Numerically stable in-place softmax over one pixel's logits.
void softmax_inplace(std::span<double> logits);

}  // namespace detail

}  // namespace protoseg
