#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "protoseg/types.hpp"

namespace protoseg {

/// Dice overlap of a SAM with a reference. `defined` is false only when the
/// SAM itself could not be computed (a degenerate mask upstream).
struct SaScore {
  double value = 0.0;
  bool defined = false;

  static SaScore undefined() { return {0.0, false}; }
};

struct MeanSaScore {
  double mu = 0.0;
  std::size_t unit_count = 0;
};

struct GainRecord {
  std::string image_id;
  double sa_input = 0.0;     // SA of the SAM computed on input intensities vs G
  double dice_output = 0.0;  // Dice of the network output vs G
  double d = 0.0;            // dice_output - sa_input
};

/// 2|S n G| / (|S| + |G|) for `positive_class`. Both empty gives 1.0.
SaScore sa_score(const LabelMask& s, const LabelMask& g, std::size_t positive_class = 1);

/// Mean of the defined scores; throws kEmptyInput if none is defined.
MeanSaScore mean_sa_score(std::span<const SaScore> unit_scores);
MeanSaScore mean_sa_score(std::span<const SegmentationAbilityMap> unit_sams, const LabelMask& reference,
                          std::size_t positive_class = 1);

/// SA(noisy) - SA(clean); throws kUndefined if either is undefined.
double sa_difference(const SaScore& sa_noisy, const SaScore& sa_clean);

/// ProtoSeg on the raw input intensities `x` seeded with the network output,
/// scored against the ground truth.
GainRecord separableness(const FeatureMap& x, const LabelMask& init_mask, const LabelMask& g,
                         std::string image_id = {});

/// m(d): mean gain distance. Throws kEmptyInput on an empty list.
double mean_gain(std::span<const GainRecord> records);

}  // namespace protoseg
