#include "protoseg/metrics.hpp"

#include <string>

#include "protoseg/core.hpp"
#include "protoseg/error.hpp"

namespace protoseg {

SaScore sa_score(const LabelMask& s, const LabelMask& g, std::size_t positive_class) {
  if (s.dims() != g.dims()) throw Error(ErrorCode::kDimMismatch, "SAM and reference dims differ");
  const auto sl = s.labels();
  const auto gl = g.labels();
  std::size_t both = 0;
  std::size_t in_s = 0;
  std::size_t in_g = 0;
  for (std::size_t i = 0; i < sl.size(); ++i) {
    const bool a = sl[i] == positive_class;
    const bool b = gl[i] == positive_class;
    in_s += a;
    in_g += b;
    both += a && b;
  }
  if (in_s + in_g == 0) return {1.0, true};
  return {static_cast<double>(2 * both) / static_cast<double>(in_s + in_g), true};
}

MeanSaScore mean_sa_score(std::span<const SaScore> unit_scores) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : unit_scores) {
    if (!s.defined) continue;
    total += s.value;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "no defined unit score to average");
  return {total / static_cast<double>(n), n};
}

MeanSaScore mean_sa_score(std::span<const SegmentationAbilityMap> unit_sams, const LabelMask& reference,
                          std::size_t positive_class) {
  std::vector<SaScore> scores;
  scores.reserve(unit_sams.size());
  for (const auto& sam : unit_sams) scores.push_back(sa_score(sam.mask, reference, positive_class));
  return mean_sa_score(scores);
}

double sa_difference(const SaScore& sa_noisy, const SaScore& sa_clean) {
  if (!sa_noisy.defined || !sa_clean.defined) {
    throw Error(ErrorCode::kUndefined, "SA difference needs two defined scores");
  }
  return sa_noisy.value - sa_clean.value;
}

GainRecord separableness(const FeatureMap& x, const LabelMask& init_mask, const LabelMask& g, std::string image_id) {
  const auto result = protoseg_resampled(x, init_mask);
  GainRecord record;
  record.image_id = std::move(image_id);
  record.sa_input = sa_score(result.sam.mask, g).value;
  record.dice_output = sa_score(init_mask, g).value;
  record.d = record.dice_output - record.sa_input;
  return record;
}

double mean_gain(std::span<const GainRecord> records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "m(d) of an empty record list");
  double total = 0.0;
  for (const auto& r : records) total += r.d;
  return total / static_cast<double>(records.size());
}

}  // namespace protoseg
