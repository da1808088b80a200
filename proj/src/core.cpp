#include "protoseg/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "protoseg/error.hpp"

namespace protoseg {

Interpolation parse_interpolation(std::string_view name) {
  if (name == "nearest") return Interpolation::kNearest;
  if (name == "bilinear") return Interpolation::kBilinear;
  throw Error(ErrorCode::kPreconditionViolation, "unknown interpolation '" + std::string(name) + "'");
}

std::string_view to_string(Interpolation mode) {
  return mode == Interpolation::kNearest ? "nearest" : "bilinear";
}

namespace {

void require_same_dims(Dims a, Dims b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kDimMismatch, std::string(what) + ": " + std::to_string(a.height) + "x" +
                                             std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                                             std::to_string(b.width));
  }
}

[[noreturn]] void throw_empty_class(std::size_t k) {
  throw Error(ErrorCode::kEmptyClass, "no pixel carries label " + std::to_string(k)).with_index(k);
}

// Weighted class sums -> centers. `weight_sums[k]` is the denominator.
PrototypeSet finish_prototypes(std::size_t num_classes, std::size_t channels, const std::vector<long double>& sums,
                               const std::vector<long double>& weight_sums, std::vector<std::size_t> counts) {
  PrototypeSet protos;
  protos.num_classes = num_classes;
  protos.channels = channels;
  protos.member_counts = std::move(counts);
  protos.centers.resize(num_classes * channels);
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (protos.member_counts[k] == 0 || weight_sums[k] <= 0.0L) throw_empty_class(k);
    for (std::size_t c = 0; c < channels; ++c) {
      protos.centers[k * channels + c] = static_cast<double>(sums[k * channels + c] / weight_sums[k]);
    }
  }
  return protos;
}

// Per-pixel class weights (pixels x K) and threshold counts for either mask kind.
struct ClassWeights {
  std::size_t num_classes = 0;
  std::vector<double> weights;
  std::vector<std::size_t> counts;
};

ClassWeights class_weights(const LabelMask& mask) {
  ClassWeights cw;
  cw.num_classes = mask.num_classes();
  cw.weights.assign(mask.pixels() * cw.num_classes, 0.0);
  cw.counts.assign(cw.num_classes, 0);
  const auto labels = mask.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cw.weights[i * cw.num_classes + labels[i]] = 1.0;
    ++cw.counts[labels[i]];
  }
  return cw;
}

ClassWeights class_weights(const WeightMask& mask) {
  ClassWeights cw;
  cw.num_classes = 2;
  const auto w = mask.weights();
  cw.weights.resize(w.size() * 2);
  cw.counts.assign(2, 0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    cw.weights[2 * i] = 1.0 - w[i];
    cw.weights[2 * i + 1] = w[i];
    ++cw.counts[w[i] >= 0.5 ? 1 : 0];
  }
  return cw;
}

SegmentationAbilityMap argmax_labels(const ProbabilityMap& p) {
  std::vector<std::uint8_t> labels(p.pixels());
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const auto probs = p.pixel(i);
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k) {
      if (probs[k] > probs[best]) best = k;
    }
    labels[i] = static_cast<std::uint8_t>(best);
  }
  return {LabelMask(p.height, p.width, std::move(labels), p.num_classes), std::nullopt, std::nullopt};
}

ProtoSegResult assemble(const FeatureMap& f, PrototypeSet protos, ProbabilityMap probs) {
  auto sam = hard_segment(probs);
  sam.source_layer = f.layer_id;
  sam.source_unit = f.unit_id;
  return {std::move(protos), std::move(probs), std::move(sam)};
}

ProtoSegResult resampled_impl(const FeatureMap& f, Dims target, const ClassWeights& cw, Interpolation mode) {
  const std::size_t h = f.height();
  const std::size_t w = f.width();
  const std::size_t channels = f.channels();
  const std::size_t K = cw.num_classes;
  const auto rows = detail::axis_taps(h, target.height, mode);
  const auto cols = detail::axis_taps(w, target.width, mode);

  // Transpose of the interpolation operator applied to each class weight map.
  std::vector<double> back(h * w * K, 0.0);
  std::vector<long double> weight_sums(K, 0.0L);
  for (std::size_t y = 0; y < target.height; ++y) {
    const auto& ry = rows[y];
    for (std::size_t x = 0; x < target.width; ++x) {
      const auto& rx = cols[x];
      const double* wk = cw.weights.data() + (y * target.width + x) * K;
      const double taps[4] = {(1.0 - ry.hi_weight) * (1.0 - rx.hi_weight), (1.0 - ry.hi_weight) * rx.hi_weight,
                              ry.hi_weight * (1.0 - rx.hi_weight), ry.hi_weight * rx.hi_weight};
      const std::size_t src[4] = {ry.lo * w + rx.lo, ry.lo * w + rx.hi, ry.hi * w + rx.lo, ry.hi * w + rx.hi};
      for (std::size_t k = 0; k < K; ++k) {
        if (wk[k] == 0.0) continue;
        weight_sums[k] += wk[k];
        for (int t = 0; t < 4; ++t) back[src[t] * K + k] += wk[k] * taps[t];
      }
    }
  }

  std::vector<long double> sums(K * channels, 0.0L);
  for (std::size_t s = 0; s < h * w; ++s) {
    const auto fv = f.pixel(s);
    for (std::size_t k = 0; k < K; ++k) {
      const long double m = back[s * K + k];
      if (m == 0.0L) continue;
      long double* acc = sums.data() + k * channels;
      for (std::size_t c = 0; c < channels; ++c) acc[c] += m * fv[c];
    }
  }
  auto protos = finish_prototypes(K, channels, sums, weight_sums, cw.counts);

  // Reduced logits 2 f.c_k - |c_k|^2 at source resolution.
  std::vector<double> norms(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (double v : protos.center(k)) norms[k] += v * v;
  }
  std::vector<double> reduced(h * w * K);
  for (std::size_t s = 0; s < h * w; ++s) {
    const auto fv = f.pixel(s);
    for (std::size_t k = 0; k < K; ++k) {
      const auto ck = protos.center(k);
      double dot = 0.0;
      for (std::size_t c = 0; c < channels; ++c) dot += static_cast<double>(fv[c]) * ck[c];
      reduced[s * K + k] = 2.0 * dot - norms[k];
    }
  }

  ProbabilityMap probs{target.height, target.width, K, std::vector<double>(target.pixels() * K)};
  for (std::size_t y = 0; y < target.height; ++y) {
    const auto& ry = rows[y];
    for (std::size_t x = 0; x < target.width; ++x) {
      const auto& rx = cols[x];
      const double taps[4] = {(1.0 - ry.hi_weight) * (1.0 - rx.hi_weight), (1.0 - ry.hi_weight) * rx.hi_weight,
                              ry.hi_weight * (1.0 - rx.hi_weight), ry.hi_weight * rx.hi_weight};
      const std::size_t src[4] = {ry.lo * w + rx.lo, ry.lo * w + rx.hi, ry.hi * w + rx.lo, ry.hi * w + rx.hi};
      std::span<double> logits(probs.probs.data() + (y * target.width + x) * K, K);
      for (std::size_t k = 0; k < K; ++k) {
        double z = 0.0;
        for (int t = 0; t < 4; ++t) z += taps[t] * reduced[src[t] * K + k];
        logits[k] = z;
      }
      detail::softmax_inplace(logits);
    }
  }
  return assemble(f, std::move(protos), std::move(probs));
}

}  // namespace

namespace detail {

std::vector<AxisTap> axis_taps(std::size_t src, std::size_t dst, Interpolation mode) {
  std::vector<AxisTap> taps(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    if (mode == Interpolation::kNearest) {
      // floor((i + 0.5) * src / dst) in exact integer arithmetic
      const std::size_t s = std::min((2 * i + 1) * src / (2 * dst), src - 1);
      taps[i] = {s, s, 0.0};
      continue;
    }
    const double pos = std::max((static_cast<double>(i) + 0.5) * static_cast<double>(src) / static_cast<double>(dst) - 0.5, 0.0);
    const auto lo = std::min(static_cast<std::size_t>(pos), src - 1);
    const std::size_t hi = lo + 1 < src ? lo + 1 : lo;
    taps[i] = {lo, hi, hi == lo ? 0.0 : pos - static_cast<double>(lo)};
  }
  return taps;
}

void softmax_inplace(std::span<double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(top)) {
    // Every class infinitely far: no preference.
    std::fill(logits.begin(), logits.end(), 1.0 / static_cast<double>(logits.size()));
    return;
  }
  double total = 0.0;
  for (double& z : logits) {
    z = std::exp(z - top);
    total += z;
  }
  for (double& z : logits) z /= total;
}

}  // namespace detail

PrototypeSet compute_prototypes(const FeatureMap& f, const LabelMask& mask) {
  require_same_dims(f.dims(), mask.dims(), "feature and mask dims differ");
  const std::size_t K = mask.num_classes();
  const std::size_t channels = f.channels();
  std::vector<long double> sums(K * channels, 0.0L);
  std::vector<std::size_t> counts(K, 0);
  const auto labels = mask.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto fv = f.pixel(i);
    long double* acc = sums.data() + labels[i] * channels;
    for (std::size_t c = 0; c < channels; ++c) acc[c] += fv[c];
    ++counts[labels[i]];
  }
  std::vector<long double> denominators(counts.begin(), counts.end());
  return finish_prototypes(K, channels, sums, denominators, std::move(counts));
}

PrototypeSet compute_prototypes(const FeatureMap& f, const WeightMask& mask) {
  require_same_dims(f.dims(), mask.dims(), "feature and mask dims differ");
  const std::size_t channels = f.channels();
  std::vector<long double> sums(2 * channels, 0.0L);
  std::vector<long double> weight_sums(2, 0.0L);
  std::vector<std::size_t> counts(2, 0);
  const auto weights = mask.weights();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const long double object = weights[i];
    const long double background = 1.0L - object;
    const auto fv = f.pixel(i);
    for (std::size_t c = 0; c < channels; ++c) {
      sums[c] += background * fv[c];
      sums[channels + c] += object * fv[c];
    }
    weight_sums[0] += background;
    weight_sums[1] += object;
    ++counts[weights[i] >= 0.5 ? 1 : 0];
  }
  return finish_prototypes(2, channels, sums, weight_sums, std::move(counts));
}

ProbabilityMap probability_map(const FeatureMap& f, const PrototypeSet& protos) {
  if (f.channels() != protos.channels) {
    throw Error(ErrorCode::kDimMismatch, "feature has " + std::to_string(f.channels()) + " channels, prototypes have " +
                                             std::to_string(protos.channels));
  }
  const std::size_t K = protos.num_classes;
  ProbabilityMap p{f.height(), f.width(), K, std::vector<double>(f.pixels() * K)};
  for (std::size_t i = 0; i < f.pixels(); ++i) {
    const auto fv = f.pixel(i);
    std::span<double> logits(p.probs.data() + i * K, K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto ck = protos.center(k);
      double dist = 0.0;
      for (std::size_t c = 0; c < fv.size(); ++c) {
        const double d = static_cast<double>(fv[c]) - ck[c];
        dist += d * d;
      }
      logits[k] = -dist;
    }
    detail::softmax_inplace(logits);
  }
  return p;
}

SegmentationAbilityMap hard_segment(const ProbabilityMap& p) { return argmax_labels(p); }

ProtoSegResult protoseg(const FeatureMap& f, const LabelMask& init_mask) {
  auto protos = compute_prototypes(f, init_mask);
  auto probs = probability_map(f, protos);
  return assemble(f, std::move(protos), std::move(probs));
}

ProtoSegResult protoseg(const FeatureMap& f, const WeightMask& init_mask) {
  auto protos = compute_prototypes(f, init_mask);
  auto probs = probability_map(f, protos);
  return assemble(f, std::move(protos), std::move(probs));
}

ProtoSegResult protoseg_resampled(const FeatureMap& f, const LabelMask& init_mask, Interpolation mode) {
  if (f.dims() == init_mask.dims()) return protoseg(f, init_mask);
  return resampled_impl(f, init_mask.dims(), class_weights(init_mask), mode);
}

ProtoSegResult protoseg_resampled(const FeatureMap& f, const WeightMask& init_mask, Interpolation mode) {
  if (f.dims() == init_mask.dims()) return protoseg(f, init_mask);
  return resampled_impl(f, init_mask.dims(), class_weights(init_mask), mode);
}

FeatureMap upsample(const FeatureMap& f, std::size_t target_h, std::size_t target_w, Interpolation mode) {
  if (target_h == 0 || target_w == 0) throw Error(ErrorCode::kPreconditionViolation, "target dims must be positive");
  const auto rows = detail::axis_taps(f.height(), target_h, mode);
  const auto cols = detail::axis_taps(f.width(), target_w, mode);
  const std::size_t channels = f.channels();
  FeatureMap out(target_h, target_w, channels);
  for (std::size_t y = 0; y < target_h; ++y) {
    const auto& ry = rows[y];
    for (std::size_t x = 0; x < target_w; ++x) {
      const auto& rx = cols[x];
      const double w00 = (1.0 - ry.hi_weight) * (1.0 - rx.hi_weight);
      const double w01 = (1.0 - ry.hi_weight) * rx.hi_weight;
      const double w10 = ry.hi_weight * (1.0 - rx.hi_weight);
      const double w11 = ry.hi_weight * rx.hi_weight;
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = w00 * f.at(ry.lo, rx.lo, c) + w01 * f.at(ry.lo, rx.hi, c) + w10 * f.at(ry.hi, rx.lo, c) +
                         w11 * f.at(ry.hi, rx.hi, c);
        out.at(y, x, c) = static_cast<float>(v);
      }
    }
  }
  out.layer_id = f.layer_id;
  out.unit_id = f.unit_id;
  return out;
}

FeatureMap extract_unit(const FeatureMap& f, std::size_t c) {
  if (c >= f.channels()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "unit " + std::to_string(c) + " outside [0, " + std::to_string(f.channels()) + ")")
        .with_index(c);
  }
  std::vector<float> slice(f.pixels());
  for (std::size_t i = 0; i < f.pixels(); ++i) slice[i] = f.pixel(i)[c];
  FeatureMap out(f.height(), f.width(), 1, std::move(slice));
  out.layer_id = f.layer_id;
  out.unit_id = static_cast<int>(c);
  return out;
}

}  // namespace protoseg
