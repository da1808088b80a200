#include "protoseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "protoseg/core.hpp"
#include "protoseg/error.hpp"
#include "protoseg/metrics.hpp"
#include "protoseg/parallel.hpp"

namespace protoseg {

namespace {

constexpr std::uint64_t kMaskStream = 1;
constexpr std::uint64_t kFeatureStream = 2;
constexpr std::uint64_t kOutputStream = 3;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidSpec, what);
}

void validate(const SyntheticSpec& spec) {
  require(spec.height >= 1 && spec.width >= 1, "height and width must be >= 1");
  require(spec.height * spec.width >= 2, "need at least two pixels for two classes");
  require(spec.channels >= 1, "channels must be >= 1");
  require(std::isfinite(spec.separation) && spec.separation >= 0.0, "separation must be finite and >= 0");
  require(spec.object_fraction > 0.0 && spec.object_fraction < 1.0, "object_fraction must lie in (0, 1)");
  require(std::isfinite(spec.noise_sigma) && spec.noise_sigma > 0.0, "noise_sigma must be positive");
  require(spec.output_flip_fraction >= 0.0 && spec.output_flip_fraction <= 1.0,
          "output_flip_fraction must lie in [0, 1]");
  require(spec.channel_separation.empty() || spec.channel_separation.size() == spec.channels,
          "channel_separation needs one entry per channel");
  for (double s : spec.channel_separation) require(std::isfinite(s) && s >= 0.0, "channel separations must be >= 0");
}

}  // namespace

LabelMask synthesize_blob(std::size_t height, std::size_t width, double object_fraction, std::uint64_t seed) {
  const std::size_t n = height * width;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double cy = (0.35 + 0.3 * unit(rng)) * static_cast<double>(height);
  const double cx = (0.35 + 0.3 * unit(rng)) * static_cast<double>(width);
  const double aspect = 0.75 + 0.5 * unit(rng);
  double amplitude[3];
  double phase[3];
  for (int j = 0; j < 3; ++j) {
    amplitude[j] = 0.12 * unit(rng);
    phase[j] = 2.0 * std::numbers::pi * unit(rng);
  }

  // Normalized radius relative to the star-shaped outline; the object is the
  // round(fraction * n) pixels with the smallest value.
  std::vector<double> rho(n);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dy = (static_cast<double>(y) + 0.5 - cy) * aspect;
      const double dx = (static_cast<double>(x) + 0.5 - cx) / aspect;
      const double theta = std::atan2(dy, dx);
      double outline = 1.0;
      for (int j = 0; j < 3; ++j) outline += amplitude[j] * std::cos((j + 2) * theta + phase[j]);
      rho[y * width + x] = std::hypot(dy, dx) / outline;
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rho[a] < rho[b]; });
  const auto wanted = static_cast<std::size_t>(std::llround(object_fraction * static_cast<double>(n)));
  const std::size_t object_pixels = std::clamp<std::size_t>(wanted, 1, n - 1);

  std::vector<std::uint8_t> labels(n, 0);
  for (std::size_t i = 0; i < object_pixels; ++i) labels[order[i]] = 1;
  return LabelMask(height, width, std::move(labels), 2);
}

FeatureMap synthesize_features(const LabelMask& truth, std::span<const double> channel_separation, double sigma,
                               std::uint64_t seed) {
  const std::size_t channels = channel_separation.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<float> values(truth.pixels() * channels);
  const auto labels = truth.labels();
  for (std::size_t i = 0; i < truth.pixels(); ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double mean = labels[i] == 1 ? channel_separation[c] * sigma : 0.0;
      values[i * channels + c] = static_cast<float>(mean + sigma * noise(rng));
    }
  }
  return FeatureMap(truth.height(), truth.width(), channels, std::move(values));
}

LabelMask simulate_output(const LabelMask& truth, double flip_fraction, std::uint64_t seed) {
  const std::size_t h = truth.height();
  const std::size_t w = truth.width();
  std::vector<std::size_t> boundary;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto label = truth.at(y, x);
      const bool edge = (y > 0 && truth.at(y - 1, x) != label) || (y + 1 < h && truth.at(y + 1, x) != label) ||
                        (x > 0 && truth.at(y, x - 1) != label) || (x + 1 < w && truth.at(y, x + 1) != label);
      if (edge) boundary.push_back(y * w + x);
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(boundary.begin(), boundary.end(), rng);
  const auto flips = static_cast<std::size_t>(std::llround(flip_fraction * static_cast<double>(boundary.size())));

  std::vector<std::uint8_t> labels(truth.labels().begin(), truth.labels().end());
  std::size_t object = truth.count(1);
  std::size_t background = truth.pixels() - object;
  for (std::size_t j = 0; j < flips; ++j) {
    auto& label = labels[boundary[j]];
    if (label == 1) {
      if (object == 1) continue;
      label = 0;
      --object;
      ++background;
    } else {
      if (background == 1) continue;
      label = 1;
      ++object;
      --background;
    }
  }
  return LabelMask(h, w, std::move(labels), 2);
}

LabelMask resize_mask(const LabelMask& mask, std::size_t height, std::size_t width) {
  const auto rows = detail::axis_taps(mask.height(), height, Interpolation::kNearest);
  const auto cols = detail::axis_taps(mask.width(), width, Interpolation::kNearest);
  LabelMask out(height, width, mask.num_classes());
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) out.set(y, x, mask.at(rows[y].lo, cols[x].lo));
  }
  return out;
}

SyntheticSample gen_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  auto truth = synthesize_blob(spec.height, spec.width, spec.object_fraction, mix_seed(spec.seed, kMaskStream));
  std::vector<double> separation = spec.channel_separation;
  if (separation.empty()) separation.assign(spec.channels, spec.separation);
  auto feature = synthesize_features(truth, separation, spec.noise_sigma, mix_seed(spec.seed, kFeatureStream));
  auto output = simulate_output(truth, spec.output_flip_fraction, mix_seed(spec.seed, kOutputStream));
  return {std::move(feature), std::move(truth), std::move(output)};
}

std::vector<ConfidenceSample> make_confidence_bed(const ConfidenceBedSpec& spec, std::size_t jobs) {
  if (spec.images == 0 || spec.units == 0) throw Error(ErrorCode::kInvalidSpec, "bed needs images and units");
  if (!(spec.min_separation >= 0.0 && spec.max_separation >= spec.min_separation)) {
    throw Error(ErrorCode::kInvalidSpec, "separation range must be non-negative and ordered");
  }
  std::vector<ConfidenceSample> samples(spec.images);
  parallel_for(spec.images, jobs, [&](std::size_t j) {
    const std::uint64_t image_seed = mix_seed(spec.seed, j);
    std::mt19937_64 rng(mix_seed(image_seed, 0xbed));
    const double separation = std::uniform_real_distribution<double>(spec.min_separation, spec.max_separation)(rng);

    SyntheticSpec unit_spec;
    unit_spec.seed = image_seed;
    unit_spec.height = spec.height;
    unit_spec.width = spec.width;
    unit_spec.channels = spec.units;
    unit_spec.separation = separation;
    unit_spec.object_fraction = spec.object_fraction;
    const auto sample = gen_synthetic(unit_spec);

    // Network output: threshold of the averaged units plus output-layer noise,
    // i.e. y = sum w_i f_i + b with w_i = 1/N and b = -separation/2.
    std::normal_distribution<double> output_noise(0.0, 1.0);
    std::vector<std::uint8_t> labels(sample.truth.pixels());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto fv = sample.feature.pixel(i);
      double y = 0.0;
      for (float v : fv) y += v;
      y = y / static_cast<double>(fv.size()) + output_noise(rng);
      labels[i] = y > 0.5 * separation ? 1 : 0;
    }
    const LabelMask output(spec.height, spec.width, std::move(labels), 2);

    std::vector<SaScore> unit_scores;
    for (std::size_t u = 0; u < spec.units; ++u) {
      try {
        const auto result = protoseg(extract_unit(sample.feature, u), output);
        unit_scores.push_back(sa_score(result.sam.mask, output));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyClass) throw;
        unit_scores.push_back(SaScore::undefined());
      }
    }
    auto& out = samples[j];
    out.image_id = "synthetic_" + std::to_string(j);
    out.separation = separation;
    out.dice = sa_score(output, sample.truth).value;
    try {
      const auto mean = mean_sa_score(unit_scores);
      out.mu = mean.mu;
      out.unit_count = mean.unit_count;
    } catch (const Error&) {
      out.mu = 0.0;
      out.unit_count = 0;
    }
  });
  return samples;
}

GradCheckCase random_gradcheck_case(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t channels) {
  const std::size_t n = height * width;
  if (n < 2 || channels == 0) throw Error(ErrorCode::kInvalidSpec, "gradient check case needs >= 2 pixels and >= 1 channel");
  std::mt19937_64 rng(mix_seed(seed, 0x67726164));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> values(n * channels);
  for (auto& v : values) v = static_cast<float>(normal(rng));
  const auto random_mask = [&] {
    std::bernoulli_distribution coin(0.5);
    std::vector<std::uint8_t> labels(n);
    for (auto& l : labels) l = coin(rng) ? 1 : 0;
    // force both classes
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    labels[a] = 0;
    labels[b] = 1;
    return LabelMask(height, width, std::move(labels));
  };
  auto init = random_mask();
  auto target = random_mask();
  return {FeatureMap(height, width, channels, std::move(values)), std::move(init), std::move(target)};
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::kDimMismatch, "spearman inputs differ in length");
  if (xs.size() < 2) throw Error(ErrorCode::kEmptyInput, "spearman needs at least two points");
  const auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double average = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[order[t]] = average;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(xs);
  const auto ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace protoseg
