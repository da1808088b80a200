#pragma once

// Independent reference implementations and random generators for tests.
// Nothing here calls into the library's numerics.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "protoseg/types.hpp"

namespace testing_support {

using protoseg::FeatureMap;
using protoseg::LabelMask;

inline FeatureMap random_features(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t c,
                                  double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<float> v(h * w * c);
  for (auto& x : v) x = static_cast<float>(normal(rng));
  return FeatureMap(h, w, c, std::move(v));
}

/// Random binary mask with both classes present.
inline LabelMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  std::vector<std::uint8_t> labels(h * w);
  for (auto& l : labels) l = coin(rng) ? 1 : 0;
  std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
  const auto a = pick(rng);
  auto b = pick(rng);
  while (b == a) b = pick(rng);
  labels[a] = 0;
  labels[b] = 1;
  return LabelMask(h, w, std::move(labels));
}

/// Random binary mask, possibly all one class.
inline LabelMask any_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p) {
  std::bernoulli_distribution coin(p);
  std::vector<std::uint8_t> labels(h * w);
  for (auto& l : labels) l = coin(rng) ? 1 : 0;
  return LabelMask(h, w, std::move(labels));
}

inline FeatureMap mask_as_feature(const LabelMask& m) {
  std::vector<float> v(m.labels().begin(), m.labels().end());
  return FeatureMap(m.height(), m.width(), 1, std::move(v));
}

/// Nearest-prototype labelling by explicit loops in long double.
inline LabelMask naive_sam(const FeatureMap& f, const LabelMask& mask) {
  const std::size_t n = f.height() * f.width();
  const std::size_t c = f.channels();
  const std::size_t k = mask.num_classes();
  std::vector<long double> sums(k * c, 0.0L);
  std::vector<long double> counts(k, 0.0L);
  for (std::size_t y = 0; y < f.height(); ++y) {
    for (std::size_t x = 0; x < f.width(); ++x) {
      const auto label = mask.at(y, x);
      counts[label] += 1.0L;
      for (std::size_t ch = 0; ch < c; ++ch) sums[label * c + ch] += f.at(y, x, ch);
    }
  }
  std::vector<std::uint8_t> out(n);
  for (std::size_t y = 0; y < f.height(); ++y) {
    for (std::size_t x = 0; x < f.width(); ++x) {
      std::size_t best = 0;
      long double best_d = 0.0L;
      for (std::size_t cls = 0; cls < k; ++cls) {
        long double d = 0.0L;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const long double diff = f.at(y, x, ch) - sums[cls * c + ch] / counts[cls];
          d += diff * diff;
        }
        if (cls == 0 || d < best_d) {
          best = cls;
          best_d = d;
        }
      }
      out[y * f.width() + x] = static_cast<std::uint8_t>(best);
    }
  }
  return LabelMask(f.height(), f.width(), std::move(out), k);
}

/// 2TP / (2TP + FP + FN) from integer counts; 1 when both masks are empty.
inline double brute_dice(const LabelMask& s, const LabelMask& g, std::size_t cls = 1) {
  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t y = 0; y < s.height(); ++y) {
    for (std::size_t x = 0; x < s.width(); ++x) {
      const bool a = s.at(y, x) == cls;
      const bool b = g.at(y, x) == cls;
      tp += a && b;
      fp += a && !b;
      fn += !a && b;
    }
  }
  const long long den = 2 * tp + fp + fn;
  return den == 0 ? 1.0 : static_cast<double>(2 * tp) / static_cast<double>(den);
}

/// Boundary b in [1, n) with the largest scores[b-1] - scores[b], smallest b on ties.
inline std::size_t exhaustive_split(const std::vector<double>& scores) {
  double widest = 0.0;
  for (std::size_t b = 1; b < scores.size(); ++b) widest = std::max(widest, scores[b - 1] - scores[b]);
  for (std::size_t b = 1; b < scores.size(); ++b) {
    if (scores[b - 1] - scores[b] == widest) return b;
  }
  return 1;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("protoseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::FILE* fp = std::fopen(p.string().c_str(), "rb");
  if (fp == nullptr) return {};
  std::string data;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, fp)) > 0) data.append(buf, n);
  std::fclose(fp);
  return data;
}

}  // namespace testing_support
