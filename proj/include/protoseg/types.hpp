#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace protoseg {

struct Dims {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t pixels() const noexcept { return height * width; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// H x W x C feature tensor, row-major with the channel index fastest.
/// Values are stored in single precision (the on-disk dump precision);
/// every computation over them accumulates in double or wider.
class FeatureMap {
 public:
  FeatureMap() = default;
  /// Zero-filled map. Throws kPreconditionViolation on a zero dimension.
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels);
  /// Takes ownership of `values`; throws kDimMismatch on a size mismatch and
  /// kNonFinite if any value is NaN or infinite.
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  Dims dims() const noexcept { return {height_, width_}; }
  std::size_t pixels() const noexcept { return height_ * width_; }

  float at(std::size_t y, std::size_t x, std::size_t c) const { return values_[(y * width_ + x) * channels_ + c]; }
  float& at(std::size_t y, std::size_t x, std::size_t c) { return values_[(y * width_ + x) * channels_ + c]; }

  /// Feature vector of pixel `i` (row-major pixel index).
  std::span<const float> pixel(std::size_t i) const { return {values_.data() + i * channels_, channels_}; }
  std::span<float> pixel(std::size_t i) { return {values_.data() + i * channels_, channels_}; }

  std::span<const float> values() const noexcept { return values_; }
  std::span<float> values() noexcept { return values_; }

  std::optional<int> layer_id;
  std::optional<int> unit_id;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> values_;
};

/// H x W integer label grid with K >= 2 classes.
class LabelMask {
 public:
  LabelMask() = default;
  /// All-background mask.
  LabelMask(std::size_t height, std::size_t width, std::size_t num_classes = 2);
  /// Throws kIndexOutOfRange if any label is >= num_classes.
  LabelMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> labels, std::size_t num_classes = 2);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  Dims dims() const noexcept { return {height_, width_}; }
  std::size_t pixels() const noexcept { return labels_.size(); }
  std::size_t num_classes() const noexcept { return num_classes_; }

  std::uint8_t at(std::size_t y, std::size_t x) const { return labels_[y * width_ + x]; }
  /// Caller keeps the value below num_classes().
  void set(std::size_t y, std::size_t x, std::uint8_t label) { labels_[y * width_ + x] = label; }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }

  /// Number of pixels carrying `label`.
  std::size_t count(std::size_t label) const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t num_classes_ = 2;
  std::vector<std::uint8_t> labels_;
};

/// Binary soft mask with object weights in [0, 1]; background weight is 1 - w.
class WeightMask {
 public:
  WeightMask() = default;
  /// Throws kPreconditionViolation if a weight is outside [0, 1] or not finite.
  WeightMask(std::size_t height, std::size_t width, std::vector<double> weights);
  explicit WeightMask(const LabelMask& binary);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  Dims dims() const noexcept { return {height_, width_}; }
  std::span<const double> weights() const noexcept { return weights_; }

  /// Hard mask from the 0.5 threshold (w >= 0.5 is object).
  LabelMask threshold() const;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> weights_;
};

/// Per-class mean feature vectors.
struct PrototypeSet {
  std::size_t num_classes = 0;
  std::size_t channels = 0;
  std::vector<double> centers;  // num_classes x channels
  std::vector<std::size_t> member_counts;

  std::span<const double> center(std::size_t k) const { return {centers.data() + k * channels, channels}; }
};

/// H x W x K per-pixel class probabilities.
struct ProbabilityMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 0;
  std::vector<double> probs;

  Dims dims() const noexcept { return {height, width}; }
  std::size_t pixels() const noexcept { return height * width; }
  double at(std::size_t pixel, std::size_t k) const { return probs[pixel * num_classes + k]; }
  std::span<const double> pixel(std::size_t i) const { return {probs.data() + i * num_classes, num_classes}; }
};

struct SegmentationAbilityMap {
  LabelMask mask;
  std::optional<int> source_layer;
  std::optional<int> source_unit;
};

/// Dense real-valued H x W map, e.g. a unit heatmap.
struct RealMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

}  // namespace protoseg
