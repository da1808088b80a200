#include "protoseg/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protoseg/error.hpp"

namespace protoseg {

namespace {

void require_positive_dims(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) {
    throw Error(ErrorCode::kPreconditionViolation,
                "dimensions must be positive, got " + std::to_string(height) + "x" + std::to_string(width));
  }
}

}  // namespace

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels)
    : height_(height), width_(width), channels_(channels) {
  require_positive_dims(height, width);
  if (channels == 0) throw Error(ErrorCode::kPreconditionViolation, "channel count must be positive");
  values_.assign(height * width * channels, 0.0f);
}

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  require_positive_dims(height, width);
  if (channels == 0) throw Error(ErrorCode::kPreconditionViolation, "channel count must be positive");
  if (values_.size() != height * width * channels) {
    throw Error(ErrorCode::kDimMismatch, "feature payload has " + std::to_string(values_.size()) +
                                             " values, expected " + std::to_string(height * width * channels));
  }
  const auto bad = std::find_if(values_.begin(), values_.end(), [](float v) { return !std::isfinite(v); });
  if (bad != values_.end()) {
    throw Error(ErrorCode::kNonFinite, "feature value at flat index " +
                                           std::to_string(std::distance(values_.begin(), bad)) + " is not finite")
        .with_index(static_cast<std::size_t>(std::distance(values_.begin(), bad)));
  }
}

LabelMask::LabelMask(std::size_t height, std::size_t width, std::size_t num_classes)
    : height_(height), width_(width), num_classes_(num_classes) {
  require_positive_dims(height, width);
  if (num_classes < 2 || num_classes > 256) {
    throw Error(ErrorCode::kPreconditionViolation, "num_classes must be in [2, 256]");
  }
  labels_.assign(height * width, 0);
}

LabelMask::LabelMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> labels, std::size_t num_classes)
    : height_(height), width_(width), num_classes_(num_classes), labels_(std::move(labels)) {
  require_positive_dims(height, width);
  if (num_classes < 2 || num_classes > 256) {
    throw Error(ErrorCode::kPreconditionViolation, "num_classes must be in [2, 256]");
  }
  if (labels_.size() != height * width) {
    throw Error(ErrorCode::kDimMismatch, "mask has " + std::to_string(labels_.size()) + " labels, expected " +
                                             std::to_string(height * width));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= num_classes) {
      throw Error(ErrorCode::kIndexOutOfRange, "label " + std::to_string(labels_[i]) + " at pixel " +
                                                   std::to_string(i) + " exceeds class count " +
                                                   std::to_string(num_classes))
          .with_index(i);
    }
  }
}

std::size_t LabelMask::count(std::size_t label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

WeightMask::WeightMask(std::size_t height, std::size_t width, std::vector<double> weights)
    : height_(height), width_(width), weights_(std::move(weights)) {
  require_positive_dims(height, width);
  if (weights_.size() != height * width) {
    throw Error(ErrorCode::kDimMismatch, "weight mask has " + std::to_string(weights_.size()) +
                                             " values, expected " + std::to_string(height * width));
  }
  for (double w : weights_) {
    if (!(w >= 0.0 && w <= 1.0)) throw Error(ErrorCode::kPreconditionViolation, "mask weights must lie in [0, 1]");
  }
}

WeightMask::WeightMask(const LabelMask& binary) : height_(binary.height()), width_(binary.width()) {
  if (binary.num_classes() != 2) throw Error(ErrorCode::kPreconditionViolation, "weight masks are binary");
  weights_.reserve(binary.pixels());
  for (auto label : binary.labels()) weights_.push_back(label == 1 ? 1.0 : 0.0);
}

LabelMask WeightMask::threshold() const {
  std::vector<std::uint8_t> labels(weights_.size());
  std::transform(weights_.begin(), weights_.end(), labels.begin(),
                 [](double w) { return static_cast<std::uint8_t>(w >= 0.5 ? 1 : 0); });
  return LabelMask(height_, width_, std::move(labels), 2);
}

}  // namespace protoseg
