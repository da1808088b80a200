#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "protoseg/diffkernel.hpp"
#include "protoseg/types.hpp"

namespace protoseg {

enum class Dtype { kFloat32, kUint8 };

std::size_t dtype_size(Dtype dtype) noexcept;

/// A row-major tensor as stored in a dump file: shape plus raw little-endian
/// payload. The on-disk layout is the .npy v1.0 format: the magic
/// "\x93NUMPY", version bytes, a 16-bit header length, and an ASCII dict
/// {'descr': '<f4' | '|u1', 'fortran_order': False, 'shape': (...), }
/// padded with spaces and a newline so the payload starts on a 64-byte
/// boundary.
struct TensorDump {
  Dtype dtype = Dtype::kFloat32;
  std::vector<std::size_t> shape;
  std::vector<std::byte> data;

  std::size_t element_count() const;
  std::vector<float> floats() const;
  std::vector<std::uint8_t> bytes() const;

  static TensorDump from_floats(std::vector<std::size_t> shape, std::span<const float> values);
  static TensorDump from_bytes(std::vector<std::size_t> shape, std::span<const std::uint8_t> values);

  friend bool operator==(const TensorDump&, const TensorDump&) = default;
};

/// Parse a complete dump image. Header problems throw kMalformedHeader,
/// kUnsupportedDtype or kShapeOverflow and a short payload throws
/// kTruncatedPayload; Error::index() holds the offending byte offset.
TensorDump parse_tensor(std::span<const std::byte> file);
std::vector<std::byte> serialize_tensor(const TensorDump& tensor);

TensorDump read_tensor(const std::filesystem::path& path);
/// Throws kIoFailure if the file cannot be written.
void write_tensor(const std::filesystem::path& path, const TensorDump& tensor);

// Conversions between dumps and domain types. Feature dumps are float32
// (H, W, C) or (H, W); masks are uint8 (H, W). A float32 mask is accepted
// and thresholded at 0.5.
FeatureMap to_feature_map(const TensorDump& tensor);
LabelMask to_label_mask(const TensorDump& tensor, std::size_t num_classes = 2);
WeightMask to_weight_mask(const TensorDump& tensor);
TensorDump to_dump(const FeatureMap& f);
TensorDump to_dump(const LabelMask& mask);
TensorDump to_dump(const GradientTensor& gradient);
TensorDump to_dump(const RealMap& map);
TensorDump to_dump(const ProbabilityMap& p);

}  // namespace protoseg
