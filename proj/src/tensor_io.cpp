#include "protoseg/tensor_io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string_view>

#include "protoseg/error.hpp"

namespace protoseg {

static_assert(std::endian::native == std::endian::little, "tensor dumps assume a little-endian host");

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr std::size_t kAlignment = 64;

[[noreturn]] void fail(ErrorCode code, std::size_t offset, const std::string& what) {
  throw Error(code, what + " (byte offset " + std::to_string(offset) + ")").with_index(offset);
}

bool checked_product(std::span<const std::size_t> shape, std::size_t item_size, std::size_t& bytes) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (__builtin_mul_overflow(n, d, &n)) return false;
  }
  return !__builtin_mul_overflow(n, item_size, &bytes);
}

// Cursor over the Python-literal header dict.
class HeaderParser {
 public:
  HeaderParser(std::string_view text, std::size_t base) : text_(text), base_(base) {}

  std::size_t offset() const { return base_ + pos_; }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char ch) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ch) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char ch) {
    if (!consume(ch)) fail(ErrorCode::kMalformedHeader, offset(), std::string("expected '") + ch + "' in header");
  }

  std::string string_literal() {
    skip_space();
    if (pos_ >= text_.size() || (text_[pos_] != '\'' && text_[pos_] != '"')) {
      fail(ErrorCode::kMalformedHeader, offset(), "expected a quoted string in header");
    }
    const char quote = text_[pos_++];
    const auto end = text_.find(quote, pos_);
    if (end == std::string_view::npos) fail(ErrorCode::kMalformedHeader, offset(), "unterminated string in header");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  bool boolean_literal() {
    skip_space();
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    fail(ErrorCode::kMalformedHeader, offset(), "expected True or False in header");
  }

  std::vector<std::size_t> shape_tuple() {
    expect('(');
    std::vector<std::size_t> dims;
    while (!consume(')')) {
      skip_space();
      const std::size_t start = pos_;
      std::size_t value = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        const auto digit = static_cast<std::size_t>(text_[pos_] - '0');
        if (__builtin_mul_overflow(value, std::size_t{10}, &value) ||
            __builtin_add_overflow(value, digit, &value)) {
          fail(ErrorCode::kShapeOverflow, base_ + start, "shape entry does not fit in 64 bits");
        }
        ++pos_;
      }
      if (pos_ == start) fail(ErrorCode::kMalformedHeader, offset(), "expected a non-negative integer in shape");
      if (pos_ < text_.size() && text_[pos_] == 'L') ++pos_;
      dims.push_back(value);
      if (!consume(',')) {
        expect(')');
        break;
      }
    }
    return dims;
  }

  // skips a literal of an unrecognised key up to the next top-level ',' or '}'
  void skip_value() {
    skip_space();
    const std::size_t start = pos_;
    int depth = 0;
    while (pos_ < text_.size()) {
      const char ch = text_[pos_];
      if (ch == '\'' || ch == '"') {
        const auto end = text_.find(ch, pos_ + 1);
        if (end == std::string_view::npos) fail(ErrorCode::kMalformedHeader, offset(), "unterminated string in header");
        pos_ = end + 1;
        continue;
      }
      if (ch == '(' || ch == '[' || ch == '{') ++depth;
      if (ch == ')' || ch == ']' || ch == '}') {
        if (depth == 0) break;
        --depth;
      }
      if (ch == ',' && depth == 0) break;
      ++pos_;
    }
    if (pos_ == start || depth != 0) fail(ErrorCode::kMalformedHeader, base_ + start, "malformed header value");
  }

 private:
  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

std::uint32_t read_le(std::span<const std::byte> file, std::size_t offset, std::size_t width) {
  std::uint32_t value = 0;
  for (std::size_t i = 0; i < width; ++i) value |= std::to_integer<std::uint32_t>(file[offset + i]) << (8 * i);
  return value;
}

std::string shape_literal(std::span<const std::size_t> shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  out += ")";
  return out;
}

}  // namespace

std::size_t dtype_size(Dtype dtype) noexcept { return dtype == Dtype::kFloat32 ? 4 : 1; }

std::size_t TensorDump::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<float> TensorDump::floats() const {
  if (dtype != Dtype::kFloat32) throw Error(ErrorCode::kUnsupportedDtype, "tensor is not float32");
  std::vector<float> out(data.size() / sizeof(float));
  std::memcpy(out.data(), data.data(), out.size() * sizeof(float));
  return out;
}

std::vector<std::uint8_t> TensorDump::bytes() const {
  if (dtype != Dtype::kUint8) throw Error(ErrorCode::kUnsupportedDtype, "tensor is not uint8");
  std::vector<std::uint8_t> out(data.size());
  std::memcpy(out.data(), data.data(), out.size());
  return out;
}

TensorDump TensorDump::from_floats(std::vector<std::size_t> shape, std::span<const float> values) {
  TensorDump t{Dtype::kFloat32, std::move(shape), {}};
  if (t.element_count() != values.size()) throw Error(ErrorCode::kDimMismatch, "shape does not match value count");
  t.data.resize(values.size() * sizeof(float));
  std::memcpy(t.data.data(), values.data(), t.data.size());
  return t;
}

TensorDump TensorDump::from_bytes(std::vector<std::size_t> shape, std::span<const std::uint8_t> values) {
  TensorDump t{Dtype::kUint8, std::move(shape), {}};
  if (t.element_count() != values.size()) throw Error(ErrorCode::kDimMismatch, "shape does not match value count");
  t.data.resize(values.size());
  std::memcpy(t.data.data(), values.data(), t.data.size());
  return t;
}

TensorDump parse_tensor(std::span<const std::byte> file) {
  if (file.size() < 10) fail(ErrorCode::kMalformedHeader, file.size(), "file too short for a dump header");
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (file[i] != static_cast<std::byte>(kMagic[i])) fail(ErrorCode::kMalformedHeader, i, "bad magic bytes");
  }
  const auto major = std::to_integer<unsigned>(file[6]);
  std::size_t header_start = 0;
  std::size_t header_len = 0;
  if (major == 1) {
    header_start = 10;
    header_len = read_le(file, 8, 2);
  } else if (major == 2 || major == 3) {
    if (file.size() < 12) fail(ErrorCode::kMalformedHeader, file.size(), "file too short for a dump header");
    header_start = 12;
    header_len = read_le(file, 8, 4);
  } else {
    fail(ErrorCode::kMalformedHeader, 6, "unsupported format version " + std::to_string(major));
  }
  if (header_len > file.size() - header_start) {
    fail(ErrorCode::kMalformedHeader, file.size(), "header length runs past end of file");
  }
  const std::string_view text(reinterpret_cast<const char*>(file.data()) + header_start, header_len);

  HeaderParser parser(text, header_start);
  std::optional<std::string> descr;
  std::optional<bool> fortran;
  std::optional<std::vector<std::size_t>> shape;
  std::size_t descr_offset = 0;
  std::size_t shape_offset = 0;
  parser.expect('{');
  while (!parser.consume('}')) {
    const auto key = parser.string_literal();
    parser.expect(':');
    parser.skip_space();
    if (key == "descr") {
      descr_offset = parser.offset();
      descr = parser.string_literal();
    } else if (key == "fortran_order") {
      fortran = parser.boolean_literal();
    } else if (key == "shape") {
      shape_offset = parser.offset();
      shape = parser.shape_tuple();
    } else {
      parser.skip_value();
    }
    if (!parser.consume(',')) {
      parser.expect('}');
      break;
    }
  }
  const std::size_t header_end = header_start + header_len;
  if (!descr || !fortran || !shape) {
    fail(ErrorCode::kMalformedHeader, header_end, "header lacks one of descr, fortran_order, shape");
  }
  if (*fortran) fail(ErrorCode::kMalformedHeader, header_start, "fortran_order True is not supported");

  TensorDump tensor;
  if (*descr == "<f4") {
    tensor.dtype = Dtype::kFloat32;
  } else if (*descr == "|u1" || *descr == "<u1" || *descr == ">u1" || *descr == "u1") {
    tensor.dtype = Dtype::kUint8;
  } else {
    fail(ErrorCode::kUnsupportedDtype, descr_offset, "unsupported dtype '" + *descr + "'");
  }
  tensor.shape = std::move(*shape);

  std::size_t payload_bytes = 0;
  if (!checked_product(tensor.shape, dtype_size(tensor.dtype), payload_bytes)) {
    fail(ErrorCode::kShapeOverflow, shape_offset, "shape product overflows");
  }
  if (payload_bytes > file.size() - header_end) {
    fail(ErrorCode::kTruncatedPayload, file.size(),
         "payload needs " + std::to_string(payload_bytes) + " bytes from offset " + std::to_string(header_end) +
             " but the file ends");
  }
  tensor.data.assign(file.begin() + static_cast<std::ptrdiff_t>(header_end),
                     file.begin() + static_cast<std::ptrdiff_t>(header_end + payload_bytes));
  return tensor;
}

std::vector<std::byte> serialize_tensor(const TensorDump& tensor) {
  std::size_t payload_bytes = 0;
  if (!checked_product(tensor.shape, dtype_size(tensor.dtype), payload_bytes) || payload_bytes != tensor.data.size()) {
    throw Error(ErrorCode::kDimMismatch, "tensor payload does not match its shape");
  }
  std::string header = "{'descr': '";
  header += tensor.dtype == Dtype::kFloat32 ? "<f4" : "|u1";
  header += "', 'fortran_order': False, 'shape': " + shape_literal(tensor.shape) + ", }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((kAlignment - unpadded % kAlignment) % kAlignment, ' ');
  header += '\n';
  if (header.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::kShapeOverflow, "header too long for format version 1.0");
  }

  std::vector<std::byte> out;
  out.reserve(10 + header.size() + payload_bytes);
  for (char ch : kMagic) out.push_back(static_cast<std::byte>(ch));
  out.push_back(std::byte{1});
  out.push_back(std::byte{0});
  out.push_back(static_cast<std::byte>(header.size() & 0xff));
  out.push_back(static_cast<std::byte>(header.size() >> 8));
  for (char ch : header) out.push_back(static_cast<std::byte>(ch));
  out.insert(out.end(), tensor.data.begin(), tensor.data.end());
  return out;
}

TensorDump read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string()).with_subject(path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> buffer(size);
  if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(size))) {
    throw Error(ErrorCode::kIoFailure, "cannot read " + path.string()).with_subject(path.string());
  }
  try {
    return parse_tensor(buffer);
  } catch (Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message()).with_index(e.index().value_or(0)).with_subject(path.string());
  }
}

void write_tensor(const std::filesystem::path& path, const TensorDump& tensor) {
  const auto bytes = serialize_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed for " + path.string());
}

FeatureMap to_feature_map(const TensorDump& tensor) {
  if (tensor.dtype != Dtype::kFloat32) throw Error(ErrorCode::kUnsupportedDtype, "feature dumps must be float32");
  if (tensor.shape.size() == 2) return FeatureMap(tensor.shape[0], tensor.shape[1], 1, tensor.floats());
  if (tensor.shape.size() == 3) return FeatureMap(tensor.shape[0], tensor.shape[1], tensor.shape[2], tensor.floats());
  throw Error(ErrorCode::kDimMismatch, "feature dumps must have shape (H, W) or (H, W, C)");
}

LabelMask to_label_mask(const TensorDump& tensor, std::size_t num_classes) {
  if (tensor.shape.size() != 2) throw Error(ErrorCode::kDimMismatch, "mask dumps must have shape (H, W)");
  if (tensor.dtype == Dtype::kUint8) return LabelMask(tensor.shape[0], tensor.shape[1], tensor.bytes(), num_classes);
  return to_weight_mask(tensor).threshold();
}

WeightMask to_weight_mask(const TensorDump& tensor) {
  if (tensor.shape.size() != 2) throw Error(ErrorCode::kDimMismatch, "mask dumps must have shape (H, W)");
  std::vector<double> weights;
  if (tensor.dtype == Dtype::kFloat32) {
    const auto values = tensor.floats();
    weights.assign(values.begin(), values.end());
  } else {
    for (auto v : tensor.bytes()) {
      if (v > 1) throw Error(ErrorCode::kIndexOutOfRange, "binary mask holds a label above 1");
      weights.push_back(v);
    }
  }
  return WeightMask(tensor.shape[0], tensor.shape[1], std::move(weights));
}

TensorDump to_dump(const FeatureMap& f) {
  return TensorDump::from_floats({f.height(), f.width(), f.channels()}, f.values());
}

TensorDump to_dump(const LabelMask& mask) { return TensorDump::from_bytes({mask.height(), mask.width()}, mask.labels()); }

TensorDump to_dump(const GradientTensor& gradient) {
  std::vector<float> values(gradient.values.begin(), gradient.values.end());
  return TensorDump::from_floats({gradient.height, gradient.width, gradient.channels}, values);
}

TensorDump to_dump(const RealMap& map) {
  std::vector<float> values(map.values.begin(), map.values.end());
  return TensorDump::from_floats({map.height, map.width}, values);
}

TensorDump to_dump(const ProbabilityMap& p) {
  std::vector<float> values(p.probs.begin(), p.probs.end());
  return TensorDump::from_floats({p.height, p.width, p.num_classes}, values);
}

}  // namespace protoseg
