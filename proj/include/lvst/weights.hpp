#pragma once

#include <zlib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lvst/conv.hpp"
#include "lvst/error.hpp"
#include "lvst/random.hpp"
#include "lvst/tensor.hpp"

namespace lvst {

/// Channel counts of the four feature-pyramid levels (scales 1, 1/2, 1/4, 1/8).
using PyramidChannels = std::array<std::size_t, 4>;

inline constexpr PyramidChannels kTestExtractorChannels{16, 32, 64, 64};

struct NetworkShape {
  PyramidChannels pyramid = kTestExtractorChannels;
  std::size_t grid_depth = 8;
};

enum class Arch { MaskNet, GuideNet, GridPath, TestExtractor };

using LayerTable = std::vector<std::pair<std::string, ConvLayerSpec>>;

/// Layer names and shapes of each sub-network.
inline LayerTable layer_table(Arch arch, const NetworkShape& net = {}) {
  using A = Activation;
  const auto& c = net.pyramid;
  switch (arch) {
    case Arch::MaskNet:
      return {{"M1", {1, 16, 3, 1, A::None}}, {"M2", {16, 8, 3, 1, A::None}}, {"M3", {8, 1, 3, 1, A::Sigmoid}}};
    case Arch::GuideNet:
      return {{"G1", {4, 16, 3, 1, A::None}}, {"G2", {16, 1, 3, 1, A::Sigmoid}}};
    case Arch::GridPath:
      return {
          {"S1_1", {c[0], 8, 3, 2, A::Relu}},       {"S1_2", {8, 8, 3, 1, A::Relu}},
          {"S1_3", {8, 8, 3, 1, A::Relu}},          {"S2_1", {8 + c[1], 16, 3, 2, A::Relu}},
          {"S2_2", {16, 16, 3, 1, A::Relu}},        {"S2_3", {16, 16, 3, 1, A::Relu}},
          {"S3_1", {16 + c[2], 32, 3, 2, A::Relu}}, {"S3_2", {32, 32, 3, 1, A::Relu}},
          {"S3_3", {32, 32, 3, 1, A::Relu}},        {"L1", {32 + c[3], 64, 3, 2, A::Relu}},
          {"L2", {64, 64, 3, 1, A::Relu}},          {"F", {64, 64, 3, 1, A::Relu}},
          {"GRID", {64, 12 * net.grid_depth, 1, 1, A::None}},
      };
    case Arch::TestExtractor:
      return {{"E1", {3, c[0], 3, 1, A::Relu}},
              {"E2", {c[0], c[1], 3, 2, A::Relu}},
              {"E3", {c[1], c[2], 3, 2, A::Relu}},
              {"E4", {c[2], c[3], 3, 2, A::Relu}}};
  }
  return {};
}

inline constexpr char kWeightMagic[8] = {'L', 'V', 'S', 'T', 'W', '0', '0', '1'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

/// Named parameter blobs for every sub-network. Layer "X" is stored as "X.w" (kernel)
/// and "X.b" (bias).
class WeightBundle {
 public:
  std::uint32_t format_version = kWeightFormatVersion;

  void set(const std::string& name, Tensor t) { blobs_[name] = std::move(t); }
  bool contains(const std::string& name) const { return blobs_.count(name) != 0; }
  const std::map<std::string, Tensor>& blobs() const { return blobs_; }
  std::size_t size() const { return blobs_.size(); }

  const Tensor& get(const std::string& name) const {
    auto it = blobs_.find(name);
    if (it == blobs_.end()) fail(ErrorCode::WeightMissing, "no blob named '" + name + "'");
    return it->second;
  }

  void set_layer(const std::string& layer, Tensor kernel, Tensor bias) {
    set(layer + ".w", std::move(kernel));
    set(layer + ".b", std::move(bias));
  }

  ConvLayer layer(const std::string& layer, const ConvLayerSpec& spec) const {
    if (!contains(layer + ".w") || !contains(layer + ".b"))
      fail(ErrorCode::WeightMissing, "layer " + layer + " is missing from the weight bundle");
    const Tensor& w = get(layer + ".w");
    const Tensor& b = get(layer + ".b");
    require(w.shape() == spec.weight_shape() && b.shape() == spec.bias_shape(), ErrorCode::ShapeMismatch,
            "layer " + layer + " has kernel " + shape_str(w.shape()) + " and bias " + shape_str(b.shape()) +
                ", expected " + shape_str(spec.weight_shape()) + " and " + shape_str(spec.bias_shape()));
    return {spec, w, std::vector<float>(b.data().begin(), b.data().end())};
  }

  std::vector<ConvLayer> layers(Arch arch, const NetworkShape& net = {}) const {
    std::vector<ConvLayer> out;
    for (const auto& [name, spec] : layer_table(arch, net)) out.push_back(layer(name, spec));
    return out;
  }

  // Throws WeightMissing / ShapeMismatch naming the first offending layer.
  void validate(Arch arch, const NetworkShape& net = {}) const { (void)layers(arch, net); }

  void merge(const WeightBundle& other) {
    for (const auto& [k, v] : other.blobs_) blobs_[k] = v;
  }

  bool operator==(const WeightBundle&) const = default;

 private:
  std::map<std::string, Tensor> blobs_;
};

/// Deterministic initializer: each layer draws from SplitMix64 seeded with
/// seed ^ fnv1a64(layer name); kernel values are (2u - 1) / sqrt(fan_in) with u the
/// top 24 bits of each draw. Biases start at zero except GRID, whose bias encodes an
/// identity affine transform in every depth slice and whose kernel is scaled by 0.1.
inline WeightBundle seeded_init(std::uint64_t seed, Arch arch, const NetworkShape& net = {}) {
  WeightBundle bundle;
  for (const auto& [name, spec] : layer_table(arch, net)) {
    SplitMix64 rng(seed ^ fnv1a64(name));
    const std::size_t fan_in = spec.kernel_size * spec.kernel_size * spec.in_channels;
    float scale = 1.0f / std::sqrt(static_cast<float>(fan_in));
    if (name == "GRID") scale *= 0.1f;
    Tensor kernel(spec.weight_shape());
    for (float& v : kernel.data()) v = (2.0f * rng.uniform() - 1.0f) * scale;
    Tensor bias(spec.bias_shape());
    if (name == "GRID") {
      for (std::size_t d = 0; d < net.grid_depth; ++d)
        for (std::size_t r = 0; r < 3; ++r) bias[d * 12 + r * 4 + r] = 1.0f;
    }
    bundle.set_layer(name, std::move(kernel), std::move(bias));
  }
  return bundle;
}

/// All four sub-networks from one seed.
inline WeightBundle seeded_pipeline_weights(std::uint64_t seed, const NetworkShape& net = {}) {
  WeightBundle b;
  for (Arch a : {Arch::MaskNet, Arch::GuideNet, Arch::GridPath, Arch::TestExtractor})
    b.merge(seeded_init(seed, a, net));
  return b;
}

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::span<const unsigned char> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::CorruptFile, "weight file truncated");
  }
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const unsigned char> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace detail

inline std::vector<unsigned char> serialize(const WeightBundle& bundle) {
  std::vector<unsigned char> out(std::begin(kWeightMagic), std::end(kWeightMagic));
  detail::put_u32(out, bundle.format_version);
  detail::put_u32(out, static_cast<std::uint32_t>(bundle.size()));
  for (const auto& [name, t] : bundle.blobs()) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  detail::put_u32(out, detail::crc32_of(out));
  return out;
}

inline WeightBundle deserialize(std::span<const unsigned char> bytes) {
  require(bytes.size() >= sizeof kWeightMagic + 12, ErrorCode::CorruptFile, "weight file too short");
  require(std::memcmp(bytes.data(), kWeightMagic, sizeof kWeightMagic) == 0, ErrorCode::CorruptFile,
          "bad weight file magic");
  const auto body = bytes.first(bytes.size() - 4);
  detail::ByteReader tail(bytes.last(4));
  require(tail.u32() == detail::crc32_of(body), ErrorCode::CorruptFile, "weight file CRC mismatch");

  detail::ByteReader in(body.subspan(sizeof kWeightMagic));
  WeightBundle bundle;
  bundle.format_version = in.u32();
  require(bundle.format_version == kWeightFormatVersion, ErrorCode::UnknownVersion,
          "weight format version " + std::to_string(bundle.format_version));
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = in.u32();
    const auto name_bytes = in.take(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint32_t rank = in.u32();
    require(rank <= 8, ErrorCode::CorruptFile, "implausible rank for blob " + name);
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = in.u32();
      n *= d;
    }
    require(n <= in.remaining() / 4, ErrorCode::CorruptFile, "blob " + name + " overruns the file");
    std::vector<float> data(n);
    for (auto& v : data) {
      v = std::bit_cast<float>(in.u32());
      if (!std::isfinite(v)) fail(ErrorCode::CorruptFile, "non-finite value in blob " + name);
    }
    require(!bundle.contains(name), ErrorCode::CorruptFile, "duplicate blob " + name);
    bundle.set(name, Tensor(std::move(shape), std::move(data)));
  }
  require(in.remaining() == 0, ErrorCode::CorruptFile, "trailing bytes in weight file");
  return bundle;
}

inline void save(const WeightBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = serialize(bundle);
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(f), ErrorCode::Io, "write failed for " + path.string());
}

inline WeightBundle load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace lvst
