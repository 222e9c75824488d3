#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "lvst/error.hpp"
#include "lvst/parallel.hpp"
#include "lvst/tensor.hpp"

namespace lvst {

/// W x H x D lattice with N floats per cell. Cells are stored depth-fastest:
/// offset(x, y, d) = ((y * W + x) * D + d) * N.
template <std::size_t N>
class BilateralGrid {
 public:
  static constexpr std::size_t kEntries = N;
  using Cell = std::array<float, N>;

  BilateralGrid() = default;
  BilateralGrid(std::size_t w, std::size_t h, std::size_t d, float fill = 0.0f)
      : w_(w), h_(h), d_(d), values_(w * h * d * N, fill) {
    require(w >= 2 && h >= 2 && d >= 2, ErrorCode::ShapeMismatch,
            "grid dims must be at least 2 per axis, got " + std::to_string(w) + "x" + std::to_string(h) +
                "x" + std::to_string(d));
  }

  static BilateralGrid constant(std::size_t w, std::size_t h, std::size_t d, const Cell& cell) {
    BilateralGrid g(w, h, d);
    for (std::size_t i = 0; i < w * h * d; ++i) std::copy(cell.begin(), cell.end(), g.values_.begin() + i * N);
    return g;
  }

  std::size_t width() const noexcept { return w_; }
  std::size_t height() const noexcept { return h_; }
  std::size_t depth() const noexcept { return d_; }
  std::size_t cells() const noexcept { return w_ * h_ * d_; }

  std::size_t offset(std::size_t x, std::size_t y, std::size_t d) const { return ((y * w_ + x) * d_ + d) * N; }

  std::span<float, N> cell(std::size_t x, std::size_t y, std::size_t d) {
    return std::span<float, N>(values_.data() + offset(x, y, d), N);
  }
  std::span<const float, N> cell(std::size_t x, std::size_t y, std::size_t d) const {
    return std::span<const float, N>(values_.data() + offset(x, y, d), N);
  }

  float& operator()(std::size_t x, std::size_t y, std::size_t d, std::size_t e = 0) {
    return values_[offset(x, y, d) + e];
  }
  float operator()(std::size_t x, std::size_t y, std::size_t d, std::size_t e = 0) const {
    return values_[offset(x, y, d) + e];
  }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  bool same_dims(const BilateralGrid& o) const { return w_ == o.w_ && h_ == o.h_ && d_ == o.d_; }

  bool operator==(const BilateralGrid&) const = default;

 private:
  std::size_t w_ = 0, h_ = 0, d_ = 0;
  std::vector<float> values_;
};

/// Cells hold row-major 3x4 affine color transforms.
using AffineBilateralGrid = BilateralGrid<12>;
/// Cells hold a blending weight in [0,1].
using ScalarGrid = BilateralGrid<1>;
using Affine = AffineBilateralGrid::Cell;

inline constexpr Affine kIdentityAffine{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

template <std::size_t N>
void require_same_dims(const BilateralGrid<N>& a, const BilateralGrid<N>& b, const char* what) {
  require(a.same_dims(b), ErrorCode::ShapeMismatch, std::string(what) + ": grid dimensions differ");
}

/// Reshape a (H, W, 12*D) grid-head activation; channel c is depth c / 12, entry c % 12.
inline AffineBilateralGrid grid_from_head(const Tensor& head) {
  require_image(head, "grid head");
  require(head.channels() % 12 == 0 && head.channels() >= 24, ErrorCode::ShapeMismatch,
          "grid head channels must be 12*D with D >= 2, got " + std::to_string(head.channels()));
  const std::size_t depth = head.channels() / 12;
  AffineBilateralGrid g(head.width(), head.height(), depth);
  for (std::size_t y = 0; y < head.height(); ++y)
    for (std::size_t x = 0; x < head.width(); ++x) {
      const float* px = head.pixel(y, x);
      for (std::size_t d = 0; d < depth; ++d) std::copy_n(px + d * 12, 12, g.cell(x, y, d).data());
    }
  return g;
}

inline Tensor grid_to_head(const AffineBilateralGrid& g) {
  Tensor head = Tensor::image(g.height(), g.width(), 12 * g.depth());
  for (std::size_t y = 0; y < g.height(); ++y)
    for (std::size_t x = 0; x < g.width(); ++x)
      for (std::size_t d = 0; d < g.depth(); ++d) std::copy_n(g.cell(x, y, d).data(), 12, head.pixel(y, x) + d * 12);
  return head;
}

namespace detail {

struct AxisTap {
  std::size_t i0, i1;
  float f;
};

// Maps t in [0,1] onto cell centres 0..n-1, clamping outside the range. Cell centres
// get f = 0 so they reproduce the cell exactly.
inline AxisTap axis_tap(float t, std::size_t n) {
  const float g = std::clamp(t, 0.0f, 1.0f) * static_cast<float>(n - 1);
  const auto i0 = std::min(static_cast<std::size_t>(g), n - 1);
  return {i0, std::min(i0 + 1, n - 1), g - static_cast<float>(i0)};
}

inline float lerp(float a, float b, float f) { return a + f * (b - a); }

template <std::size_t N>
void trilinear(const BilateralGrid<N>& g, const AxisTap& tx, const AxisTap& ty, const AxisTap& tz, float* out) {
  const float* c000 = g.cell(tx.i0, ty.i0, tz.i0).data();
  const float* c001 = g.cell(tx.i0, ty.i0, tz.i1).data();
  const float* c100 = g.cell(tx.i1, ty.i0, tz.i0).data();
  const float* c101 = g.cell(tx.i1, ty.i0, tz.i1).data();
  const float* c010 = g.cell(tx.i0, ty.i1, tz.i0).data();
  const float* c011 = g.cell(tx.i0, ty.i1, tz.i1).data();
  const float* c110 = g.cell(tx.i1, ty.i1, tz.i0).data();
  const float* c111 = g.cell(tx.i1, ty.i1, tz.i1).data();
  for (std::size_t e = 0; e < N; ++e) {
    const float x00 = lerp(c000[e], c100[e], tx.f);
    const float x10 = lerp(c010[e], c110[e], tx.f);
    const float x01 = lerp(c001[e], c101[e], tx.f);
    const float x11 = lerp(c011[e], c111[e], tx.f);
    const float y0 = lerp(x00, x10, ty.f);
    const float y1 = lerp(x01, x11, ty.f);
    out[e] = lerp(y0, y1, tz.f);
  }
}

inline std::vector<AxisTap> pixel_taps(std::size_t pixels, std::size_t cells) {
  std::vector<AxisTap> taps(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    const float t = pixels > 1 ? static_cast<float>(i) / static_cast<float>(pixels - 1) : 0.0f;
    taps[i] = axis_tap(t, cells);
  }
  return taps;
}

}  // namespace detail

/// Trilinear sample at normalized (u, v, z); 0 and 1 land on the first and last cell centres.
template <std::size_t N>
std::array<float, N> slice(const BilateralGrid<N>& g, float u, float v, float z) {
  std::array<float, N> out{};
  detail::trilinear(g, detail::axis_tap(u, g.width()), detail::axis_tap(v, g.height()),
                    detail::axis_tap(z, g.depth()), out.data());
  return out;
}

inline Affine slice_affine(const AffineBilateralGrid& g, float u, float v, float z) { return slice(g, u, v, z); }

/// Per-pixel affine color transform sliced at (x, y, guide). Output is clamped to [0,1].
inline Tensor render(const AffineBilateralGrid& g, const Tensor& image, const Tensor& guide) {
  require_same_spatial(image, guide, "render");
  require(image.channels() == 3 && guide.channels() == 1, ErrorCode::ShapeMismatch,
          "render needs an RGB image and a single-channel guide");
  const std::size_t h = image.height(), w = image.width();
  const auto tx = detail::pixel_taps(w, g.width());
  const auto ty = detail::pixel_taps(h, g.height());
  Tensor out = Tensor::image(h, w, 3);
  parallel_rows(h, [&](std::size_t y) {
    Affine a;
    for (std::size_t x = 0; x < w; ++x) {
      detail::trilinear(g, tx[x], ty[y], detail::axis_tap(guide.at(y, x, 0), g.depth()), a.data());
      const float* in = image.pixel(y, x);
      float* o = out.pixel(y, x);
      for (std::size_t r = 0; r < 3; ++r) {
        const float v = a[r * 4] * in[0] + a[r * 4 + 1] * in[1] + a[r * 4 + 2] * in[2] + a[r * 4 + 3];
        o[r] = std::clamp(v, 0.0f, 1.0f);
      }
    }
  });
  return out;
}

inline Tensor slice_scalar(const ScalarGrid& g, const Tensor& guide) {
  require_image(guide, "slice_scalar guide");
  require(guide.channels() == 1, ErrorCode::ShapeMismatch, "guide must be single-channel");
  const std::size_t h = guide.height(), w = guide.width();
  const auto tx = detail::pixel_taps(w, g.width());
  const auto ty = detail::pixel_taps(h, g.height());
  Tensor out = Tensor::image(h, w, 1);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      detail::trilinear(g, tx[x], ty[y], detail::axis_tap(guide.at(y, x, 0), g.depth()), &out.at(y, x, 0));
  return out;
}

/// w * a + (1 - w) * b, returning a untouched where both operands agree so that
/// blending or interpolating equal grids is exact.
inline float mix(float a, float b, float w) { return a == b ? a : w * a + (1.0f - w) * b; }

/// Grid-space blend: M * fg + (1 - M) * bg per cell.
inline AffineBilateralGrid blend_grids(const AffineBilateralGrid& fg, const AffineBilateralGrid& bg,
                                       const ScalarGrid& m) {
  require_same_dims(fg, bg, "blend_grids");
  require(fg.width() == m.width() && fg.height() == m.height() && fg.depth() == m.depth(),
          ErrorCode::ShapeMismatch, "blend_grids: mask grid dimensions differ");
  AffineBilateralGrid out = bg;
  auto fv = fg.values();
  auto bv = bg.values();
  auto ov = out.values();
  auto mv = m.values();
  for (std::size_t c = 0; c < fg.cells(); ++c)
    for (std::size_t e = 0; e < 12; ++e) ov[c * 12 + e] = mix(fv[c * 12 + e], bv[c * 12 + e], mv[c]);
  return out;
}

/// (1 - t) * a + t * b, entrywise.
inline AffineBilateralGrid lerp_grids(const AffineBilateralGrid& a, const AffineBilateralGrid& b, float t) {
  require_same_dims(a, b, "lerp_grids");
  AffineBilateralGrid out = a;
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  const float w = 1.0f - t;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = mix(av[i], bv[i], w);
  return out;
}

struct Region {
  AffineBilateralGrid grid;
  ScalarGrid mask;
};

/// Composites any number of region grids over a base grid. Per cell the region weights
/// are clamped to [0,1] and rescaled to sum to at most 1; the base takes the remainder.
/// Accumulation follows the given region order.
inline AffineBilateralGrid blend_regions(const AffineBilateralGrid& base, const std::vector<Region>& regions) {
  if (regions.size() == 1) return blend_grids(regions[0].grid, base, regions[0].mask);
  for (const auto& r : regions) {
    require_same_dims(r.grid, base, "blend_regions");
    require(r.mask.width() == base.width() && r.mask.height() == base.height() && r.mask.depth() == base.depth(),
            ErrorCode::ShapeMismatch, "blend_regions: mask grid dimensions differ");
  }
  AffineBilateralGrid out = base;
  std::vector<float> w(regions.size());
  for (std::size_t c = 0; c < base.cells(); ++c) {
    float total = 0.0f;
    for (std::size_t k = 0; k < regions.size(); ++k) {
      w[k] = std::clamp(regions[k].mask.values()[c], 0.0f, 1.0f);
      total += w[k];
    }
    if (total > 1.0f)
      for (auto& v : w) v /= total;
    const float rest = total > 1.0f ? 0.0f : 1.0f - total;
    for (std::size_t e = 0; e < 12; ++e) {
      const float b = base.values()[c * 12 + e];
      bool uniform = true;
      for (const auto& r : regions) uniform = uniform && r.grid.values()[c * 12 + e] == b;
      if (uniform) continue;
      float acc = rest * b;
      for (std::size_t k = 0; k < regions.size(); ++k) acc += w[k] * regions[k].grid.values()[c * 12 + e];
      out.values()[c * 12 + e] = acc;
    }
  }
  return out;
}

/// Sum over both grids of squared Frobenius differences between 6-connected neighbours.
/// Every unordered pair contributes twice.
inline double laplacian_reg(const AffineBilateralGrid& fg, const AffineBilateralGrid& bg) {
  auto one = [](const AffineBilateralGrid& g) {
    double total = 0.0;
    const std::size_t W = g.width(), H = g.height(), D = g.depth();
    auto diff = [&](std::size_t x, std::size_t y, std::size_t d, std::size_t x2, std::size_t y2, std::size_t d2) {
      auto a = g.cell(x, y, d);
      auto b = g.cell(x2, y2, d2);
      double s = 0.0;
      for (std::size_t e = 0; e < 12; ++e) {
        const double v = static_cast<double>(a[e]) - static_cast<double>(b[e]);
        s += v * v;
      }
      return s;
    };
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        for (std::size_t d = 0; d < D; ++d) {
          double pair = 0.0;
          if (x + 1 < W) pair += diff(x, y, d, x + 1, y, d);
          if (y + 1 < H) pair += diff(x, y, d, x, y + 1, d);
          if (d + 1 < D) pair += diff(x, y, d, x, y, d + 1);
          total += 2.0 * pair;
        }
    return total;
  };
  return one(fg) + one(bg);
}

inline constexpr char kGridMagic[5] = {'A', 'B', 'G', 'R', '1'};

/// "ABGR1", then little-endian u32 W, H, D, entries-per-cell, then the cell floats in
/// storage order.
template <std::size_t N>
std::vector<unsigned char> serialize_grid(const BilateralGrid<N>& g) {
  std::vector<unsigned char> out(std::begin(kGridMagic), std::end(kGridMagic));
  auto put = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
  };
  put(static_cast<std::uint32_t>(g.width()));
  put(static_cast<std::uint32_t>(g.height()));
  put(static_cast<std::uint32_t>(g.depth()));
  put(static_cast<std::uint32_t>(N));
  for (float v : g.values()) put(std::bit_cast<std::uint32_t>(v));
  return out;
}

template <std::size_t N>
BilateralGrid<N> deserialize_grid(std::span<const unsigned char> bytes) {
  require(bytes.size() >= 21 && std::memcmp(bytes.data(), kGridMagic, 5) == 0, ErrorCode::CorruptFile,
          "bad grid header");
  auto u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  const std::uint32_t w = u32(5), h = u32(9), d = u32(13), n = u32(17);
  require(n == N, ErrorCode::CorruptFile, "grid has " + std::to_string(n) + " entries per cell");
  require(w >= 2 && h >= 2 && d >= 2, ErrorCode::CorruptFile, "grid dims below 2");
  const std::size_t count = static_cast<std::size_t>(w) * h * d * N;
  require(bytes.size() == 21 + 4 * count, ErrorCode::CorruptFile, "grid payload size mismatch");
  BilateralGrid<N> g(w, h, d);
  for (std::size_t i = 0; i < count; ++i) g.values()[i] = std::bit_cast<float>(u32(21 + 4 * i));
  return g;
}

template <std::size_t N>
void save_grid(const BilateralGrid<N>& g, const std::filesystem::path& path) {
  const auto bytes = serialize_grid(g);
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <std::size_t N>
BilateralGrid<N> load_grid(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_grid<N>(bytes);
}

}  // namespace lvst
