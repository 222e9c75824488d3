#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lvst/bilateral_grid.hpp"
#include "lvst/conv.hpp"
#include "lvst/error.hpp"
#include "lvst/random.hpp"
#include "lvst/tensor.hpp"
#include "lvst/weights.hpp"

namespace lvst {

enum class MaskProvenance { Raw, Enhanced, GroundTruth };

/// H x W x 1 weights in [0,1].
struct Mask {
  Tensor values;
  MaskProvenance provenance = MaskProvenance::Raw;
};

inline void require_mask(const Tensor& m, const char* what) {
  require_image(m, what);
  require(m.channels() == 1, ErrorCode::ShapeMismatch, std::string(what) + " must be single-channel");
}

/// M1 -> M2 -> M3 + sigmoid. The three layers are linear up to the final sigmoid, so
/// they run as one folded 7x7 kernel.
class MaskEnhancer {
 public:
  explicit MaskEnhancer(const WeightBundle& weights) : chain_(weights.layers(Arch::MaskNet)) {}

  Mask operator()(const Tensor& m) const {
    require_mask(m, "mask enhancement input");
    return {chain_(m), MaskProvenance::Enhanced};
  }

 private:
  FoldedConvChain chain_;
};

inline Mask enhance_mask(const Tensor& m, const WeightBundle& weights) { return MaskEnhancer(weights)(m); }

enum class MorphOp { Erode, Dilate };

/// Square-window min (erode) or max (dilate) with edge clamping.
inline Tensor morph(const Tensor& m, MorphOp op, int kernel) {
  require_mask(m, "morph input");
  require(kernel >= 1 && kernel % 2 == 1, ErrorCode::BadKernel,
          "morphology kernel must be odd and positive, got " + std::to_string(kernel));
  const int r = kernel / 2;
  const int h = static_cast<int>(m.height()), w = static_cast<int>(m.width());
  auto pick = [op](float a, float b) { return op == MorphOp::Erode ? std::min(a, b) : std::max(a, b); };

  Tensor tmp = m;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float v = m.at(y, x, 0);
      for (int dx = -r; dx <= r; ++dx) v = pick(v, m.at(y, std::clamp(x + dx, 0, w - 1), 0));
      tmp.at(y, x, 0) = v;
    }
  Tensor out = tmp;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float v = tmp.at(y, x, 0);
      for (int dy = -r; dy <= r; ++dy) v = pick(v, tmp.at(std::clamp(y + dy, 0, h - 1), x, 0));
      out.at(y, x, 0) = v;
    }
  return out;
}

inline constexpr std::array<int, 4> kNoiseKernels{3, 5, 7, 9};

/// Erode then dilate, or the reverse, with kernel sizes drawn from {3,5,7,9}; all
/// choices come from SplitMix64(seed).
inline Mask synthesize_noisy_mask(const Tensor& gt, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const int k1 = kNoiseKernels[rng.below(4)];
  const int k2 = kNoiseKernels[rng.below(4)];
  const bool erode_first = rng.below(2) == 0;
  Tensor out = erode_first ? morph(morph(gt, MorphOp::Erode, k1), MorphOp::Dilate, k2)
                           : morph(morph(gt, MorphOp::Dilate, k1), MorphOp::Erode, k2);
  return {std::move(out), MaskProvenance::Raw};
}

/// Intersection over union of the masks thresholded at 0.5; 1 when both are empty.
inline double iou(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch, "iou shape mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] >= 0.5f, pb = b[i] >= 0.5f;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct GridDims {
  std::size_t width = 16;
  std::size_t height = 16;
  std::size_t depth = 8;
};

enum class GridMaskVariant {
  // Every depth slice starts at the patch's foreground count; observed bins d >= 1
  // are then overwritten with their own count.
  Literal,
  // Per-depth histogram of bins d >= 1 only; bin 0 stays empty.
  Splat,
};

/// Depth bin of each pixel: floor(z * m * D), clamped to [0, D-1]. Masked-out pixels
/// land in bin 0.
inline std::vector<std::uint32_t> depth_bins(const Tensor& z, const Tensor& m, std::size_t depth) {
  std::vector<std::uint32_t> bins(z.pixels());
  const float d = static_cast<float>(depth);
  for (std::size_t p = 0; p < z.pixels(); ++p) {
    const float v = std::floor(z[p] * m[p] * d);
    bins[p] = static_cast<std::uint32_t>(std::clamp(v, 0.0f, d - 1.0f));
  }
  return bins;
}

/// Soft grid mask from a guide map and a pixel mask of the same size.
inline ScalarGrid soft_grid_mask(const Tensor& z, const Tensor& m, const GridDims& dims,
                                 GridMaskVariant variant = GridMaskVariant::Literal) {
  require_mask(z, "soft_grid_mask guide");
  require_mask(m, "soft_grid_mask mask");
  require_same_spatial(z, m, "soft_grid_mask");
  const std::size_t h = z.height(), w = z.width();
  require(h % dims.height == 0 && w % dims.width == 0, ErrorCode::NonDivisibleDims,
          "image " + std::to_string(w) + "x" + std::to_string(h) + " is not divisible by grid " +
              std::to_string(dims.width) + "x" + std::to_string(dims.height));
  const std::size_t sw = w / dims.width, sh = h / dims.height;
  const float area = static_cast<float>(sw * sh);
  const auto bins = depth_bins(z, m, dims.depth);

  ScalarGrid grid(dims.width, dims.height, dims.depth);
  std::vector<std::uint32_t> hist(dims.depth);
  for (std::size_t gy = 0; gy < dims.height; ++gy)
    for (std::size_t gx = 0; gx < dims.width; ++gx) {
      std::fill(hist.begin(), hist.end(), 0u);
      for (std::size_t y = gy * sh; y < (gy + 1) * sh; ++y)
        for (std::size_t x = gx * sw; x < (gx + 1) * sw; ++x) ++hist[bins[y * w + x]];
      std::uint32_t foreground = 0;
      for (std::size_t d = 1; d < dims.depth; ++d) foreground += hist[d];
      for (std::size_t d = 0; d < dims.depth; ++d) {
        std::uint32_t count = 0;
        if (variant == GridMaskVariant::Literal)
          count = (d >= 1 && hist[d] > 0) ? hist[d] : foreground;
        else
          count = d >= 1 ? hist[d] : 0;
        grid(gx, gy, d) = static_cast<float>(count) / area;
      }
    }
  return grid;
}

}  // namespace lvst
