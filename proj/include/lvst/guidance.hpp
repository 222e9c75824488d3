#pragma once

#include "lvst/conv.hpp"
#include "lvst/error.hpp"
#include "lvst/tensor.hpp"
#include "lvst/weights.hpp"

namespace lvst {

/// Guide network: (RGB, mask) -> G1 (16 ch, linear) -> G2 (1 ch, sigmoid). Runs at
/// output resolution; both layers fold into one 5x5 kernel.
class GuideNet {
 public:
  explicit GuideNet(const WeightBundle& weights) : chain_(weights.layers(Arch::GuideNet)) {}

  Tensor operator()(const Tensor& image, const Tensor& mask) const {
    require_same_spatial(image, mask, "guide_map");
    require(image.channels() == 3 && mask.channels() == 1, ErrorCode::ShapeMismatch,
            "guide_map needs an RGB image and a single-channel mask");
    return chain_(concat_channels(image, mask));
  }

 private:
  FoldedConvChain chain_;
};

inline Tensor guide_map(const Tensor& image, const Tensor& mask, const WeightBundle& weights) {
  return GuideNet(weights)(image, mask);
}

}  // namespace lvst
