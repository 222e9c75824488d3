#pragma once

// Hand-rolled generators and procedural clips shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "lvst/bilateral_grid.hpp"
#include "lvst/random.hpp"
#include "lvst/tensor.hpp"

namespace fixtures {

using lvst::SplitMix64;
using lvst::Tensor;

inline Tensor random_image(SplitMix64& rng, std::size_t h, std::size_t w, std::size_t c, float lo = 0.0f,
                           float hi = 1.0f) {
  Tensor t = Tensor::image(h, w, c);
  for (float& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor binary_mask(SplitMix64& rng, std::size_t h, std::size_t w, float p = 0.5f) {
  Tensor m = Tensor::image(h, w, 1);
  for (float& v : m.data()) v = rng.uniform() < p ? 1.0f : 0.0f;
  // Never empty.
  m[rng.below(m.size())] = 1.0f;
  return m;
}

inline Tensor soft_mask(SplitMix64& rng, std::size_t h, std::size_t w) {
  Tensor m = random_image(rng, h, w, 1);
  m[rng.below(m.size())] = 1.0f;
  return m;
}

inline lvst::ChannelStats random_stats(SplitMix64& rng, std::size_t c) {
  lvst::ChannelStats s;
  for (std::size_t i = 0; i < c; ++i) {
    s.mean.push_back(rng.uniform(-2.0f, 2.0f));
    const float sd = rng.uniform(0.1f, 2.0f);
    s.var.push_back(sd * sd);
  }
  return s;
}

template <std::size_t N>
lvst::BilateralGrid<N> random_grid(SplitMix64& rng, std::size_t w, std::size_t h, std::size_t d, float lo = -1.0f,
                                   float hi = 1.0f) {
  lvst::BilateralGrid<N> g(w, h, d);
  for (float& v : g.values()) v = rng.uniform(lo, hi);
  return g;
}

inline Tensor constant(std::size_t h, std::size_t w, std::size_t c, float v) { return Tensor::image(h, w, c, v); }

/// Disk of the given radius centred at (cx, cy).
inline Tensor disk(std::size_t h, std::size_t w, float cx, float cy, float radius) {
  Tensor m = Tensor::image(h, w, 1);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const float dx = static_cast<float>(x) - cx, dy = static_cast<float>(y) - cy;
      m.at(y, x, 0) = dx * dx + dy * dy <= radius * radius ? 1.0f : 0.0f;
    }
  return m;
}

/// Smooth colourful texture sampled at world coordinates (x + shift, y).
inline Tensor texture(std::size_t h, std::size_t w, float shift = 0.0f) {
  Tensor t = Tensor::image(h, w, 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const float u = (static_cast<float>(x) + shift) / static_cast<float>(w);
      const float v = static_cast<float>(y) / static_cast<float>(h);
      float* p = t.pixel(y, x);
      p[0] = 0.5f + 0.35f * std::sin(6.2831853f * (u + 0.3f * v));
      p[1] = 0.5f + 0.3f * std::cos(6.2831853f * (2.0f * v - 0.5f * u));
      p[2] = 0.45f + 0.25f * std::sin(6.2831853f * (u * v + 0.25f));
    }
  return t;
}

/// A style image: a two-tone gradient with given tints.
inline Tensor style_image(std::size_t size, float r, float g, float b) {
  Tensor t = Tensor::image(size, size, 3);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const float s = 0.25f + 0.5f * static_cast<float>(x + y) / static_cast<float>(2 * size);
      float* p = t.pixel(y, x);
      p[0] = std::fmin(1.0f, r * s * 1.6f);
      p[1] = std::fmin(1.0f, g * s * 1.6f);
      p[2] = std::fmin(1.0f, b * s * 1.6f);
    }
  return t;
}

struct Clip {
  std::vector<Tensor> frames;
  std::vector<Tensor> masks;
};

/// Texture panning by `speed` pixels per frame with a disk that moves along with it.
inline Clip panning_clip(std::size_t frames, std::size_t size, float speed) {
  Clip c;
  for (std::size_t i = 0; i < frames; ++i) {
    const float shift = speed * static_cast<float>(i);
    c.frames.push_back(texture(size, size, shift));
    const float s = static_cast<float>(size);
    c.masks.push_back(disk(size, size, 0.5f * s - shift, 0.5f * s, 0.3f * s));
  }
  return c;
}

/// The same frame repeated.
inline Clip static_clip(std::size_t frames, std::size_t size) {
  Clip c;
  const Tensor f = texture(size, size);
  const float s = static_cast<float>(size);
  const Tensor m = disk(size, size, 0.45f * s, 0.55f * s, 0.3f * s);
  for (std::size_t i = 0; i < frames; ++i) {
    c.frames.push_back(f);
    c.masks.push_back(m);
  }
  return c;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lvst_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
