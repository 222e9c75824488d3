#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "lvst/error.hpp"
#include "lvst/tensor.hpp"

namespace lvst {

namespace detail {

inline Tensor read_png(const std::filesystem::path& path, png_uint_32 format, std::size_t channels) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    fail(ErrorCode::CorruptFile, path.string() + ": " + img.message);
  img.format = format;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::CorruptFile, path.string() + ": " + msg);
  }
  Tensor t = Tensor::image(img.height, img.width, channels);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(buf[i]) / 255.0f;
  return t;
}

}  // namespace detail

/// 8-bit RGB scaled to [0,1].
inline Tensor read_png_rgb(const std::filesystem::path& path) { return detail::read_png(path, PNG_FORMAT_RGB, 3); }

/// 8-bit grayscale scaled to [0,1]; color inputs are converted by libpng.
inline Tensor read_png_gray(const std::filesystem::path& path) { return detail::read_png(path, PNG_FORMAT_GRAY, 1); }

inline std::vector<png_byte> quantize(const Tensor& t) {
  std::vector<png_byte> buf(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    buf[i] = static_cast<png_byte>(std::lround(std::clamp(t[i], 0.0f, 1.0f) * 255.0f));
  return buf;
}

/// Writes a 1- or 3-channel image in [0,1] as 8-bit PNG.
inline void write_png(const std::filesystem::path& path, const Tensor& t) {
  require_image(t, "png output");
  require(t.channels() == 1 || t.channels() == 3, ErrorCode::ShapeMismatch, "png output needs 1 or 3 channels");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(t.width());
  img.height = static_cast<png_uint_32>(t.height());
  img.format = t.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto buf = quantize(t);
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr))
    fail(ErrorCode::Io, path.string() + ": " + img.message);
}

}  // namespace lvst
