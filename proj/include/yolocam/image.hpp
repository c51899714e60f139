#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "yolocam/tensor.hpp"

namespace yolocam {

/// 8-bit RGB image, row-major.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 3 bytes per pixel

  ImageU8() = default;
  ImageU8(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int y, int x) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* at(int y, int x) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

// PNG support covers 8-bit gray / gray+alpha / RGB / RGBA / palette,
// non-interlaced; alpha is dropped. Encoding always writes 8-bit RGB.
ImageU8 decode_png(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_png(const ImageU8& img);

ImageU8 decode_ppm(const std::vector<std::uint8_t>& bytes);

/// Dispatches on the file's magic bytes (PNG or binary PPM).
ImageU8 load_image(const std::string& path);
void save_png(const std::string& path, const ImageU8& img);

/// Plain bilinear resize (half-pixel centers), no letterboxing.
ImageU8 resize_bilinear(const ImageU8& img, int out_w, int out_h);

/// RGB bytes -> 3xHxW float tensor in [0,1].
Tensorf image_to_tensor(const ImageU8& img);

}  // namespace yolocam
