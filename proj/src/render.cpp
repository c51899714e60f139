#include "yolocam/render.hpp"

#include <algorithm>
#include <cmath>

namespace yolocam {
namespace {

// Treats the map as a single hxw plane whatever the leading-1 wrapping.
const Tensorf& check_map(const Tensorf& map, int& h, int& w) {
  if (map.rank() == 2) {
    h = map.extent(0);
    w = map.extent(1);
  } else if (map.rank() == 3 && map.extent(0) == 1) {
    h = map.extent(1);
    w = map.extent(2);
  } else {
    throw Error("render: expected an hxw or 1xhxw map, got " + shape_string(map.shape()));
  }
  return map;
}

}  // namespace

Tensorf upscale_bilinear(const Tensorf& map, int out_w, int out_h) {
  int h = 0, w = 0;
  check_map(map, h, w);
  if (out_w < 1 || out_h < 1) {
    throw Error("upscale_bilinear: output size " + std::to_string(out_w) + "x" +
                std::to_string(out_h) + " must be positive");
  }
  const float scale_x = static_cast<float>(w) / static_cast<float>(out_w);
  const float scale_y = static_cast<float>(h) / static_cast<float>(out_h);
  Tensorf out({out_h, out_w});
  for (int y = 0; y < out_h; ++y) {
    const float sy = std::clamp((y + 0.5f) * scale_y - 0.5f, 0.0f, static_cast<float>(h - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, h - 1);
    const float fy = sy - static_cast<float>(y0);
    for (int x = 0; x < out_w; ++x) {
      const float sx = std::clamp((x + 0.5f) * scale_x - 0.5f, 0.0f, static_cast<float>(w - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, w - 1);
      const float fx = sx - static_cast<float>(x0);
      const std::int64_t r0 = static_cast<std::int64_t>(y0) * w;
      const std::int64_t r1 = static_cast<std::int64_t>(y1) * w;
      const float top = (1 - fx) * map[r0 + x0] + fx * map[r0 + x1];
      const float bot = (1 - fx) * map[r1 + x0] + fx * map[r1 + x1];
      out.at(y, x) = (1 - fy) * top + fy * bot;
    }
  }
  return out;
}

ImageU8 apply_colormap(const Tensorf& map, int* clamp_warnings) {
  int h = 0, w = 0;
  check_map(map, h, w);
  ImageU8 img(w, h);
  int clamped = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = map[static_cast<std::int64_t>(y) * w + x];
      if (v < 0.0f || v > 1.0f) {
        ++clamped;
        v = std::clamp(v, 0.0f, 1.0f);
      }
      std::size_t seg = kJetStops.size() - 2;
      for (std::size_t i = 0; i + 1 < kJetStops.size(); ++i) {
        if (v <= kJetStops[i + 1]) {
          seg = i;
          break;
        }
      }
      const float span = kJetStops[seg + 1] - kJetStops[seg];
      const float t = (v - kJetStops[seg]) / span;
      std::uint8_t* px = img.at(y, x);
      for (int c = 0; c < 3; ++c) {
        const float lo = static_cast<float>(kJetPalette[seg][c]);
        const float hi = static_cast<float>(kJetPalette[seg + 1][c]);
        px[c] = static_cast<std::uint8_t>(lo + t * (hi - lo));  // fraction truncates
      }
    }
  }
  if (clamp_warnings) *clamp_warnings += clamped;
  return img;
}

ImageU8 overlay(const ImageU8& image, const ImageU8& heat, float alpha) {
  if (image.width != heat.width || image.height != heat.height) {
    throw Error("overlay: image " + std::to_string(image.width) + "x" +
                std::to_string(image.height) + " vs heat " + std::to_string(heat.width) + "x" +
                std::to_string(heat.height));
  }
  if (alpha < 0.0f || alpha > 1.0f) {
    throw Error("overlay: alpha must be in [0,1], got " + std::to_string(alpha));
  }
  ImageU8 out(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const float v = (1.0f - alpha) * static_cast<float>(image.pixels[i]) +
                    alpha * static_cast<float>(heat.pixels[i]);
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

void draw_box(ImageU8& image, const Box& box, const std::array<std::uint8_t, 3>& color,
              int thickness) {
  if (thickness <= 0) return;
  const int x0 = std::clamp(static_cast<int>(std::lround(box.x_min)), 0, image.width - 1);
  const int x1 = std::clamp(static_cast<int>(std::lround(box.x_max)), 0, image.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::lround(box.y_min)), 0, image.height - 1);
  const int y1 = std::clamp(static_cast<int>(std::lround(box.y_max)), 0, image.height - 1);

  const auto paint = [&](int y, int x) {
    std::uint8_t* px = image.at(y, x);
    px[0] = color[0];
    px[1] = color[1];
    px[2] = color[2];
  };
  for (int t = 0; t < thickness; ++t) {
    const int top = y0 + t, bottom = y1 - t;
    const int left = x0 + t, right = x1 - t;
    if (top > bottom || left > right) break;
    for (int x = left; x <= right; ++x) {
      paint(top, x);
      paint(bottom, x);
    }
    for (int y = top; y <= bottom; ++y) {
      paint(y, left);
      paint(y, right);
    }
  }
}

}  // namespace yolocam
