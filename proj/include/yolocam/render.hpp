#pragma once

#include <array>
#include <cstdint>

#include "yolocam/detector.hpp"
#include "yolocam/image.hpp"
#include "yolocam/tensor.hpp"

namespace yolocam {

/// Bilinear upscale with half-pixel center alignment
/// (src = (dst + 0.5)*scale - 0.5, clamped to borders). Accepts an hxw or
/// 1xhxw map in [0,1]; output values stay within the source extrema.
Tensorf upscale_bilinear(const Tensorf& map, int out_w, int out_h);

/// Jet-style palette control points: t=0, 0.125, 0.375, 0.625, 0.875, 1.
inline constexpr std::array<std::array<std::uint8_t, 3>, 6> kJetPalette = {{
    {0, 0, 131}, {0, 60, 170}, {5, 255, 255}, {255, 255, 0}, {250, 0, 0}, {128, 0, 0}}};
inline constexpr std::array<float, 6> kJetStops = {0.0f, 0.125f, 0.375f, 0.625f, 0.875f, 1.0f};

/// Piecewise-linear color coding of a [0,1] map. Out-of-range values are
/// clamped and counted in clamp_warnings when given.
ImageU8 apply_colormap(const Tensorf& map, int* clamp_warnings = nullptr);

/// out = round((1-alpha)*image + alpha*heat) per channel.
ImageU8 overlay(const ImageU8& image, const ImageU8& heat, float alpha);

/// Burns an axis-aligned rectangle outline into the image; thickness grows
/// inward and writes are clamped to the image bounds.
void draw_box(ImageU8& image, const Box& box, const std::array<std::uint8_t, 3>& color,
              int thickness);

}  // namespace yolocam
