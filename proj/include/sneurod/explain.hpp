#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "sneurod/data.hpp"
#include "sneurod/model.hpp"

namespace sneurod {

/// Grad-CAM map for one image and one class.
struct Heatmap {
  Tensor values;  // [H, W] at input resolution, in [0, 1]
  Tensor source;  // [h, w] normalized map on the last-convolution grid
  std::size_t target_class = 0;
};

/// 256-entry RGB table, piecewise linear between five control points running
/// from purple (low relevance) to yellow (high relevance).
struct ColorMap {
  std::array<std::array<std::uint8_t, 3>, 256> table{};

  static ColorMap purple_to_yellow();
};

/// Weights each post-ReLU channel of the last convolution by the spatial mean
/// of d(logit[class_index])/d(activation), sums, rectifies and divides by the
/// maximum (an all-zero map stays zero), then upsamples to the input size.
Heatmap grad_cam(const SNeurodCNNModel& model, const Tensor& image, std::size_t class_index);

/// Corner-aligned bilinear resampling of an [h, w] map.
Tensor upsample_bilinear(const Tensor& map, std::size_t height, std::size_t width);

/// Value v maps to table entry round(v * 255).
RgbImage colorize(const Heatmap& heatmap, const ColorMap& cmap);

/// alpha * rgb + (1 - alpha) * gray, gray being a [1, H, W] or [H, W] image in [0, 1].
RgbImage overlay(const RgbImage& rgb, const Tensor& gray, double alpha);

}  // namespace sneurod
