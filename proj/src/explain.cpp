#include "sneurod/explain.hpp"

#include <algorithm>
#include <cmath>

namespace sneurod {
namespace {

void normalize_by_max(Tensor& t) {
  double mx = 0.0;
  for (double v : t.values()) mx = std::max(mx, v);
  if (mx > 0.0) {
    for (double& v : t.values()) v /= mx;
  } else {
    std::fill(t.values().begin(), t.values().end(), 0.0);
  }
}

}  // namespace

ColorMap ColorMap::purple_to_yellow() {
  static constexpr std::array<double, 5> kPos = {0.0, 0.25, 0.5, 0.75, 1.0};
  static constexpr std::array<std::array<double, 3>, 5> kRgb = {
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  ColorMap cmap;
  for (std::size_t i = 0; i < 256; ++i) {
    const double t = double(i) / 255.0;
    std::size_t seg = 0;
    while (seg + 2 < kPos.size() && t > kPos[seg + 1]) ++seg;
    const double f = (t - kPos[seg]) / (kPos[seg + 1] - kPos[seg]);
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = kRgb[seg][c] + f * (kRgb[seg + 1][c] - kRgb[seg][c]);
      cmap.table[i][c] = static_cast<std::uint8_t>(std::round(v));
    }
  }
  return cmap;
}

Tensor upsample_bilinear(const Tensor& map, std::size_t height, std::size_t width) {
  if (map.rank() != 2) throw ShapeError("upsample_bilinear: expected [h, w], got " + shape_string(map.shape()));
  if (height == 0 || width == 0) throw ParameterError("upsample_bilinear: target extents must be positive");
  const std::size_t h = map.dim(0), w = map.dim(1);
  const auto coord = [](std::size_t i, std::size_t out, std::size_t in) {
    return out > 1 ? double(i) * double(in - 1) / double(out - 1) : 0.0;
  };
  Tensor out({height, width});
  for (std::size_t i = 0; i < height; ++i) {
    const double y = coord(i, height, h);
    const std::size_t y0 = std::min(std::size_t(y), h - 1), y1 = std::min(y0 + 1, h - 1);
    const double fy = y - double(y0);
    for (std::size_t j = 0; j < width; ++j) {
      const double x = coord(j, width, w);
      const std::size_t x0 = std::min(std::size_t(x), w - 1), x1 = std::min(x0 + 1, w - 1);
      const double fx = x - double(x0);
      const double top = map(y0, x0) + fx * (map(y0, x1) - map(y0, x0));
      const double bottom = map(y1, x0) + fx * (map(y1, x1) - map(y1, x0));
      out(i, j) = top + fy * (bottom - top);
    }
  }
  return out;
}

Heatmap grad_cam(const SNeurodCNNModel& model, const Tensor& image, std::size_t class_index) {
  const ModelConfig& cfg = model.config();
  if (class_index >= cfg.num_classes) {
    throw ParameterError("class index " + std::to_string(class_index) + " out of range for " +
                         std::to_string(cfg.num_classes) + " classes");
  }
  const Tensor x = image.rank() == 3 ? image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}) : image;
  if (x.rank() != 4 || x.dim(0) != 1) throw ShapeError("grad_cam expects a single image, got " + shape_string(image.shape()));

  Prng unused(0);
  const ForwardResult fwd = model.forward(x, Mode::kEval, unused);
  Tensor dlogits({1, cfg.num_classes});
  dlogits(0, class_index) = 1.0;
  const Tensor grad = model.backward_to_last_conv(fwd.caches, dlogits);

  const Tensor& acts = fwd.last_conv;
  const std::size_t channels = acts.dim(1), h = acts.dim(2), w = acts.dim(3), area = h * w;
  Tensor raw({h, w});
  for (std::size_t k = 0; k < channels; ++k) {
    const double* g = grad.data() + k * area;
    double alpha = 0.0;
    for (std::size_t i = 0; i < area; ++i) alpha += g[i];
    alpha /= double(area);
    const double* a = acts.data() + k * area;
    for (std::size_t i = 0; i < area; ++i) raw[i] += alpha * a[i];
  }
  for (double& v : raw.values()) v = std::max(v, 0.0);
  normalize_by_max(raw);

  Heatmap hm;
  hm.values = upsample_bilinear(raw, cfg.input_height, cfg.input_width);
  // Grid maxima need not land on output pixels; rescale so the peak is 1.
  normalize_by_max(hm.values);
  hm.source = std::move(raw);
  hm.target_class = class_index;
  return hm;
}

RgbImage colorize(const Heatmap& heatmap, const ColorMap& cmap) {
  const Tensor& v = heatmap.values;
  RgbImage img{v.dim(0), v.dim(1), std::vector<std::uint8_t>(3 * v.size())};
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& rgb = cmap.table[quantize_unit(v[i])];
    std::copy(rgb.begin(), rgb.end(), img.pixels.begin() + std::ptrdiff_t(3 * i));
  }
  return img;
}

RgbImage overlay(const RgbImage& rgb, const Tensor& gray, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("overlay alpha must lie in [0, 1]");
  if (gray.size() != rgb.height * rgb.width) {
    throw ShapeError("overlay: grayscale image " + shape_string(gray.shape()) + " does not match " +
                     std::to_string(rgb.height) + "x" + std::to_string(rgb.width));
  }
  RgbImage out{rgb.height, rgb.width, std::vector<std::uint8_t>(rgb.pixels.size())};
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double g = 255.0 * std::clamp(gray[i], 0.0, 1.0);
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = alpha * double(rgb.pixels[3 * i + c]) + (1.0 - alpha) * g;
      out.pixels[3 * i + c] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
  }
  return out;
}

}  // namespace sneurod
