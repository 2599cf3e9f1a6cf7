#include "sneurod/layers.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sneurod/parallel.hpp"

namespace sneurod {
namespace {

void expect_shape(const Tensor& t, const Shape& want, const char* what) {
  if (t.shape() != want) {
    throw ShapeError(std::string(what) + ": expected " + shape_string(want) + ", got " + shape_string(t.shape()));
  }
}

// Lowers one sample [C, H, W] into columns [C*9, Ho*Wo].
void im2col(const double* x, std::size_t channels, std::size_t h, std::size_t w, RowMatrix<double>& cols) {
  const std::size_t ho = h - 2, wo = w - 2;
  cols.resize(Eigen::Index(channels * 9), Eigen::Index(ho * wo));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t u = 0; u < 3; ++u) {
      for (std::size_t v = 0; v < 3; ++v) {
        double* dst = cols.data() + ((c * 3 + u) * 3 + v) * ho * wo;
        for (std::size_t i = 0; i < ho; ++i) {
          const double* src = x + (c * h + i + u) * w + v;
          std::copy(src, src + wo, dst + i * wo);
        }
      }
    }
  }
}

void col2im_add(const RowMatrix<double>& cols, std::size_t channels, std::size_t h, std::size_t w, double* dx) {
  const std::size_t ho = h - 2, wo = w - 2;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t u = 0; u < 3; ++u) {
      for (std::size_t v = 0; v < 3; ++v) {
        const double* src = cols.data() + ((c * 3 + u) * 3 + v) * ho * wo;
        for (std::size_t i = 0; i < ho; ++i) {
          double* dst = dx + (c * h + i + u) * w + v;
          const double* row = src + i * wo;
          for (std::size_t j = 0; j < wo; ++j) dst[j] += row[j];
        }
      }
    }
  }
}

void check_conv_params(const Conv2DParams& p) {
  const Shape& ws = p.weights.shape();
  if (ws.size() != 4 || ws[2] != kKernelSize || ws[3] != kKernelSize) {
    throw ShapeError("conv2d: weights must be [out, in, 3, 3], got " + shape_string(ws));
  }
  expect_shape(p.bias, {ws[0]}, "conv2d bias");
}

}  // namespace

Conv2DResult conv2d_forward(const Tensor& x, const Conv2DParams& p) {
  check_conv_params(p);
  if (x.rank() != 4) throw ShapeError("conv2d: input must be [B, C, H, W], got " + shape_string(x.shape()));
  const std::size_t batch = x.dim(0), in_c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (in_c != p.in_channels()) {
    throw ShapeError("conv2d: input " + shape_string(x.shape()) + " does not match weights " +
                     shape_string(p.weights.shape()));
  }
  if (h < kKernelSize || w < kKernelSize) {
    throw ShapeError("conv2d: input " + shape_string(x.shape()) + " is smaller than the 3x3 kernel");
  }
  const std::size_t out_c = p.out_channels(), ho = h - 2, wo = w - 2;
  Tensor y({batch, out_c, ho, wo});
  const auto weights = p.weights.as_matrix(out_c, in_c * 9);
  const auto bias = p.bias.as_matrix(out_c, 1);

  parallel_for(batch, [&](std::size_t b) {
    RowMatrix<double> cols;
    im2col(x.data() + b * in_c * h * w, in_c, h, w, cols);
    MatrixMap<double> yb(y.data() + b * out_c * ho * wo, Eigen::Index(out_c), Eigen::Index(ho * wo));
    yb.noalias() = weights * cols;
    yb.colwise() += bias.col(0);
  });
  return {std::move(y), Conv2DCache{x, p.weights.shape()}};
}

Conv2DGrads conv2d_backward(const Tensor& dy, const Conv2DCache& cache, const Conv2DParams& p) {
  check_conv_params(p);
  if (cache.weight_shape != p.weights.shape()) {
    throw ShapeError("conv2d_backward: cache was produced with weights " + shape_string(cache.weight_shape) +
                     ", got " + shape_string(p.weights.shape()));
  }
  const Tensor& x = cache.input;
  const std::size_t batch = x.dim(0), in_c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t out_c = p.out_channels(), ho = h - 2, wo = w - 2;
  expect_shape(dy, {batch, out_c, ho, wo}, "conv2d_backward dY");

  const auto weights = p.weights.as_matrix(out_c, in_c * 9);
  Tensor dx(x.shape());
  std::vector<RowMatrix<double>> dw_parts(batch);
  std::vector<Eigen::VectorXd> db_parts(batch);

  parallel_for(batch, [&](std::size_t b) {
    RowMatrix<double> cols;
    im2col(x.data() + b * in_c * h * w, in_c, h, w, cols);
    ConstMatrixMap<double> dyb(dy.data() + b * out_c * ho * wo, Eigen::Index(out_c), Eigen::Index(ho * wo));
    dw_parts[b].noalias() = dyb * cols.transpose();
    db_parts[b].resize(Eigen::Index(out_c));
    for (Eigen::Index o = 0; o < dyb.rows(); ++o) {
      double sum = 0.0;
      for (Eigen::Index k = 0; k < dyb.cols(); ++k) sum += dyb(o, k);
      db_parts[b][o] = sum;
    }
    RowMatrix<double> dcols;
    dcols.noalias() = weights.transpose() * dyb;
    col2im_add(dcols, in_c, h, w, dx.data() + b * in_c * h * w);
  });

  Tensor dw(p.weights.shape());
  Tensor db(p.bias.shape());
  auto dw_m = dw.as_matrix(out_c, in_c * 9);
  auto db_m = db.as_matrix(out_c, 1);
  for (std::size_t b = 0; b < batch; ++b) {
    dw_m += dw_parts[b];
    db_m.col(0) += db_parts[b];
  }
  return {std::move(dx), std::move(dw), std::move(db)};
}

MaxPoolResult maxpool2_forward(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("maxpool2: input must be [B, C, H, W], got " + shape_string(x.shape()));
  const std::size_t batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < 2 || w < 2) throw ShapeError("maxpool2: input " + shape_string(x.shape()) + " is smaller than 2x2");
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor y({batch, ch, ho, wo});
  MaxPoolCache cache{x.shape(), std::vector<std::size_t>(y.size())};
  std::size_t out = 0;
  for (std::size_t plane = 0; plane < batch * ch; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j, ++out) {
        std::size_t best = base + (2 * i) * w + 2 * j;
        for (std::size_t u = 0; u < 2; ++u) {
          for (std::size_t v = 0; v < 2; ++v) {
            const std::size_t at = base + (2 * i + u) * w + 2 * j + v;
            if (x[at] > x[best]) best = at;
          }
        }
        y[out] = x[best];
        cache.argmax[out] = best;
      }
    }
  }
  return {std::move(y), std::move(cache)};
}

Tensor maxpool2_backward(const Tensor& dy, const MaxPoolCache& cache) {
  const Shape& in = cache.input_shape;
  expect_shape(dy, {in[0], in[1], in[2] / 2, in[3] / 2}, "maxpool2_backward dY");
  Tensor dx(in);
  for (std::size_t k = 0; k < dy.size(); ++k) dx[cache.argmax[k]] += dy[k];
  return dx;
}

DenseResult dense_forward(const Tensor& x, const DenseParams& p) {
  if (p.weights.rank() != 2) throw ShapeError("dense: weights must be [in, out], got " + shape_string(p.weights.shape()));
  expect_shape(p.bias, {p.out_features()}, "dense bias");
  if (x.rank() != 2 || x.dim(1) != p.in_features()) {
    throw ShapeError("dense: input " + shape_string(x.shape()) + " does not match weights " +
                     shape_string(p.weights.shape()));
  }
  const std::size_t batch = x.dim(0), in = p.in_features(), out = p.out_features();
  Tensor y({batch, out});
  auto ym = y.as_matrix(batch, out);
  ym.noalias() = x.as_matrix(batch, in) * p.weights.as_matrix(in, out);
  ym.rowwise() += p.bias.as_matrix(1, out).row(0);
  return {std::move(y), DenseCache{x, p.weights.shape()}};
}

DenseGrads dense_backward(const Tensor& dy, const DenseCache& cache, const DenseParams& p) {
  if (cache.weight_shape != p.weights.shape()) {
    throw ShapeError("dense_backward: cache was produced with weights " + shape_string(cache.weight_shape) +
                     ", got " + shape_string(p.weights.shape()));
  }
  const std::size_t batch = cache.input.dim(0), in = p.in_features(), out = p.out_features();
  expect_shape(dy, {batch, out}, "dense_backward dY");
  const auto dym = dy.as_matrix(batch, out);
  Tensor dx({batch, in});
  Tensor dw(p.weights.shape());
  Tensor db(p.bias.shape());
  dx.as_matrix(batch, in).noalias() = dym * p.weights.as_matrix(in, out).transpose();
  dw.as_matrix(in, out).noalias() = cache.input.as_matrix(batch, in).transpose() * dym;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out; ++o) db[o] += dy(b, o);
  return {std::move(dx), std::move(dw), std::move(db)};
}

ReluResult relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return {std::move(y), ReluCache{x}};
}

Tensor relu_backward(const Tensor& dy, const ReluCache& cache) {
  expect_shape(dy, cache.input.shape(), "relu_backward dY");
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = cache.input[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

DropoutResult dropout_forward(const Tensor& x, double rate, Mode mode, Prng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::kEval) return {x, DropoutCache{}};
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : scale;
    y[i] = x[i] * mask[i];
  }
  return {std::move(y), DropoutCache{std::move(mask)}};
}

Tensor dropout_backward(const Tensor& dy, const DropoutCache& cache) {
  if (!cache.mask) return dy;
  expect_shape(dy, cache.mask->shape(), "dropout_backward dY");
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * (*cache.mask)[i];
  return dx;
}

Tensor softmax(const Tensor& z) {
  if (z.rank() != 2) throw ShapeError("softmax: input must be [B, K], got " + shape_string(z.shape()));
  const std::size_t rows = z.dim(0), k = z.dim(1);
  Tensor p(z.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z.data() + r * k;
    double* pr = p.data() + r * k;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, zr[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      pr[j] = std::exp(zr[j] - mx);
      sum += pr[j];
    }
    for (std::size_t j = 0; j < k; ++j) pr[j] /= sum;
  }
  return p;
}

}  // namespace sneurod
