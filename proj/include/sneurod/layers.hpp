#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sneurod/tensor.hpp"

namespace sneurod {

enum class Mode { kTrain, kEval };

inline constexpr std::size_t kKernelSize = 3;

// ---------------------------------------------------------------------------
// 2-D convolution, 3x3 kernel, stride 1, no padding.

struct Conv2DParams {
  Tensor weights;  // [out_channels, in_channels, 3, 3]
  Tensor bias;     // [out_channels]

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
};

struct Conv2DCache {
  Tensor input;        // [B, C, H, W] as seen by the forward call
  Shape weight_shape;  // parameters the forward call used
};

struct Conv2DGrads {
  Tensor dx;
  Tensor dw;
  Tensor db;
};

struct Conv2DResult {
  Tensor y;
  Conv2DCache cache;
};

/// y[b][o][i][j] = bias[o] + sum_{c,u,v} x[b][c][i+u][j+v] * w[o][c][u][v]
Conv2DResult conv2d_forward(const Tensor& x, const Conv2DParams& p);

/// Exact gradients of conv2d_forward. Per-sample weight gradients are
/// reduced in ascending sample order, so any thread count gives the same bits.
Conv2DGrads conv2d_backward(const Tensor& dy, const Conv2DCache& cache, const Conv2DParams& p);

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2; an odd trailing row/column is dropped.

struct MaxPoolCache {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input offset per output element
};

struct MaxPoolResult {
  Tensor y;
  MaxPoolCache cache;
};

/// Ties resolve to the first maximum in row-major window order.
MaxPoolResult maxpool2_forward(const Tensor& x);
Tensor maxpool2_backward(const Tensor& dy, const MaxPoolCache& cache);

// ---------------------------------------------------------------------------
// Fully connected layer: y = x W + b.

struct DenseParams {
  Tensor weights;  // [in, out]
  Tensor bias;     // [out]

  std::size_t in_features() const { return weights.dim(0); }
  std::size_t out_features() const { return weights.dim(1); }
};

struct DenseCache {
  Tensor input;  // [B, in]
  Shape weight_shape;
};

struct DenseGrads {
  Tensor dx;
  Tensor dw;
  Tensor db;
};

struct DenseResult {
  Tensor y;
  DenseCache cache;
};

DenseResult dense_forward(const Tensor& x, const DenseParams& p);
DenseGrads dense_backward(const Tensor& dy, const DenseCache& cache, const DenseParams& p);

// ---------------------------------------------------------------------------
// Elementwise ReLU; the subgradient at exactly zero is zero.

struct ReluCache {
  Tensor input;
};

struct ReluResult {
  Tensor y;
  ReluCache cache;
};

ReluResult relu(const Tensor& x);
Tensor relu_backward(const Tensor& dy, const ReluCache& cache);

// ---------------------------------------------------------------------------
// Inverted dropout: train mode keeps each element with probability 1-rate and
// scales survivors by 1/(1-rate); eval mode is the identity.

struct DropoutCache {
  std::optional<Tensor> mask;  // per-element multiplier; empty in eval mode
};

struct DropoutResult {
  Tensor y;
  DropoutCache cache;
};

DropoutResult dropout_forward(const Tensor& x, double rate, Mode mode, Prng& rng);
Tensor dropout_backward(const Tensor& dy, const DropoutCache& cache);

// ---------------------------------------------------------------------------

/// Row-wise softmax of a [B, K] tensor with max subtraction.
Tensor softmax(const Tensor& z);

}  // namespace sneurod
