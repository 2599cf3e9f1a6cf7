#pragma once

// Hand-built networks whose behavior can be traced by hand.

#include "sneurod/model.hpp"

namespace sneurod::fixture {

/// One filter per convolution, each a centered delta kernel, so a single
/// bright pixel travels straight through the stack. Every classifier weight
/// is positive, so the class-1 logit grows with that pixel's activation.
inline SNeurodCNNModel one_path_model(std::size_t side) {
  ModelConfig cfg;
  cfg.input_height = side;
  cfg.input_width = side;
  cfg.conv1_filters = 1;
  cfg.conv2_filters = 1;
  cfg.dense_units = 4;
  ModelParams p = zero_params(cfg);
  for (Conv2DParams* conv : {&p.conv1, &p.conv2, &p.conv3}) conv->weights(0, 0, 1, 1) = 1.0;
  for (double& w : p.fc1.weights.values()) w = 0.5;
  for (std::size_t u = 0; u < cfg.dense_units; ++u) {
    p.fc2.weights(u, 0) = 0.1;
    p.fc2.weights(u, 1) = 1.0;
  }
  return SNeurodCNNModel(cfg, std::move(p));
}

/// [1, 1, side, side] zeros with a single 1 at (row, col).
inline Tensor single_pixel(std::size_t side, std::size_t row, std::size_t col) {
  Tensor x({1, 1, side, side});
  x(0, 0, row, col) = 1.0;
  return x;
}

}  // namespace sneurod::fixture
