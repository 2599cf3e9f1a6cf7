#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sneurod/layers.hpp"
#include "sneurod/tensor.hpp"

namespace sneurod {

/// Architecture hyper-parameters. Defaults are the reference constants;
/// only the input resolution is a local choice.
struct ModelConfig {
  std::size_t input_height = 96;
  std::size_t input_width = 96;
  std::size_t input_channels = 1;
  std::size_t conv1_filters = 32;
  std::size_t conv2_filters = 64;  // both convolutions of the second block
  std::size_t dense_units = 500;
  std::size_t num_classes = 2;
  double dropout_rate = 0.5;
  double l2_lambda = 0.01;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Output extents of one stage of the stack, for a single sample.
struct StageShape {
  std::string name;
  Shape output;  // [C, H, W] or [features]
};

/// The ten stages in order, with per-sample output shapes. Throws
/// ConfigError naming the first stage whose output would be empty.
std::vector<StageShape> plan_stages(const ModelConfig& cfg);

/// Validates `cfg` (see plan_stages) and returns the flattened feature width.
std::size_t flatten_width(const ModelConfig& cfg);

struct ModelParams {
  Conv2DParams conv1;
  Conv2DParams conv2;
  Conv2DParams conv3;
  DenseParams fc1;
  DenseParams fc2;
};

/// Parameter visitor: name, tensor, and whether it is a kernel (L2-regularized).
using ParamVisitor = std::function<void(const std::string& name, Tensor& tensor, bool is_kernel)>;
using ConstParamVisitor = std::function<void(const std::string& name, const Tensor& tensor, bool is_kernel)>;

/// Visits the ten parameter tensors in the fixed checkpoint order.
void for_each_param(ModelParams& params, const ParamVisitor& visit);
void for_each_param(const ModelParams& params, const ConstParamVisitor& visit);

/// Zero tensors shaped like the parameters of `cfg`.
ModelParams zero_params(const ModelConfig& cfg);

struct ForwardCaches {
  Conv2DCache conv1;
  ReluCache relu1;
  MaxPoolCache pool1;
  Conv2DCache conv2;
  ReluCache relu2;
  Conv2DCache conv3;
  ReluCache relu3;
  MaxPoolCache pool2;
  Shape pooled_shape;
  DenseCache fc1;
  ReluCache relu4;
  DropoutCache dropout;
  DenseCache fc2;
};

struct ForwardResult {
  Tensor probs;            // [B, num_classes]
  Tensor logits;           // pre-softmax scores
  Tensor last_conv;        // post-ReLU output of the final convolution, pre-pooling
  ForwardCaches caches;
};

class SNeurodCNNModel {
 public:
  SNeurodCNNModel(ModelConfig cfg, ModelParams params);

  const ModelConfig& config() const noexcept { return cfg_; }
  ModelParams& params() noexcept { return params_; }
  const ModelParams& params() const noexcept { return params_; }

  /// x is [B, 1, H, W] matching the configured resolution.
  ForwardResult forward(const Tensor& x, Mode mode, Prng& rng) const;

  /// Eval-mode class probabilities.
  Tensor predict(const Tensor& x) const;

  /// Data-loss gradients (no L2 term) for every parameter, given dL/dlogits.
  ModelParams backward(const ForwardCaches& caches, const Tensor& dlogits) const;

  /// dL/d(last_conv) for the given dL/dlogits; stops before the convolutions.
  Tensor backward_to_last_conv(const ForwardCaches& caches, const Tensor& dlogits) const;

  static const std::vector<std::string>& stage_names();

 private:
  Tensor backward_head(const ForwardCaches& caches, const Tensor& dlogits, ModelParams* grads) const;

  ModelConfig cfg_;
  ModelParams params_;
};

/// Glorot-uniform kernels and zero biases, deterministic for a given seed.
SNeurodCNNModel build_model(const ModelConfig& cfg, Prng& rng);

std::size_t param_count(const SNeurodCNNModel& model);

// ---------------------------------------------------------------------------
// Checkpoints: "SNDC", u32 LE version, u64 LE header length, JSON header,
// then little-endian float64 payloads in descriptor order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::int64_t epoch = 0;
  double best_val_loss = 0.0;  // non-finite values are stored as null and read back as +inf
};

struct Checkpoint {
  SNeurodCNNModel model;
  CheckpointMeta meta;
};

void save_checkpoint(const SNeurodCNNModel& model, const std::filesystem::path& path, const CheckpointMeta& meta = {});

/// Throws CheckpointError with a distinct kind for each failure mode; nothing
/// partial is ever returned.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sneurod
