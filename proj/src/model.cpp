#include "sneurod/model.hpp"

#include <string>

namespace sneurod {
namespace {

void require_config(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

Conv2DParams zero_conv(std::size_t in_c, std::size_t out_c) {
  return {Tensor({out_c, in_c, kKernelSize, kKernelSize}), Tensor({out_c})};
}

Conv2DParams glorot_conv(Prng& rng, std::size_t in_c, std::size_t out_c) {
  const std::size_t area = kKernelSize * kKernelSize;
  return {glorot_uniform_init(rng, in_c * area, out_c * area, {out_c, in_c, kKernelSize, kKernelSize}),
          Tensor({out_c})};
}

DenseParams glorot_dense(Prng& rng, std::size_t in, std::size_t out) {
  return {glorot_uniform_init(rng, in, out, {in, out}), Tensor({out})};
}

}  // namespace

std::vector<StageShape> plan_stages(const ModelConfig& cfg) {
  require_config(cfg.input_channels >= 1, "input_channels must be >= 1");
  require_config(cfg.conv1_filters >= 1 && cfg.conv2_filters >= 1, "filter counts must be >= 1");
  require_config(cfg.dense_units >= 1, "dense_units must be >= 1");
  require_config(cfg.num_classes == 2, "num_classes must be 2 (MCI vs AD)");
  require_config(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
  require_config(cfg.l2_lambda >= 0.0, "l2_lambda must be >= 0");

  std::vector<StageShape> stages;
  std::size_t h = cfg.input_height, w = cfg.input_width;
  const auto conv = [&](const char* name, std::size_t filters) {
    if (h < kKernelSize || w < kKernelSize) {
      throw ConfigError("input " + std::to_string(cfg.input_height) + "x" + std::to_string(cfg.input_width) +
                        " too small: stage " + name + " receives " + std::to_string(h) + "x" + std::to_string(w) +
                        ", needs at least 3x3");
    }
    h -= 2;
    w -= 2;
    stages.push_back({name, {filters, h, w}});
  };
  const auto pool = [&](const char* name, std::size_t channels) {
    if (h < 2 || w < 2) {
      throw ConfigError("input " + std::to_string(cfg.input_height) + "x" + std::to_string(cfg.input_width) +
                        " too small: stage " + name + " receives " + std::to_string(h) + "x" + std::to_string(w) +
                        ", needs at least 2x2");
    }
    h /= 2;
    w /= 2;
    stages.push_back({name, {channels, h, w}});
  };

  conv("conv1_relu", cfg.conv1_filters);
  pool("pool1", cfg.conv1_filters);
  conv("conv2_relu", cfg.conv2_filters);
  conv("conv3_relu", cfg.conv2_filters);
  pool("pool2", cfg.conv2_filters);
  const std::size_t flat = cfg.conv2_filters * h * w;
  stages.push_back({"flatten", {flat}});
  stages.push_back({"fc1_relu", {cfg.dense_units}});
  stages.push_back({"dropout", {cfg.dense_units}});
  stages.push_back({"fc2", {cfg.num_classes}});
  stages.push_back({"softmax", {cfg.num_classes}});
  return stages;
}

std::size_t flatten_width(const ModelConfig& cfg) { return plan_stages(cfg)[5].output[0]; }

void for_each_param(ModelParams& p, const ParamVisitor& visit) {
  visit("conv1.weight", p.conv1.weights, true);
  visit("conv1.bias", p.conv1.bias, false);
  visit("conv2.weight", p.conv2.weights, true);
  visit("conv2.bias", p.conv2.bias, false);
  visit("conv3.weight", p.conv3.weights, true);
  visit("conv3.bias", p.conv3.bias, false);
  visit("fc1.weight", p.fc1.weights, true);
  visit("fc1.bias", p.fc1.bias, false);
  visit("fc2.weight", p.fc2.weights, true);
  visit("fc2.bias", p.fc2.bias, false);
}

void for_each_param(const ModelParams& p, const ConstParamVisitor& visit) {
  for_each_param(const_cast<ModelParams&>(p),
                 [&](const std::string& name, Tensor& t, bool kernel) { visit(name, t, kernel); });
}

ModelParams zero_params(const ModelConfig& cfg) {
  const std::size_t flat = flatten_width(cfg);
  return {zero_conv(cfg.input_channels, cfg.conv1_filters),
          zero_conv(cfg.conv1_filters, cfg.conv2_filters),
          zero_conv(cfg.conv2_filters, cfg.conv2_filters),
          {Tensor({flat, cfg.dense_units}), Tensor({cfg.dense_units})},
          {Tensor({cfg.dense_units, cfg.num_classes}), Tensor({cfg.num_classes})}};
}

SNeurodCNNModel::SNeurodCNNModel(ModelConfig cfg, ModelParams params) : cfg_(cfg), params_(std::move(params)) {
  const ModelParams expected = zero_params(cfg_);
  std::vector<Shape> want;
  for_each_param(expected, [&](const std::string&, const Tensor& t, bool) { want.push_back(t.shape()); });
  std::size_t k = 0;
  for_each_param(params_, [&](const std::string& name, const Tensor& t, bool) {
    if (t.shape() != want[k]) {
      throw ShapeError("parameter " + name + " has shape " + shape_string(t.shape()) + ", config requires " +
                       shape_string(want[k]));
    }
    ++k;
  });
}

const std::vector<std::string>& SNeurodCNNModel::stage_names() {
  static const std::vector<std::string> names = {"conv1_relu", "pool1",    "conv2_relu", "conv3_relu", "pool2",
                                                 "flatten",    "fc1_relu", "dropout",    "fc2",        "softmax"};
  return names;
}

ForwardResult SNeurodCNNModel::forward(const Tensor& x, Mode mode, Prng& rng) const {
  const Shape want = {x.rank() == 4 ? x.dim(0) : 0, cfg_.input_channels, cfg_.input_height, cfg_.input_width};
  if (x.shape() != want) {
    throw ShapeError("model input must be [B, " + std::to_string(cfg_.input_channels) + ", " +
                     std::to_string(cfg_.input_height) + ", " + std::to_string(cfg_.input_width) + "], got " +
                     shape_string(x.shape()));
  }
  ForwardResult out;
  ForwardCaches& c = out.caches;

  auto conv1 = conv2d_forward(x, params_.conv1);
  c.conv1 = std::move(conv1.cache);
  auto act1 = relu(conv1.y);
  c.relu1 = std::move(act1.cache);
  auto pool1 = maxpool2_forward(act1.y);
  c.pool1 = std::move(pool1.cache);

  auto conv2 = conv2d_forward(pool1.y, params_.conv2);
  c.conv2 = std::move(conv2.cache);
  auto act2 = relu(conv2.y);
  c.relu2 = std::move(act2.cache);
  auto conv3 = conv2d_forward(act2.y, params_.conv3);
  c.conv3 = std::move(conv3.cache);
  auto act3 = relu(conv3.y);
  c.relu3 = std::move(act3.cache);
  auto pool2 = maxpool2_forward(act3.y);
  c.pool2 = std::move(pool2.cache);
  out.last_conv = std::move(act3.y);

  const std::size_t batch = x.dim(0);
  c.pooled_shape = pool2.y.shape();
  const Tensor flat = pool2.y.reshaped({batch, pool2.y.size() / batch});

  auto fc1 = dense_forward(flat, params_.fc1);
  c.fc1 = std::move(fc1.cache);
  auto act4 = relu(fc1.y);
  c.relu4 = std::move(act4.cache);
  auto drop = dropout_forward(act4.y, cfg_.dropout_rate, mode, rng);
  c.dropout = std::move(drop.cache);
  auto fc2 = dense_forward(drop.y, params_.fc2);
  c.fc2 = std::move(fc2.cache);

  out.logits = std::move(fc2.y);
  out.probs = softmax(out.logits);
  return out;
}

Tensor SNeurodCNNModel::predict(const Tensor& x) const {
  Prng unused(0);
  return forward(x, Mode::kEval, unused).probs;
}

Tensor SNeurodCNNModel::backward_head(const ForwardCaches& c, const Tensor& dlogits, ModelParams* grads) const {
  auto g_fc2 = dense_backward(dlogits, c.fc2, params_.fc2);
  Tensor d = dropout_backward(g_fc2.dx, c.dropout);
  d = relu_backward(d, c.relu4);
  auto g_fc1 = dense_backward(d, c.fc1, params_.fc1);
  if (grads) {
    grads->fc2 = {std::move(g_fc2.dw), std::move(g_fc2.db)};
    grads->fc1 = {std::move(g_fc1.dw), std::move(g_fc1.db)};
  }
  return maxpool2_backward(g_fc1.dx.reshaped(c.pooled_shape), c.pool2);
}

Tensor SNeurodCNNModel::backward_to_last_conv(const ForwardCaches& caches, const Tensor& dlogits) const {
  return backward_head(caches, dlogits, nullptr);
}

ModelParams SNeurodCNNModel::backward(const ForwardCaches& c, const Tensor& dlogits) const {
  ModelParams g;
  Tensor d = backward_head(c, dlogits, &g);
  d = relu_backward(d, c.relu3);
  auto g3 = conv2d_backward(d, c.conv3, params_.conv3);
  d = relu_backward(g3.dx, c.relu2);
  auto g2 = conv2d_backward(d, c.conv2, params_.conv2);
  d = maxpool2_backward(g2.dx, c.pool1);
  d = relu_backward(d, c.relu1);
  auto g1 = conv2d_backward(d, c.conv1, params_.conv1);
  g.conv3 = {std::move(g3.dw), std::move(g3.db)};
  g.conv2 = {std::move(g2.dw), std::move(g2.db)};
  g.conv1 = {std::move(g1.dw), std::move(g1.db)};
  return g;
}

SNeurodCNNModel build_model(const ModelConfig& cfg, Prng& rng) {
  const std::size_t flat = flatten_width(cfg);
  ModelParams p;
  p.conv1 = glorot_conv(rng, cfg.input_channels, cfg.conv1_filters);
  p.conv2 = glorot_conv(rng, cfg.conv1_filters, cfg.conv2_filters);
  p.conv3 = glorot_conv(rng, cfg.conv2_filters, cfg.conv2_filters);
  p.fc1 = glorot_dense(rng, flat, cfg.dense_units);
  p.fc2 = glorot_dense(rng, cfg.dense_units, cfg.num_classes);
  return SNeurodCNNModel(cfg, std::move(p));
}

std::size_t param_count(const SNeurodCNNModel& model) {
  std::size_t total = 0;
  for_each_param(model.params(), [&](const std::string&, const Tensor& t, bool) { total += t.size(); });
  return total;
}

}  // namespace sneurod
