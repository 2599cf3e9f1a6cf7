#include <gtest/gtest.h>

#include <cstring>
#include "json.hpp"

#include "oracles.hpp"
#include "sneurod/model.hpp"
#include "test_util.hpp"

namespace sneurod {
namespace {

using testing::read_bytes;
using testing::TempDir;
using testing::write_bytes;

ModelConfig tiny_config(std::size_t side = 14) {
  ModelConfig cfg;
  cfg.input_height = side;
  cfg.input_width = side;
  cfg.conv1_filters = 2;
  cfg.conv2_filters = 3;
  cfg.dense_units = 8;
  return cfg;
}

TEST(ModelShapes, StageNamesAndCount) {
  const auto stages = plan_stages(ModelConfig{});
  ASSERT_EQ(stages.size(), 10u);
  ASSERT_EQ(SNeurodCNNModel::stage_names().size(), 10u);
  for (std::size_t i = 0; i < stages.size(); ++i) EXPECT_EQ(stages[i].name, SNeurodCNNModel::stage_names()[i]);
  EXPECT_EQ(stages[0].output, (Shape{32, 94, 94}));
  EXPECT_EQ(stages[4].output, (Shape{64, 21, 21}));
  EXPECT_EQ(stages[9].output, (Shape{2}));
}

TEST(ModelShapes, FlattenWidthAtDefaultResolution) { EXPECT_EQ(flatten_width(ModelConfig{}), 28224u); }

TEST(ModelShapes, AgreesWithShapeOracle) {
  for (std::size_t side = 3; side <= 64; ++side) {
    const auto chain = oracle::shape_chain(long(side));
    ModelConfig cfg = tiny_config(side);
    if (chain.back() < 1) {
      EXPECT_THROW(plan_stages(cfg), ConfigError) << side;
    } else {
      const auto stages = plan_stages(cfg);
      EXPECT_EQ(long(stages[4].output[1]), chain.back()) << side;
    }
  }
}

TEST(ModelShapes, SmallestSupportedInput) {
  EXPECT_NO_THROW(plan_stages(tiny_config(14)));
  try {
    plan_stages(tiny_config(13));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("pool2"), std::string::npos) << e.what();
  }
}

TEST(ModelShapes, InvalidHyperParameters) {
  ModelConfig cfg = tiny_config();
  cfg.num_classes = 3;
  EXPECT_THROW(plan_stages(cfg), ConfigError);
  cfg = tiny_config();
  cfg.dropout_rate = 1.0;
  EXPECT_THROW(plan_stages(cfg), ConfigError);
  cfg = tiny_config();
  cfg.dense_units = 0;
  EXPECT_THROW(plan_stages(cfg), ConfigError);
}

TEST(ModelBuild, ParameterCountAtDefaultResolution) {
  Prng rng(0);
  const auto model = build_model(ModelConfig{}, rng);
  EXPECT_EQ(param_count(model), 14169246u);
  EXPECT_EQ(model.params().conv1.weights.size() + model.params().conv1.bias.size(), 320u);
  EXPECT_EQ(model.params().conv2.weights.size() + model.params().conv2.bias.size(), 18496u);
  EXPECT_EQ(model.params().conv3.weights.size() + model.params().conv3.bias.size(), 36928u);
}

TEST(ModelBuild, SameSeedSameWeights) {
  Prng a(7), b(7), c(8);
  const auto m1 = build_model(tiny_config(), a);
  const auto m2 = build_model(tiny_config(), b);
  const auto m3 = build_model(tiny_config(), c);
  EXPECT_EQ(m1.params().conv1.weights, m2.params().conv1.weights);
  EXPECT_EQ(m1.params().fc2.weights, m2.params().fc2.weights);
  EXPECT_NE(m1.params().conv1.weights, m3.params().conv1.weights);
  for (double v : m1.params().fc1.bias.values()) EXPECT_EQ(v, 0.0);
}

TEST(ModelBuild, RejectsMisshapenParameters) {
  ModelParams p = zero_params(tiny_config());
  p.fc1.weights = Tensor({5, 8});
  EXPECT_THROW(SNeurodCNNModel(tiny_config(), p), ShapeError);
}

TEST(ModelForward, BatchShapeAndDistribution) {
  Prng rng(3);
  const auto model = build_model(tiny_config(20), rng);
  const Tensor x = oracle::random_tensor(rng, {3, 1, 20, 20}, 0.0, 1.0);
  const Tensor p = model.predict(x);
  ASSERT_EQ(p.shape(), (Shape{3, 2}));
  for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(p(b, 0) + p(b, 1), 1.0, 1e-12);
  EXPECT_THROW(model.predict(Tensor({3, 1, 20, 21})), ShapeError);
}

TEST(ModelForward, EvalIsRepeatableTrainUsesDropout) {
  Prng rng(4);
  const auto model = build_model(tiny_config(20), rng);
  const Tensor x = oracle::random_tensor(rng, {2, 1, 20, 20}, 0.0, 1.0);
  Prng r1(1), r2(2);
  EXPECT_EQ(model.forward(x, Mode::kEval, r1).probs, model.forward(x, Mode::kEval, r2).probs);
  EXPECT_EQ(model.predict(x), model.predict(x));
  Prng t1(1), t2(2);
  EXPECT_NE(model.forward(x, Mode::kTrain, t1).logits, model.forward(x, Mode::kTrain, t2).logits);
}

TEST(ModelForward, ParamCountMatchesVisitor) {
  Prng rng(5);
  const auto model = build_model(tiny_config(), rng);
  std::size_t n = 0, tensors = 0;
  for_each_param(model.params(), [&](const std::string&, const Tensor& t, bool) {
    n += t.size();
    ++tensors;
  });
  EXPECT_EQ(tensors, 10u);
  EXPECT_EQ(param_count(model), n);
}

// ---------------------------------------------------------------- checkpoints

void expect_same_params(const ModelParams& a, const ModelParams& b) {
  std::vector<Tensor> left;
  for_each_param(a, [&](const std::string&, const Tensor& t, bool) { left.push_back(t); });
  std::size_t k = 0;
  for_each_param(b, [&](const std::string& name, const Tensor& t, bool) { EXPECT_EQ(left[k++], t) << name; });
}

CheckpointError::Kind load_failure(const std::filesystem::path& p) {
  try {
    load_checkpoint(p);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "checkpoint unexpectedly loaded";
  return CheckpointError::Kind::kIo;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  Prng rng(9);
  const auto model = build_model(tiny_config(18), rng);
  save_checkpoint(model, dir / "m.sndc", {12, 0.25});
  const auto loaded = load_checkpoint(dir / "m.sndc");
  EXPECT_EQ(loaded.model.config(), model.config());
  EXPECT_EQ(loaded.meta.epoch, 12);
  EXPECT_EQ(loaded.meta.best_val_loss, 0.25);
  expect_same_params(loaded.model.params(), model.params());
  const Tensor x = oracle::random_tensor(rng, {2, 1, 18, 18});
  EXPECT_EQ(loaded.model.predict(x), model.predict(x));
}

TEST(Checkpoint, PayloadSizeEqualsParameterCount) {
  TempDir dir;
  Prng rng(10);
  const auto model = build_model(tiny_config(), rng);
  save_checkpoint(model, dir / "m.sndc");
  const std::string bytes = read_bytes(dir / "m.sndc");
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  EXPECT_EQ(bytes.size() - 16 - header_len, 8 * param_count(model));
}

TEST(Checkpoint, InfiniteBestLossRoundTrips) {
  TempDir dir;
  Prng rng(11);
  save_checkpoint(build_model(tiny_config(), rng), dir / "m.sndc", {0, std::numeric_limits<double>::infinity()});
  EXPECT_EQ(load_checkpoint(dir / "m.sndc").meta.best_val_loss, std::numeric_limits<double>::infinity());
}

TEST(Checkpoint, CorruptFilesAreRejectedByKind) {
  TempDir dir;
  Prng rng(12);
  save_checkpoint(build_model(tiny_config(), rng), dir / "m.sndc");
  const std::string good = read_bytes(dir / "m.sndc");
  using Kind = CheckpointError::Kind;

  EXPECT_EQ(load_failure(dir / "missing.sndc"), Kind::kIo);

  write_bytes(dir / "t.sndc", good.substr(0, good.size() - 5));
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kTruncated);

  write_bytes(dir / "t.sndc", good.substr(0, 10));
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kTruncated);

  std::string bad = good;
  bad[0] = 'X';
  write_bytes(dir / "t.sndc", bad);
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kBadMagic);

  bad = good;
  bad[4] = 2;
  write_bytes(dir / "t.sndc", bad);
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kVersionMismatch);

  write_bytes(dir / "t.sndc", good + std::string(8, '\0'));
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kSizeMismatch);
}

std::string with_header(const std::string& good, const nlohmann::json& header) {
  std::uint64_t old_len = 0;
  std::memcpy(&old_len, good.data() + 8, 8);
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  std::string out = good.substr(0, 8);
  out.append(reinterpret_cast<const char*>(&len), 8);
  out += text;
  out += good.substr(16 + old_len);
  return out;
}

TEST(Checkpoint, EditedHeadersAreRejected) {
  TempDir dir;
  Prng rng(13);
  save_checkpoint(build_model(tiny_config(), rng), dir / "m.sndc");
  const std::string good = read_bytes(dir / "m.sndc");
  std::uint64_t len = 0;
  std::memcpy(&len, good.data() + 8, 8);
  const auto header = nlohmann::json::parse(good.substr(16, len));
  using Kind = CheckpointError::Kind;

  auto h = header;
  h["tensors"][0]["shape"] = {2, 1, 3, 4};
  write_bytes(dir / "t.sndc", with_header(good, h));
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kSizeMismatch);

  h = header;
  h["tensors"][1]["name"] = "conv9.bias";
  write_bytes(dir / "t.sndc", with_header(good, h));
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kBadHeader);

  h = header;
  h.erase("tensors");
  write_bytes(dir / "t.sndc", with_header(good, h));
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kBadHeader);

  h = header;
  h["config"]["input_height"] = 13;
  write_bytes(dir / "t.sndc", with_header(good, h));
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kBadHeader);

  h = header;
  h["config"]["dense_units"] = 9;
  write_bytes(dir / "t.sndc", with_header(good, h));
  EXPECT_EQ(load_failure(dir / "t.sndc"), Kind::kSizeMismatch);
}

}  // namespace
}  // namespace sneurod
