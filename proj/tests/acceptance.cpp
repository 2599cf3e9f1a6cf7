// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.
// Tolerances and workloads are fixed here and nowhere else.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sneurod/cli.hpp"
#include "sneurod/config.hpp"
#include "sneurod/explain.hpp"
#include "sneurod/metrics.hpp"
#include "sneurod/training.hpp"

namespace sneurod {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------- pinned settings

constexpr double kGradStep = 1e-6;
constexpr double kGradRelTol = 1e-5;
constexpr double kGradRelFloor = 1e-4;  // denominator floor for near-zero gradients
constexpr double kGradMaxSeconds = 30.0;
constexpr std::size_t kGradSide = 14;  // smallest input the stack admits
constexpr int kGradSeeds = 5;

constexpr int kLayerInstances = 100;
constexpr double kLayerTol = 1e-12;

constexpr int kMetricSets = 1000;
constexpr std::size_t kMaxAucSet = 200;
constexpr double kAucTol = 1e-12;

constexpr std::size_t kE2eImages = 400;
constexpr std::uint64_t kE2eSynthSeed = 7;
constexpr double kE2eBudgetSeconds = 600.0;
constexpr double kE2eTrainBudgetSeconds = 560.0;  // leaves room for data loading and evaluation
constexpr double kE2eMinAccuracy = 0.95;
constexpr double kE2eMinAuc = 0.97;

constexpr double kGammaBrightness = 0.3;
constexpr double kGammaValue = 0.2;
constexpr std::uint64_t kGammaSeeds[] = {1, 2, 3};
constexpr std::size_t kGammaImages = 400;
constexpr std::size_t kGammaSide = 32;
constexpr std::size_t kGammaEpochs = 60;  // enough Adam steps that both runs settle; short runs compare oscillating checkpoints

constexpr double kCamMinShare = 0.8;

// ---------------------------------------------------------------- harness

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Tensor single_image(const SliceRecord& r) {
  return r.image.reshaped({1, 1, r.image.dim(1), r.image.dim(2)});
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  std::vector<const Tensor*> lhs;
  for_each_param(a, [&](const std::string&, const Tensor& t, bool) { lhs.push_back(&t); });
  std::size_t k = 0;
  bool same = true;
  for_each_param(b, [&](const std::string&, const Tensor& t, bool) { same = same && *lhs[k++] == t; });
  return same;
}

// Mirrors the train command: load, filter by plane, gamma, split.
DatasetSplit pipeline_split(const RunConfig& rc) {
  Dataset data = load_manifest(rc.data.manifest, rc.data.image_root);
  if (rc.data.plane) std::erase_if(data, [&](const SliceRecord& r) { return r.plane != *rc.data.plane; });
  if (rc.data.gamma) apply_gamma(data, *rc.data.gamma);
  return split_dataset(data, rc.data.split_spec());
}

struct Workspace {
  fs::path root = fs::temp_directory_path() / ("sneurod_acceptance_" + std::to_string(::getpid()));
  Workspace() {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
};

// ---------------------------------------------------------------- criteria

Outcome gradient_correctness() {
  const auto started = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  for (int seed = 1; seed <= kGradSeeds; ++seed) {
    ModelConfig cfg;
    cfg.input_height = cfg.input_width = kGradSide;
    cfg.conv1_filters = 2;
    cfg.conv2_filters = 2;
    cfg.dense_units = 8;
    Prng rng{std::uint64_t(seed)};
    auto model = build_model(cfg, rng);
    // Non-zero biases so every path carries signal.
    for_each_param(model.params(), [&](const std::string&, Tensor& t, bool kernel) {
      if (!kernel)
        for (double& v : t.values()) v = rng.uniform(0.0, 0.2);
    });
    const Tensor x = oracle::random_tensor(rng, {4, 1, kGradSide, kGradSide}, 0, 1);
    const std::vector<int> labels{0, 1, 1, 0};
    const double lambda = cfg.l2_lambda;
    // Train mode with a fixed dropout mask: every evaluation reseeds identically.
    const std::uint64_t mask_seed = 1000 + std::uint64_t(seed);
    const auto loss = [&] {
      Prng mask(mask_seed);
      return cross_entropy_loss(model.forward(x, Mode::kTrain, mask).probs, labels, model.params(), lambda).loss;
    };
    Prng mask(mask_seed);
    const auto fwd = model.forward(x, Mode::kTrain, mask);
    const auto lr = cross_entropy_loss(fwd.probs, labels, model.params(), lambda);
    const ModelParams grads = backward_pass(model, fwd.caches, lr.dlogits, lambda);
    std::vector<const Tensor*> analytic;
    for_each_param(grads, [&](const std::string&, const Tensor& g, bool) { analytic.push_back(&g); });
    std::size_t k = 0;
    for_each_param(model.params(), [&](const std::string& name, Tensor& p, bool) {
      const Tensor numeric = oracle::central_difference(p, loss, kGradStep);
      const double err = oracle::max_relative_error(*analytic[k++], numeric, kGradRelFloor);
      if (err > worst) {
        worst = err;
        worst_name = name;
      }
    });
  }
  const double secs = std::chrono::duration<double>(Clock::now() - started).count();
  return {worst <= kGradRelTol && secs < kGradMaxSeconds,
          fmt("%d seeds, %zux%zu input, max rel err %.2e (%s) <= %.0e, %.2fs < %.0fs", kGradSeeds, kGradSide, kGradSide,
              worst, worst_name.c_str(), kGradRelTol, secs, kGradMaxSeconds)};
}

Outcome layer_oracles() {
  Prng rng(11);
  double conv_err = 0.0, dense_err = 0.0, pool_err = 0.0;
  const auto max_abs = [](const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
  };
  for (int t = 0; t < kLayerInstances; ++t) {
    const std::size_t b = 1 + rng.uniform_index(3), c = 1 + rng.uniform_index(4), o = 1 + rng.uniform_index(5);
    const std::size_t h = 3 + rng.uniform_index(10), w = 3 + rng.uniform_index(10);
    const Tensor x = oracle::random_tensor(rng, {b, c, h, w});
    const Conv2DParams cp{oracle::random_tensor(rng, {o, c, 3, 3}), oracle::random_tensor(rng, {o})};
    conv_err = std::max(conv_err, max_abs(conv2d_forward(x, cp).y, oracle::naive_conv(x, cp.weights, cp.bias)));

    const std::size_t in = 1 + rng.uniform_index(40), out = 1 + rng.uniform_index(12);
    const Tensor xd = oracle::random_tensor(rng, {b, in});
    const DenseParams dp{oracle::random_tensor(rng, {in, out}), oracle::random_tensor(rng, {out})};
    dense_err = std::max(dense_err, max_abs(dense_forward(xd, dp).y, oracle::naive_dense(xd, dp.weights, dp.bias)));

    const Tensor xp = oracle::random_tensor(rng, {b, c, 2 + rng.uniform_index(11), 2 + rng.uniform_index(11)});
    pool_err = std::max(pool_err, max_abs(maxpool2_forward(xp).y, oracle::naive_maxpool(xp)));
  }
  return {conv_err <= kLayerTol && dense_err <= kLayerTol && pool_err <= kLayerTol,
          fmt("%d instances each, max abs err conv %.1e dense %.1e pool %.1e <= %.0e", kLayerInstances, conv_err,
              dense_err, pool_err, kLayerTol)};
}

Outcome metric_oracles() {
  Prng rng(12);
  int metric_mismatch = 0;
  double auc_err = 0.0;
  for (int t = 0; t < kMetricSets; ++t) {
    const std::size_t n = 2 + rng.uniform_index(kMaxAucSet - 1);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = t % 2 == 0;  // coarse scores force ties
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = int(rng.uniform_index(2));
      s[i] = coarse ? double(rng.uniform_index(11)) / 10.0 : rng.uniform();
    }
    Tensor probs({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
      probs(i, 0) = 1.0 - s[i];
      probs(i, 1) = s[i];
    }
    // Hand tally, then each score as a ratio of integer counts.
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool pos = s[i] >= 0.5;
      tp += pos && y[i] == 1;
      tn += !pos && y[i] == 0;
      fp += pos && y[i] == 0;
      fn += !pos && y[i] == 1;
    }
    const ConfusionMatrix cm = confusion_from_predictions(probs, y);
    const MetricsReport r = compute_metrics(cm);
    bool ok = cm == ConfusionMatrix{tp, tn, fp, fn};
    ok = ok && r.accuracy == double(tp + tn) / double(n);
    ok = ok && (tp + fp == 0 ? r.precision_undefined : r.precision == double(tp) / double(tp + fp));
    ok = ok && (tp + fn == 0 ? r.recall_undefined : r.recall == double(tp) / double(tp + fn));
    ok = ok && (tn + fp == 0 ? r.specificity_undefined : r.specificity == double(tn) / double(tn + fp));
    ok = ok && (2 * tp + fp + fn == 0 ? r.f1_undefined : r.f1 == double(2 * tp) / double(2 * tp + fp + fn));
    metric_mismatch += !ok;

    const bool both = std::count(y.begin(), y.end(), 1) > 0 && std::count(y.begin(), y.end(), 0) > 0;
    if (both) auc_err = std::max(auc_err, std::abs(roc_auc(s, y).auc - oracle::pairwise_auc(s, y)));
  }
  return {metric_mismatch == 0 && auc_err <= kAucTol,
          fmt("%d sets up to %zu samples, %d metric mismatches, max AUC err %.1e <= %.0e", kMetricSets, kMaxAucSet,
              metric_mismatch, auc_err, kAucTol)};
}

Outcome default_constants() {
  const ModelConfig mc;
  const TrainConfig tc;
  const AdamState adam;
  std::vector<std::string> bad;
  const auto want = [&](bool ok, const char* what) {
    if (!ok) bad.push_back(what);
  };
  want(kKernelSize == 3, "kernel 3x3");
  std::vector<std::size_t> depths;
  for (const auto& st : plan_stages(mc))
    if (st.name.rfind("conv", 0) == 0) depths.push_back(st.output.at(0));
  want(depths == std::vector<std::size_t>{32, 64, 64}, "conv depths 32/64/64");
  Prng rng(0);
  const auto model = build_model(mc, rng);
  want(model.params().conv1.weights.shape() == Shape{32, 1, 3, 3}, "conv1 kernel shape");
  want(model.params().conv3.weights.shape() == Shape{64, 64, 3, 3}, "conv3 kernel shape");
  want(mc.dense_units == 500 && model.params().fc1.weights.dim(1) == 500, "dense 500");
  want(mc.num_classes == 2, "two classes");
  want(mc.dropout_rate == 0.5, "dropout 0.5");
  want(mc.l2_lambda == 0.01 && tc.l2_lambda == 0.01, "L2 0.01");
  want(tc.learning_rate == 1e-4, "Adam lr 1e-4");
  want(adam.beta1 == 0.9 && adam.beta2 == 0.999, "Adam betas");
  want(tc.batch_size == 32, "batch 32");
  want(tc.max_epochs == 100, "epochs 100");
  want(tc.patience == 5 && tc.restore_best_weights && tc.monitor == Monitor::kValLoss, "patience 5 on val loss");
  // A config file that only names the data must resolve to the same constants.
  const RunConfig rc = run_config_from_json(nlohmann::json::parse(R"({"data": {"manifest": "m.csv"}})"), ".");
  want(rc.model == mc && rc.train == tc, "config file defaults");
  std::string missing;
  for (const auto& b : bad) missing += (missing.empty() ? "" : ", ") + b;
  return {bad.empty(), bad.empty() ? "all model, optimizer and schedule defaults match" : "mismatch: " + missing};
}

// Independent simulation: strict improvement resets the wait, patience
// consecutive non-improving epochs stop training.
struct StopTrace {
  std::size_t stop_epoch, best_epoch;
  bool stopped;
};
StopTrace simulate_early_stopping(const std::vector<double>& trace, std::size_t patience) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0, wait = 0;
  for (std::size_t e = 1; e <= trace.size(); ++e) {
    if (trace[e - 1] < best) {
      best = trace[e - 1];
      best_epoch = e;
      wait = 0;
    } else if (++wait >= patience) {
      return {e, best_epoch, true};
    }
  }
  return {trace.size(), best_epoch, false};
}

Outcome early_stopping_trace() {
  const std::vector<std::vector<double>> scenarios = {
      {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1},          // always improving
      {0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.1, 0.1},                    // best first, stops before a late dip
      {1.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.5},                    // ties do not count
      {1.0, 1.1, 1.1, 1.1, 1.1, 0.9, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0},  // reset on the fifth wait
      {1.0, 0.8, 0.85, 0.7, 0.75, 0.72, 0.71, 0.74, 0.73, 0.69, 0.9},  // noisy descent
      {2.0, 1.0, 1.0 - 1e-12, 1.5, 1.5, 1.5, 1.5, 1.5, 0.1},         // tiny improvements count
      {0.3, 0.2, 0.4},                                             // ends before patience runs out
      {1.0, 1.0, 1.0, 1.0, 1.0, 1.0},                               // flat from the start
      {5.0, 4.0, 6.0, 6.0, 6.0, 3.0, 6.0, 6.0, 6.0, 6.0, 6.0, 2.0},   // stops one epoch before a new best
      {0.9, 0.8, 0.9, 0.9, 0.9, 0.9, 0.7, 0.9, 0.9, 0.9, 0.9, 0.9, 0.6},  // two late recoveries
  };
  SynthSpec spec;
  spec.n = 12;
  spec.height = spec.width = 16;
  const Dataset data = synth_dataset(spec);
  const Dataset train(data.begin(), data.begin() + 8), val(data.begin() + 8, data.end());
  ModelConfig mc;
  mc.input_height = mc.input_width = 16;
  mc.conv1_filters = 2;
  mc.conv2_filters = 2;
  mc.dense_units = 4;
  int failures = 0;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto& trace = scenarios[s];
    const StopTrace want = simulate_early_stopping(trace, 5);
    Prng rng(s);
    auto model = build_model(mc, rng);
    TrainConfig tc;
    tc.batch_size = 4;
    tc.max_epochs = trace.size();
    tc.learning_rate = 1e-3;
    std::vector<ModelParams> snapshots;
    FitHooks hooks;
    hooks.monitor_override = [&](std::size_t epoch, double) { return trace[epoch - 1]; };
    hooks.on_epoch_end = [&](const EpochRecord&, const SNeurodCNNModel& m) { snapshots.push_back(m.params()); };
    const FitResult got = fit(model, train, val, tc, hooks);
    const bool ok = got.history.size() == want.stop_epoch && got.stopped_early == want.stopped &&
                    got.best_epoch == want.best_epoch && params_equal(model.params(), snapshots.at(want.best_epoch - 1));
    if (!ok) {
      std::cerr << "scenario " << s + 1 << ": epochs " << got.history.size() << " (want " << want.stop_epoch
                << "), best " << got.best_epoch << " (want " << want.best_epoch << ")\n";
    }
    failures += !ok;
  }
  return {failures == 0, fmt("%zu scenarios with patience 5, %d mismatches in stop epoch, best epoch or restored weights",
                             scenarios.size(), failures)};
}

struct EndToEnd {
  fs::path config;
  fs::path checkpoint;
  bool ready = false;
};

Outcome end_to_end(const Workspace& ws, EndToEnd& e2e) {
  const fs::path dir = ws.root / "e2e";
  const auto started = Clock::now();
  std::string err;
  if (run({"synth", "--seed", std::to_string(kE2eSynthSeed), "--n", std::to_string(kE2eImages), "--out",
           (dir / "synth").string()},
          &err) != 0)
    return {false, "synth failed: " + err};
  e2e.config = dir / "cfg.json";
  std::ofstream(e2e.config) << R"({"data": {"manifest": "synth/manifest.csv"}, "output": {"directory": "run"}})";
  if (run({"train", "--config", e2e.config.string(), "--time-budget", fmt("%.0f", kE2eTrainBudgetSeconds)}, &err) != 0)
    return {false, "train failed: " + err};
  const double secs = std::chrono::duration<double>(Clock::now() - started).count();
  e2e.checkpoint = dir / "run/model.sndc";
  e2e.ready = true;
  const auto metrics = nlohmann::json::parse(slurp(dir / "run/metrics.json"));
  const double acc = metrics["accuracy"].get<double>(), auc = metrics["auc"].get<double>();
  const std::string history = slurp(dir / "run/history.csv");
  const auto epochs = std::count(history.begin(), history.end(), '\n') - 1;
  return {acc >= kE2eMinAccuracy && auc >= kE2eMinAuc && secs <= kE2eBudgetSeconds,
          fmt("%zu images at 96x96, default settings, %ld epochs, test accuracy %.4f >= %.2f, AUC %.4f >= %.2f, %.0fs <= "
              "%.0fs",
              kE2eImages, long(epochs), acc, kE2eMinAccuracy, auc, kE2eMinAuc, secs, kE2eBudgetSeconds)};
}

double gamma_run_accuracy(std::uint64_t seed, bool use_gamma) {
  SynthSpec spec;
  spec.seed = seed;
  spec.n = kGammaImages;
  spec.height = spec.width = kGammaSide;
  spec.brightness = kGammaBrightness;
  Dataset data = synth_dataset(spec);
  if (use_gamma) apply_gamma(data, GammaSpec{kGammaValue});
  SplitSpec split_spec;
  split_spec.seed = seed;
  const DatasetSplit split = split_dataset(data, split_spec);
  ModelConfig mc;
  mc.input_height = mc.input_width = kGammaSide;
  TrainConfig tc;
  tc.seed = seed;
  tc.max_epochs = kGammaEpochs;
  Prng init(seed);
  auto model = build_model(mc, init);
  fit(model, split.train, split.validation, tc);
  return evaluate(model, split.test, tc.batch_size, 0.0).accuracy;
}

Outcome gamma_effect() {
  int holds = 0;
  std::string detail;
  for (const std::uint64_t seed : kGammaSeeds) {
    const double with = gamma_run_accuracy(seed, true), without = gamma_run_accuracy(seed, false);
    holds += with >= without;
    detail += fmt("%sseed %llu %.3f vs %.3f", detail.empty() ? "" : ", ", (unsigned long long)seed, with, without);
  }
  const int seeds = int(std::size(kGammaSeeds));
  return {2 * holds > seeds,
          fmt("brightness x%.1f, gamma %.1f vs none, %zux%zu, %zu images, %zu epochs: ", kGammaBrightness, kGammaValue,
              kGammaSide, kGammaSide, kGammaImages, kGammaEpochs) +
              detail + fmt("; holds %d/%d", holds, seeds)};
}

Outcome grad_cam_localization(const EndToEnd& e2e) {
  bool one_path = true;
  for (const auto& [side, pixel] : {std::pair<std::size_t, std::size_t>{33, 16}, {25, 12}}) {
    const Heatmap hm = grad_cam(fixture::one_path_model(side), fixture::single_pixel(side, pixel, pixel), 1);
    std::size_t best = 0;
    for (std::size_t i = 1; i < hm.values.size(); ++i)
      if (hm.values[i] > hm.values[best]) best = i;
    one_path = one_path && best == pixel * side + pixel;
  }
  if (!e2e.ready) return {false, "no trained model from the end-to-end run"};

  const RunConfig rc = load_run_config(e2e.config);
  const auto model = load_checkpoint(e2e.checkpoint).model;
  const DatasetSplit split = pipeline_split(rc);
  const Region cue = cue_region(rc.model.input_height, rc.model.input_width);
  const Region control = control_region(rc.model.input_height, rc.model.input_width);
  std::size_t eligible = 0, localized = 0;
  for (const auto& r : split.test) {
    if (r.label != kLabelAD) continue;
    const Tensor x = single_image(r);
    if (model.predict(x)(0, 1) < 0.5) continue;
    ++eligible;
    const Heatmap hm = grad_cam(model, x, 1);
    localized += region_mean(hm.values, cue) > region_mean(hm.values, control);
  }
  const double share = eligible ? double(localized) / double(eligible) : 0.0;
  return {one_path && eligible > 0 && share >= kCamMinShare,
          fmt("one-path argmax on bright pixel: %s; trained model cue > control on %zu/%zu correct class-1 test images "
              "(%.2f >= %.2f)",
              one_path ? "yes" : "no", localized, eligible, share, kCamMinShare)};
}

Outcome determinism_and_persistence(const Workspace& ws, const EndToEnd& e2e) {
  const fs::path dir = ws.root / "det";
  std::string err;
  if (run({"synth", "--n", "80", "--height", "48", "--width", "48", "--out", (dir / "synth").string()}, &err) != 0)
    return {false, "synth failed: " + err};
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"data": {"manifest": "synth/manifest.csv", "split_seed": 2},
    "model": {"input_height": 48, "input_width": 48},
    "train": {"max_epochs": 3, "seed": 5}})";
  for (const char* out : {"a", "b"})
    if (run({"train", "--config", cfg.string(), "--out", (dir / out).string()}, &err) != 0)
      return {false, "train failed: " + err};
  const bool history_same = slurp(dir / "a/history.csv") == slurp(dir / "b/history.csv");
  const bool model_same = slurp(dir / "a/model.sndc") == slurp(dir / "b/model.sndc");

  // Round trip: predictions before saving and after loading agree bit for bit.
  const fs::path source = e2e.ready ? e2e.checkpoint : dir / "a/model.sndc";
  const RunConfig rc = load_run_config(e2e.ready ? e2e.config : cfg);
  const auto model = load_checkpoint(source).model;
  Dataset test = pipeline_split(rc).test;
  std::vector<std::size_t> idx(test.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Tensor x = stack_images(test, idx);
  const Tensor before = model.predict(x);
  save_checkpoint(model, dir / "copy.sndc");
  const Tensor after = load_checkpoint(dir / "copy.sndc").model.predict(x);
  const bool predictions_same = before == after;
  return {history_same && model_same && predictions_same,
          fmt("two seeded runs: history.csv %s, model.sndc %s; round trip of %zu test predictions %s",
              history_same ? "identical" : "DIFFERENT", model_same ? "identical" : "DIFFERENT", test.size(),
              predictions_same ? "bit-identical" : "DIFFERENT")};
}

}  // namespace
}  // namespace sneurod

// Optional arguments name the criteria to run; the default is all of them.
int main(int argc, char** argv) {
  using namespace sneurod;
  const std::vector<std::string> only(argv + 1, argv + argc);
  Workspace ws;
  EndToEnd e2e;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-correctness", gradient_correctness},
      {"layer-oracles", layer_oracles},
      {"metric-oracles", metric_oracles},
      {"default-constants", default_constants},
      {"early-stopping-trace", early_stopping_trace},
      {"end-to-end-synthetic", [&] { return end_to_end(ws, e2e); }},
      {"gamma-effect", gamma_effect},
      {"grad-cam-localization", [&] { return grad_cam_localization(e2e); }},
      {"determinism-persistence", [&] { return determinism_and_persistence(ws, e2e); }},
  };
  int failed = 0, ran = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << ran - failed << "/" << ran << std::endl;
  return failed || ran == 0 ? 1 : 0;
}
