#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sneurod/data.hpp"
#include "sneurod/model.hpp"

namespace sneurod {

enum class Monitor { kValLoss, kValAccuracy };

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;  // 0 disables early stopping
  bool restore_best_weights = true;
  double l2_lambda = 0.01;
  std::uint64_t seed = 0;
  Monitor monitor = Monitor::kValLoss;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// ---------------------------------------------------------------------------
// Loss

struct LossResult {
  double loss = 0.0;       // data term + L2 penalty
  double data_loss = 0.0;  // mean cross-entropy
  Tensor dlogits;          // (probs - onehot) / B
};

/// Sum of squares over every kernel (biases excluded).
double l2_penalty(const ModelParams& params);

/// loss = -(1/B) sum log p_true + lambda * sum_kernels w^2.
LossResult cross_entropy_loss(const Tensor& probs, std::span<const int> labels, const ModelParams& params,
                              double l2_lambda);

/// Model gradients from dlogits, plus 2*lambda*w on every kernel.
ModelParams backward_pass(const SNeurodCNNModel& model, const ForwardCaches& caches, const Tensor& dlogits,
                          double l2_lambda);

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;  // zero-initialized on the first step
  std::vector<Tensor> v;
};

/// One Adam update over parallel parameter/gradient lists. The step counter is
/// incremented before the update. Throws NumericError naming the offending
/// parameter if any gradient is non-finite; nothing is modified in that case.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               std::span<const std::string> names, AdamState& state, double learning_rate);

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double learning_rate);

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  bool stratify = true;
  bool subject_grouped = false;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Disjoint, exhaustive, seeded assignment. Stratified splits keep every
/// class within one sample of its proportional share in every split.
SplitIndices split_indices(std::span<const int> labels, std::span<const std::string> subjects, const SplitSpec& spec);

struct DatasetSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
};

DatasetSplit split_dataset(const Dataset& data, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Early stopping

class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, Monitor monitor);

  /// Records the monitored value for `epoch` (1-based); snapshots `params` on
  /// strict improvement. Returns true when training should stop.
  bool update(std::size_t epoch, double value, const ModelParams& params);

  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_value() const noexcept { return best_value_; }
  std::size_t wait() const noexcept { return wait_; }
  const std::optional<ModelParams>& best_params() const noexcept { return best_params_; }

 private:
  bool improves(double value) const;

  std::size_t patience_;
  Monitor monitor_;
  std::size_t best_epoch_ = 0;
  double best_value_;
  std::size_t wait_ = 0;
  std::optional<ModelParams> best_params_;
};

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct FitHooks {
  /// Replaces the monitored validation value before early stopping sees it.
  std::function<double(std::size_t epoch, double measured)> monitor_override;
  std::function<void(const EpochRecord&, const SNeurodCNNModel&)> on_epoch_end;
  /// Asked after each epoch; returning true ends training there. Best weights
  /// are still restored.
  std::function<bool(const EpochRecord&)> stop_requested;
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_value = 0.0;
  bool stopped_early = false;      // patience ran out
  bool stopped_by_request = false;  // FitHooks::stop_requested returned true
};

struct EvalSummary {
  double loss = 0.0;  // data term + L2 penalty
  double accuracy = 0.0;
  Tensor probs;  // [N, 2]
};

/// Eval-mode pass in chunks of `batch_size`.
EvalSummary evaluate(const SNeurodCNNModel& model, const Dataset& data, std::size_t batch_size, double l2_lambda);

FitResult fit(SNeurodCNNModel& model, const Dataset& train, const Dataset& validation, const TrainConfig& cfg,
              const FitHooks& hooks = {});

void write_history_csv(std::span<const EpochRecord> history, std::ostream& out);
void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path);

}  // namespace sneurod
