#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sneurod/tensor.hpp"

namespace sneurod {

/// Binary confusion counts; the positive class is AD (label 1).
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Predicts AD when p(AD) = probs(b, 1) >= threshold.
ConfusionMatrix confusion_from_predictions(const Tensor& probs, std::span<const int> labels, double threshold = 0.5);

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;  // sensitivity
  double specificity = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  // A ratio whose denominator was zero is reported as 0 with its flag set.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool specificity_undefined = false;
  bool f1_undefined = false;
  bool auc_undefined = false;
};

/// Accuracy, precision, recall, specificity and F1. Each score is a single
/// division of integer counts; F1 uses 2TP / (2TP + FP + FN), which equals the
/// harmonic mean of precision and recall whenever that is defined.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Threshold sweep from (0,0) to (1,1), one point per distinct score.
using RocCurve = std::vector<RocPoint>;

struct RocResult {
  double auc = 0.0;
  RocCurve curve;
};

/// Trapezoidal area under the swept ROC curve. Equals the Mann-Whitney
/// statistic (concordant + 0.5 * tied) / (P * N).
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Full report: thresholded scores plus threshold-free AUC (flagged when a
/// class is missing).
MetricsReport evaluate_predictions(const Tensor& probs, std::span<const int> labels, double threshold = 0.5);

std::string metrics_to_json(const MetricsReport& report, const ConfusionMatrix& cm);
void write_metrics_json(const MetricsReport& report, const ConfusionMatrix& cm, const std::filesystem::path& path);
void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);

}  // namespace sneurod
