#include "sneurod/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace sneurod {
namespace {

std::vector<double> positive_scores(const Tensor& probs) {
  if (probs.rank() != 2 || probs.dim(1) != 2) {
    throw ShapeError("expected [B, 2] class probabilities, got " + shape_string(probs.shape()));
  }
  std::vector<double> s(probs.dim(0));
  for (std::size_t b = 0; b < s.size(); ++b) s[b] = probs(b, std::size_t(1));
  return s;
}

// 0 with the flag raised when the denominator vanishes.
double ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : double(num) / double(den);
}

}  // namespace

ConfusionMatrix confusion_from_predictions(const Tensor& probs, std::span<const int> labels, double threshold) {
  const auto scores = positive_scores(probs);
  if (scores.size() != labels.size()) {
    throw DataError("confusion_from_predictions: " + std::to_string(scores.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("label at index " + std::to_string(i) + " is not binary");
    const bool predicted_ad = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted_ad ? cm.tp : cm.fn)++;
    } else {
      (predicted_ad ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("cannot compute metrics on an empty confusion matrix");
  MetricsReport r;
  bool unused = false;
  r.accuracy = ratio(cm.tp + cm.tn, cm.total(), unused);
  r.precision = ratio(cm.tp, cm.tp + cm.fp, r.precision_undefined);
  r.recall = ratio(cm.tp, cm.tp + cm.fn, r.recall_undefined);
  r.specificity = ratio(cm.tn, cm.tn + cm.fp, r.specificity_undefined);
  r.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, r.f1_undefined);
  return r;
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("roc_auc: scores and labels differ in length");
  std::uint64_t pos = 0, neg = 0;
  for (int y : labels) {
    if (y == 1) {
      ++pos;
    } else if (y == 0) {
      ++neg;
    } else {
      throw DataError("roc_auc: labels must be binary");
    }
  }
  if (pos == 0 || neg == 0) throw DataError("AUC is undefined: labels contain a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult r;
  r.curve.push_back({0.0, 0.0});
  // Integer trapezoid area in units of 1/(2PN): each threshold step adds
  // dFP * (TP_prev + TP_new).
  std::uint64_t tp = 0, fp = 0, twice_area = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    std::uint64_t dtp = 0, dfp = 0;
    for (; k < order.size() && scores[order[k]] == s; ++k) (labels[order[k]] == 1 ? dtp : dfp)++;
    twice_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    r.curve.push_back({double(fp) / double(neg), double(tp) / double(pos)});
  }
  r.auc = double(twice_area) / (2.0 * double(pos) * double(neg));
  return r;
}

MetricsReport evaluate_predictions(const Tensor& probs, std::span<const int> labels, double threshold) {
  MetricsReport r = compute_metrics(confusion_from_predictions(probs, labels, threshold));
  const auto scores = positive_scores(probs);
  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
  if (both) {
    r.auc = roc_auc(scores, labels).auc;
  } else {
    r.auc_undefined = true;
  }
  return r;
}

std::string metrics_to_json(const MetricsReport& r, const ConfusionMatrix& cm) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["specificity"] = r.specificity;
  j["f1"] = r.f1;
  j["auc"] = r.auc;
  j["undefined"] = {{"precision", r.precision_undefined},
                    {"recall", r.recall_undefined},
                    {"specificity", r.specificity_undefined},
                    {"f1", r.f1_undefined},
                    {"auc", r.auc_undefined}};
  j["confusion"] = {{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}};
  return j.dump(2) + "\n";
}

void write_metrics_json(const MetricsReport& report, const ConfusionMatrix& cm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << metrics_to_json(report, cm);
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "fpr,tpr\n";
  char line[64];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", p.fpr, p.tpr);
    out << line;
  }
}

}  // namespace sneurod
