#include "sneurod/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

namespace sneurod {

double l2_penalty(const ModelParams& params) {
  double total = 0.0;
  for_each_param(params, [&](const std::string&, const Tensor& t, bool kernel) {
    if (!kernel) return;
    for (double w : t.values()) total += w * w;
  });
  return total;
}

LossResult cross_entropy_loss(const Tensor& probs, std::span<const int> labels, const ModelParams& params,
                              double l2_lambda) {
  if (probs.rank() != 2) throw ShapeError("cross_entropy_loss: probs must be [B, K], got " + shape_string(probs.shape()));
  const std::size_t batch = probs.dim(0), classes = probs.dim(1);
  if (labels.size() != batch) {
    throw DataError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for batch of " +
                    std::to_string(batch));
  }
  LossResult r;
  r.dlogits = probs;
  double nll = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || std::size_t(y) >= classes) {
      throw DataError("label " + std::to_string(y) + " at batch index " + std::to_string(b) + " is out of range");
    }
    nll -= std::log(std::max(probs(b, std::size_t(y)), std::numeric_limits<double>::min()));
    r.dlogits(b, std::size_t(y)) -= 1.0;
  }
  const double inv_b = 1.0 / double(batch);
  for (double& g : r.dlogits.values()) g *= inv_b;
  r.data_loss = nll * inv_b;
  r.loss = r.data_loss + (l2_lambda != 0.0 ? l2_lambda * l2_penalty(params) : 0.0);
  return r;
}

ModelParams backward_pass(const SNeurodCNNModel& model, const ForwardCaches& caches, const Tensor& dlogits,
                          double l2_lambda) {
  ModelParams grads = model.backward(caches, dlogits);
  if (l2_lambda != 0.0) {
    std::vector<const Tensor*> kernels;
    for_each_param(model.params(), [&](const std::string&, const Tensor& t, bool kernel) {
      if (kernel) kernels.push_back(&t);
    });
    std::size_t k = 0;
    for_each_param(grads, [&](const std::string&, Tensor& g, bool kernel) {
      if (!kernel) return;
      const Tensor& w = *kernels[k++];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * l2_lambda * w[i];
    });
  }
  return grads;
}

// ---------------------------------------------------------------------------

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               std::span<const std::string> names, AdamState& state, double learning_rate) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->shape() != grads[k]->shape()) {
      throw ShapeError("adam_step: gradient shape " + shape_string(grads[k]->shape()) + " does not match parameter " +
                       shape_string(params[k]->shape()));
    }
    if (!all_finite(*grads[k])) {
      const std::string name = k < names.size() ? names[k] : "#" + std::to_string(k);
      throw NumericError("non-finite gradient for parameter " + name);
    }
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");

  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.step));
  const double c2 = 1.0 - std::pow(b2, double(state.step));
  using Array = Eigen::Map<Eigen::ArrayXd>;
  using ConstArray = Eigen::Map<const Eigen::ArrayXd>;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto n = Eigen::Index(params[k]->size());
    Array w(params[k]->data(), n), m(state.m[k].data(), n), v(state.v[k].data(), n);
    const ConstArray g(grads[k]->data(), n);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    w -= learning_rate * (m / c1) / ((v / c2).sqrt() + state.epsilon);
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double learning_rate) {
  std::vector<Tensor*> p;
  std::vector<const Tensor*> g;
  std::vector<std::string> names;
  for_each_param(params, [&](const std::string& name, Tensor& t, bool) {
    p.push_back(&t);
    names.push_back(name);
  });
  for_each_param(grads, [&](const std::string&, const Tensor& t, bool) { g.push_back(&t); });
  adam_step(p, g, names, state, learning_rate);
}

// ---------------------------------------------------------------------------

SplitIndices split_indices(std::span<const int> labels, std::span<const std::string> subjects, const SplitSpec& spec) {
  const double fsum = spec.train + spec.validation + spec.test;
  if (spec.train < 0 || spec.validation < 0 || spec.test < 0 || std::abs(fsum - 1.0) > 1e-9) {
    throw ParameterError("split fractions must be non-negative and sum to 1");
  }
  const std::size_t n = labels.size();
  const std::size_t n_train = std::size_t(std::llround(spec.train * double(n)));
  const std::size_t n_val = std::min(n - n_train, std::size_t(std::llround(spec.validation * double(n))));
  Prng rng(spec.seed);
  SplitIndices out;

  std::vector<std::size_t> order;
  if (spec.subject_grouped) {
    if (subjects.size() != n) throw DataError("subject-grouped split needs one subject id per record");
    std::map<std::string, std::size_t> group_of;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, fresh] = group_of.try_emplace(subjects[i], groups.size());
      if (fresh) groups.emplace_back();
      groups[it->second].push_back(i);
    }
    for (std::size_t g : shuffle_indices(rng, groups.size())) {
      auto* dst = out.train.size() < n_train ? &out.train : out.validation.size() < n_val ? &out.validation : &out.test;
      dst->insert(dst->end(), groups[g].begin(), groups[g].end());
    }
  } else {
    if (spec.stratify) {
      if (n < 10) throw DataError("stratified split needs at least 10 records, got " + std::to_string(n));
      std::map<int, std::vector<std::size_t>> by_class;
      for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
      // Interleave classes by within-class quantile so every prefix is proportional.
      struct Keyed {
        double key;
        int label;
        std::size_t index;
      };
      std::vector<Keyed> keyed;
      keyed.reserve(n);
      for (auto& [label, members] : by_class) {
        const auto perm = shuffle_indices(rng, members.size());
        for (std::size_t j = 0; j < members.size(); ++j) {
          keyed.push_back({(double(j) + 0.5) / double(members.size()), label, members[perm[j]]});
        }
      }
      std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        return a.key != b.key ? a.key < b.key : a.label < b.label;
      });
      for (const auto& k : keyed) order.push_back(k.index);
    } else {
      order = shuffle_indices(rng, n);
    }
    out.train.assign(order.begin(), order.begin() + std::ptrdiff_t(n_train));
    out.validation.assign(order.begin() + std::ptrdiff_t(n_train), order.begin() + std::ptrdiff_t(n_train + n_val));
    out.test.assign(order.begin() + std::ptrdiff_t(n_train + n_val), order.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

DatasetSplit split_dataset(const Dataset& data, const SplitSpec& spec) {
  std::vector<int> labels;
  std::vector<std::string> subjects;
  for (const auto& r : data) {
    labels.push_back(r.label);
    subjects.push_back(r.subject_id);
  }
  const SplitIndices idx = split_indices(labels, subjects, spec);
  const auto take = [&](const std::vector<std::size_t>& which) {
    Dataset d;
    d.reserve(which.size());
    for (std::size_t i : which) d.push_back(data[i]);
    return d;
  };
  return {take(idx.train), take(idx.validation), take(idx.test)};
}

// ---------------------------------------------------------------------------

EarlyStopping::EarlyStopping(std::size_t patience, Monitor monitor)
    : patience_(patience),
      monitor_(monitor),
      best_value_(monitor == Monitor::kValLoss ? std::numeric_limits<double>::infinity()
                                               : -std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::improves(double value) const {
  return monitor_ == Monitor::kValLoss ? value < best_value_ : value > best_value_;
}

bool EarlyStopping::update(std::size_t epoch, double value, const ModelParams& params) {
  if (best_epoch_ == 0 || improves(value)) {
    best_epoch_ = epoch;
    best_value_ = value;
    best_params_ = params;
    wait_ = 0;
    return false;
  }
  ++wait_;
  return patience_ > 0 && wait_ >= patience_;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t count_correct(const Tensor& probs, std::span<const int> labels) {
  std::size_t correct = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const int predicted = probs(b, std::size_t(1)) >= 0.5 ? kLabelAD : kLabelMCI;
    correct += predicted == labels[b];
  }
  return correct;
}

}  // namespace

EvalSummary evaluate(const SNeurodCNNModel& model, const Dataset& data, std::size_t batch_size, double l2_lambda) {
  if (data.empty()) throw DataError("cannot evaluate an empty dataset");
  if (batch_size == 0) throw ParameterError("batch_size must be >= 1");
  const std::size_t n = data.size();
  EvalSummary s;
  s.probs = Tensor({n, model.config().num_classes});
  double nll = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch_size) {
    idx.resize(std::min(batch_size, n - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor probs = model.predict(stack_images(data, idx));
    const auto labels = gather_labels(data, idx);
    const LossResult l = cross_entropy_loss(probs, labels, model.params(), 0.0);
    nll += l.data_loss * double(idx.size());
    correct += count_correct(probs, labels);
    std::copy(probs.data(), probs.data() + probs.size(), s.probs.data() + start * probs.dim(1));
  }
  s.loss = nll / double(n) + (l2_lambda != 0.0 ? l2_lambda * l2_penalty(model.params()) : 0.0);
  s.accuracy = double(correct) / double(n);
  return s;
}

FitResult fit(SNeurodCNNModel& model, const Dataset& train, const Dataset& validation, const TrainConfig& cfg,
              const FitHooks& hooks) {
  if (train.empty()) throw DataError("training split is empty");
  if (validation.empty()) throw DataError("validation split is empty");
  if (cfg.batch_size == 0) throw ParameterError("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");

  Prng rng(cfg.seed);
  AdamState adam;
  EarlyStopping stopper(cfg.patience, cfg.monitor);
  FitResult result;
  const std::size_t n = train.size();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto order = shuffle_indices(rng, n);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, n - start));
      const Tensor x = stack_images(train, idx);
      const auto labels = gather_labels(train, idx);
      const ForwardResult fwd = model.forward(x, Mode::kTrain, rng);
      const LossResult loss = cross_entropy_loss(fwd.probs, labels, model.params(), cfg.l2_lambda);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      const ModelParams grads = backward_pass(model, fwd.caches, loss.dlogits, cfg.l2_lambda);
      adam_step(model.params(), grads, adam, cfg.learning_rate);
      loss_sum += loss.loss * double(idx.size());
      correct += count_correct(fwd.probs, labels);
    }

    const EvalSummary val = evaluate(model, validation, cfg.batch_size, cfg.l2_lambda);
    if (!std::isfinite(val.loss)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));

    EpochRecord rec{epoch, loss_sum / double(n), double(correct) / double(n), val.loss, val.accuracy};
    double& monitored = cfg.monitor == Monitor::kValLoss ? rec.val_loss : rec.val_acc;
    if (hooks.monitor_override) monitored = hooks.monitor_override(epoch, monitored);
    result.history.push_back(rec);
    if (hooks.on_epoch_end) hooks.on_epoch_end(rec, model);

    if (stopper.update(epoch, monitored, model.params())) {
      result.stopped_early = true;
      break;
    }
    if (hooks.stop_requested && hooks.stop_requested(rec)) {
      result.stopped_by_request = true;
      break;
    }
  }

  result.best_epoch = stopper.best_epoch();
  result.best_value = stopper.best_value();
  if (cfg.restore_best_weights && stopper.best_params()) model.params() = *stopper.best_params();
  return result;
}

void write_history_csv(std::span<const EpochRecord> history, std::ostream& out) {
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.train_acc, r.val_loss,
                  r.val_acc);
    out << line;
  }
}

void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_history_csv(history, out);
}

}  // namespace sneurod
