#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "csi/core/adam.hpp"
#include "csi/core/rng.hpp"
#include "csi/error.hpp"
#include "csi/model/config.hpp"
#include "csi/model/network.hpp"
#include "csi/model/params.hpp"

namespace csi {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();

  /// NaN entries (no validation data) compare equal to each other.
  bool operator==(const EpochLog& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return epoch == o.epoch && same(train_loss, o.train_loss) && same(val_loss, o.val_loss) &&
           same(val_accuracy, o.val_accuracy);
  }
};

struct TrainResult {
  ModelParams params;  // best validation loss, or last epoch without validation data
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

struct TrainOptions {
  int threads = 1;
  std::function<void(const EpochLog&)> on_epoch;
};

inline double accuracy(const Prediction& pred, const std::vector<ArticleInput>& inputs) {
  if (inputs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hits = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) hits += hard_label(pred.articles[k].l_hat) == inputs[k].label;
  return static_cast<double>(hits) / static_cast<double>(inputs.size());
}

/// Mini-batch Adam with early stopping on validation loss. The epoch budget
/// is `epochs`, raised when needed so small training sets still get
/// `min_steps` updates. Initialization, batch order and dropout draw from
/// seeds derived from cfg.seed, so the result is identical for any thread
/// count.
inline TrainResult train_model(const std::vector<ArticleInput>& train, const std::vector<ArticleInput>& val,
                               const Matrix& y, const ModelConfig& cfg, const ModelShape& shape,
                               const TrainOptions& opt = {}) {
  cfg.validate();
  if (train.empty()) throw SizeError("train_model: empty training set");
  for (const auto& a : train)
    if (a.label != 0 && a.label != 1) throw ParameterError("train_model: unlabeled training article");
  for (const auto& a : val)
    if (a.label != 0 && a.label != 1) throw ParameterError("train_model: unlabeled validation article");

  Rng init_rng(derive_seed(cfg.seed, "init"));
  Rng order_rng(derive_seed(cfg.seed, "batches"));
  Rng drop_rng(derive_seed(cfg.seed, "dropout"));

  TrainResult result;
  ModelParams p = ModelParams::initialized(shape, init_rng);
  p.w_c.back() = cfg.score_weight_init;
  AdamConfig acfg;
  acfg.lr = cfg.lr;
  ModelOptimizer optim(p, acfg);
  ModelParams grad = ModelParams::zeros(shape);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  result.params = p;

  const std::size_t batches = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const int max_epochs =
      std::max(cfg.epochs, static_cast<int>((static_cast<std::size_t>(cfg.min_steps) + batches - 1) / batches));
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<const ArticleInput*> batch;
      for (std::size_t k = start; k < stop; ++k) batch.push_back(&train[order[k]]);
      const auto out = batch_gradient(batch, p, y, cfg, &drop_rng, grad, opt.threads);
      if (!std::isfinite(out.loss) || !grad.all_finite()) throw TrainingError("non-finite loss or gradient", epoch);
      optim.step(p, grad);
      p.w_c.back() = std::max(0.0, p.w_c.back());
      if (!p.all_finite()) throw TrainingError("non-finite parameters after update", epoch);
      loss_sum += out.loss * static_cast<double>(stop - start);
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    if (!val.empty()) {
      const auto pred = predict(p, cfg, val, y, opt.threads);
      std::vector<double> l_hat;
      std::vector<int> labels;
      for (std::size_t k = 0; k < val.size(); ++k) {
        l_hat.push_back(pred.articles[k].l_hat);
        labels.push_back(val[k].label);
      }
      entry.val_loss = csi_loss(l_hat, labels, p.w_u, cfg.lambda_reg);
      entry.val_accuracy = accuracy(pred, val);
    }
    result.log.push_back(entry);
    if (opt.on_epoch) opt.on_epoch(entry);

    if (val.empty()) {
      result.params = p;
      result.best_epoch = epoch;
      continue;
    }
    if (entry.val_loss < best) {
      best = entry.val_loss;
      result.params = p;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace csi
