#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <thread>
#include <vector>

#include "orient/error.hpp"
#include "orient/model.hpp"
#include "orient/optim.hpp"
#include "orient/rng.hpp"
#include "orient/tiling.hpp"

namespace orient {

struct TrainConfig {
  EncoderConfig encoder = EncoderConfig::desk();
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  int max_epochs = 35;
  int patience = 5;
  int batch_size = 32;
  std::uint64_t seed = 0;
  CroppingMode cropping_mode = CroppingMode::dynamic;
  HeadMode head_mode = HeadMode::multi_layer;
  int max_tiles = kMaxTiles;
  int threads = 1;

  AdamWConfig adamw() const { return {learning_rate, beta1, beta2, eps, weight_decay}; }

  void validate() const {
    encoder.validate();
    if (!(learning_rate > 0) || !(eps > 0) || !(clip_norm > 0) || weight_decay < 0) {
      throw InputError("train config: learning_rate, eps and clip_norm must be positive, weight_decay non-negative");
    }
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw InputError("train config: betas must be in [0, 1)");
    if (max_epochs < 1 || patience < 0 || batch_size < 1 || max_tiles < 1 || threads < 1) {
      throw InputError("train config: max_epochs, batch_size, max_tiles and threads must be positive, patience >= 0");
    }
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LabeledImage {
  ImageBuffer image;
  RotationClass label;
};

// An image already cut into encoder crops.
struct PreparedSample {
  std::vector<ImageBuffer> crops;
  RotationClass label;
};

inline PreparedSample prepare_sample(const LabeledImage& s, const TrainConfig& cfg) {
  return {crops_for(s.image, cfg.cropping_mode, cfg.encoder.tile_px, cfg.max_tiles), s.label};
}

inline std::vector<PreparedSample> prepare_samples(const std::vector<LabeledImage>& samples, const TrainConfig& cfg) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(prepare_sample(s, cfg));
  return out;
}

template <class S>
struct SampleGradient {
  double loss = 0.0;
  ModelParams<S> grads;
};

// Loss and parameter gradient for one sample. `rng` drives dropout in
// train mode; pass nullptr with Mode::eval.
template <class S>
double sample_loss_and_grad(const PreparedSample& sample, const ModelParams<S>& params, Mode mode, Rng* rng,
                            ModelParams<S>& grads) {
  SampleForward<S> fwd;
  const Logits<S> logits = model_forward(sample.crops, params, mode, rng, &fwd);
  const auto ce = softmax_cross_entropy(logits, sample.label);
  model_backward(ce.grad, fwd, params, grads);
  return static_cast<double>(ce.loss);
}

// Mini-batch optimizer loop state. Per-sample gradients are computed into
// separate buffers and reduced in sample order, so the result does not
// depend on the thread count.
template <class S>
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, ModelParams<S> params)
      : cfg_(cfg), params_(std::move(params)), state_(params_), batch_grads_(params_.zeros_like()) {}

  // One optimizer step over `batch`; returns the mean loss. `salt` keys
  // the per-sample dropout streams.
  double step(std::span<const PreparedSample* const> batch, std::uint64_t salt) {
    if (batch.empty()) throw InputError("empty batch");
    const std::size_t n = batch.size();
    if (per_sample_.size() < n) per_sample_.resize(n, params_.zeros_like());
    std::vector<double> losses(n, 0.0);

    auto work = [&](std::size_t i) {
      per_sample_[i].for_each_set([](ParamSet<S>& p) { p.set_zero(); });
      Rng rng(mix_seed(mix_seed(cfg_.seed, salt), i));
      losses[i] = sample_loss_and_grad(*batch[i], params_, Mode::train, &rng, per_sample_[i]);
    };
    const int threads = std::min<int>(cfg_.threads, static_cast<int>(n));
    if (threads <= 1) {
      for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&work, t, threads, n] {
          for (std::size_t i = static_cast<std::size_t>(t); i < n; i += static_cast<std::size_t>(threads)) work(i);
        });
      }
      for (auto& th : pool) th.join();
    }

    batch_grads_.for_each_set([](ParamSet<S>& p) { p.set_zero(); });
    const S inv_n = S(1) / static_cast<S>(n);
    for (std::size_t i = 0; i < n; ++i) batch_grads_.add_scaled(per_sample_[i], inv_n);

    last_grad_norm_ = clip_global_norm(batch_grads_, cfg_.clip_norm);
    last_clipped_norm_ = global_norm(batch_grads_);
    if (!(last_clipped_norm_ <= cfg_.clip_norm + 1e-9)) {
      throw NumericError("gradient norm after clipping exceeds the cap");
    }
    adamw_step(params_, batch_grads_, state_, cfg_.adamw());
    const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n);
    if (!std::isfinite(mean)) throw NumericError("non-finite training loss");
    return mean;
  }

  const ModelParams<S>& params() const noexcept { return params_; }
  ModelParams<S>& params() noexcept { return params_; }
  const OptimState<S>& state() const noexcept { return state_; }
  double last_grad_norm() const noexcept { return last_grad_norm_; }
  double last_clipped_norm() const noexcept { return last_clipped_norm_; }

 private:
  TrainConfig cfg_;
  ModelParams<S> params_;
  OptimState<S> state_;
  ModelParams<S> batch_grads_;
  std::vector<ModelParams<S>> per_sample_;
  double last_grad_norm_ = 0.0;
  double last_clipped_norm_ = 0.0;
};

template <class S>
RotationClass classify_prepared(const PreparedSample& s, const ModelParams<S>& params) {
  return predict(model_forward(s.crops, params, Mode::eval, nullptr));
}

// Percentage of correctly classified samples.
template <class S>
double accuracy(const std::vector<PreparedSample>& samples, const ModelParams<S>& params) {
  if (samples.empty()) throw InputError("accuracy: no samples");
  std::size_t correct = 0;
  for (const auto& s : samples) correct += classify_prepared(s, params) == s.label ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(samples.size());
}

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainResult {
  ModelParams<float> best;
  std::vector<EpochStats> history;
  double best_val_acc = 0.0;
  int best_epoch = 0;
};

struct TrainHooks {
  std::function<void(const EpochStats&)> on_epoch;
};

inline ModelParams<float> init_model(const TrainConfig& cfg) {
  ModelParams<float> params(cfg.encoder, cfg.head_mode);
  Rng rng = derive_rng(cfg.seed, "init");
  params.init(rng);
  return params;
}

// Seeded shuffled mini-batch training with early stopping on validation
// accuracy. Returns the parameters of the best validation epoch (earliest
// on ties).
inline TrainResult train(const std::vector<LabeledImage>& train_set, const std::vector<LabeledImage>& val_set,
                         const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  cfg.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  if (val_set.empty()) throw InputError("validation set is empty");

  const auto train_prepared = prepare_samples(train_set, cfg);
  const auto val_prepared = prepare_samples(val_set, cfg);

  Trainer<float> trainer(cfg, init_model(cfg));
  Rng shuffle_rng = derive_rng(cfg.seed, "shuffle");
  std::vector<std::size_t> order(train_prepared.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.best_val_acc = -1.0;
  int since_best = 0;
  std::uint64_t step = 0;
  std::vector<const PreparedSample*> batch;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_prepared[order[i]]);
      loss_sum += trainer.step(batch, step++) * static_cast<double>(batch.size());
    }
    EpochStats stats{epoch, loss_sum / static_cast<double>(order.size()), accuracy(val_prepared, trainer.params())};
    result.history.push_back(stats);
    if (hooks.on_epoch) hooks.on_epoch(stats);

    if (stats.val_acc > result.best_val_acc) {
      result.best_val_acc = stats.val_acc;
      result.best_epoch = epoch;
      result.best = trainer.params();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

inline void write_history_csv(std::ostream& out, const std::vector<EpochStats>& history) {
  out << "epoch,train_loss,val_acc\n";
  out.precision(17);
  for (const auto& h : history) out << h.epoch << ',' << h.train_loss << ',' << h.val_acc << '\n';
}

}  // namespace orient
