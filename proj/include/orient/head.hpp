#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "orient/activation.hpp"
#include "orient/error.hpp"
#include "orient/image.hpp"
#include "orient/rng.hpp"
#include "orient/tensor.hpp"

namespace orient {

inline constexpr int kNumClasses = 4;
inline constexpr double kHeadDropout = 0.2;

enum class Mode { train, eval };

// dropout -> W1 (D/2 x D) -> GELU -> W2 (4 x D/2)
template <class S>
struct HeadParams {
  using Id = typename ParamSet<S>::Id;

  int dim = 0;
  double dropout_p = kHeadDropout;
  ParamSet<S> tensors;
  Id w1{}, b1{}, w2{}, b2{};

  HeadParams() = default;
  explicit HeadParams(int d, double p = kHeadDropout) : dim(d), dropout_p(p) {
    if (d < 2 || d % 2 != 0) throw InputError("classification head needs an even embedding width");
    if (p < 0.0 || p >= 1.0) throw InputError("dropout probability must be in [0, 1)");
    w1 = tensors.add("head.fc1.weight", d / 2, d);
    b1 = tensors.add("head.fc1.bias", d / 2);
    w2 = tensors.add("head.fc2.weight", kNumClasses, d / 2);
    b2 = tensors.add("head.fc2.bias", kNumClasses);
  }

  int hidden() const noexcept { return dim / 2; }

  void init(Rng& rng) {
    tensors.set_zero();
    tensors.fill_normal(w1, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
    tensors.fill_normal(w2, rng, 1.0 / std::sqrt(static_cast<double>(hidden())));
  }
};

// The single-linear-layer ablation: logits = W h + b, no dropout.
template <class S>
struct SingleLayerHeadParams {
  using Id = typename ParamSet<S>::Id;

  int dim = 0;
  ParamSet<S> tensors;
  Id w{}, b{};

  SingleLayerHeadParams() = default;
  explicit SingleLayerHeadParams(int d) : dim(d) {
    if (d < 1) throw InputError("classification head needs a positive embedding width");
    w = tensors.add("head.linear.weight", kNumClasses, d);
    b = tensors.add("head.linear.bias", kNumClasses);
  }

  void init(Rng& rng) {
    tensors.set_zero();
    tensors.fill_normal(w, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
  }
};

template <class S>
using Logits = Eigen::Matrix<S, kNumClasses, 1>;

template <class S>
struct HeadCache {
  Vec<S> input;    // h_cls
  Vec<S> mask;     // per-coordinate multiplier: 0 or 1/(1-p); all ones in eval
  Vec<S> dropped;  // input .* mask
  Vec<S> pre;      // W1 h + b1
  Vec<S> act;      // gelu(pre)
  bool valid = false;
};

// Forward with an explicit dropout mask (all ones for eval).
template <class S>
Logits<S> head_forward_masked(const Vec<S>& h, const HeadParams<S>& params, const Vec<S>& mask,
                              HeadCache<S>* cache = nullptr) {
  if (h.size() != params.dim || mask.size() != params.dim) throw InputError("head_forward: dimension mismatch");
  const auto& t = params.tensors;
  Vec<S> dropped = h.cwiseProduct(mask);
  Vec<S> pre = t.mat(params.w1) * dropped + t.vec(params.b1);
  Vec<S> act = pre.unaryExpr([](S v) { return gelu(v); });
  Logits<S> logits = t.mat(params.w2) * act + t.vec(params.b2);
  if (cache) {
    cache->input = h;
    cache->mask = mask;
    cache->dropped = std::move(dropped);
    cache->pre = std::move(pre);
    cache->act = std::move(act);
    cache->valid = true;
  }
  return logits;
}

// Inverted dropout mask: keep with probability 1-p, survivors scaled by 1/(1-p).
template <class S>
Vec<S> dropout_mask(int dim, double p, Rng& rng) {
  Vec<S> m(dim);
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  for (int i = 0; i < dim; ++i) m(i) = bernoulli(rng, p) ? S(0) : keep_scale;
  return m;
}

// Eval mode never touches rng.
template <class S>
Logits<S> head_forward(const Vec<S>& h, const HeadParams<S>& params, Mode mode, Rng* rng,
                       HeadCache<S>* cache = nullptr) {
  if (h.size() != params.dim) throw InputError("head_forward: dimension mismatch");
  if (mode == Mode::train && params.dropout_p > 0.0) {
    if (!rng) throw InputError("head_forward: train mode needs an rng");
    return head_forward_masked<S>(h, params, dropout_mask<S>(params.dim, params.dropout_p, *rng), cache);
  }
  return head_forward_masked<S>(h, params, Vec<S>::Ones(params.dim), cache);
}

// Returns d loss / d h_cls and accumulates parameter gradients.
template <class S>
Vec<S> head_backward(const Logits<S>& dlogits, const HeadCache<S>& cache, const HeadParams<S>& params,
                     HeadParams<S>& grads) {
  if (!cache.valid) throw InputError("head_backward: missing forward cache");
  const auto& t = params.tensors;
  auto& g = grads.tensors;
  g.mat(params.w2).noalias() += dlogits * cache.act.transpose();
  g.vec(params.b2) += dlogits;
  Vec<S> dpre = t.mat(params.w2).transpose() * dlogits;
  dpre.array() *= cache.pre.unaryExpr([](S v) { return gelu_derivative(v); }).array();
  g.mat(params.w1).noalias() += dpre * cache.dropped.transpose();
  g.vec(params.b1) += dpre;
  Vec<S> dh = t.mat(params.w1).transpose() * dpre;
  return dh.cwiseProduct(cache.mask);
}

template <class S>
struct LinearHeadCache {
  Vec<S> input;
  bool valid = false;
};

template <class S>
Logits<S> head_forward(const Vec<S>& h, const SingleLayerHeadParams<S>& params, Mode /*mode*/, Rng* /*rng*/,
                       LinearHeadCache<S>* cache = nullptr) {
  if (h.size() != params.dim) throw InputError("head_forward: dimension mismatch");
  if (cache) {
    cache->input = h;
    cache->valid = true;
  }
  return params.tensors.mat(params.w) * h + params.tensors.vec(params.b);
}

template <class S>
Vec<S> head_backward(const Logits<S>& dlogits, const LinearHeadCache<S>& cache,
                     const SingleLayerHeadParams<S>& params, SingleLayerHeadParams<S>& grads) {
  if (!cache.valid) throw InputError("head_backward: missing forward cache");
  grads.tensors.mat(params.w).noalias() += dlogits * cache.input.transpose();
  grads.tensors.vec(params.b) += dlogits;
  return params.tensors.mat(params.w).transpose() * dlogits;
}

template <class S>
struct LossAndGrad {
  S loss;
  Logits<S> grad;
};

// -log softmax(logits)[label] with max subtraction; grad = softmax - onehot.
template <class S>
LossAndGrad<S> softmax_cross_entropy(const Logits<S>& logits, RotationClass label) {
  const S mx = logits.maxCoeff();
  const Logits<S> shifted = logits.array() - mx;
  const Logits<S> e = shifted.array().exp();
  const S sum = e.sum();
  const S log_sum = std::log(sum);
  LossAndGrad<S> out;
  out.loss = log_sum - shifted(label.label());
  if (out.loss < S(0)) out.loss = S(0);
  out.grad = e / sum;
  out.grad(label.label()) -= S(1);
  return out;
}

// Argmax with ties resolved to the lowest label.
template <class S>
RotationClass predict(const Logits<S>& logits) {
  int best = 0;
  for (int i = 1; i < kNumClasses; ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  return RotationClass::from_label(best);
}

}  // namespace orient
