#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "orient/error.hpp"
#include "orient/model.hpp"

namespace orient {

struct AdamWConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// First/second moments mirror the parameter layout.
template <class S>
struct OptimState {
  ModelParams<S> m;
  ModelParams<S> v;
  std::int64_t step = 0;

  OptimState() = default;
  explicit OptimState(const ModelParams<S>& like) : m(like.zeros_like()), v(like.zeros_like()) {}
};

// One bias-corrected AdamW update over a flat buffer. Decoupled decay
// (theta -= lr * wd * theta) is applied before the adaptive term. `step` is
// the 1-based step count after incrementing.
template <class S>
void adamw_update(std::span<S> params, std::span<const S> grads, std::span<S> m, std::span<S> v, std::int64_t step,
                  const AdamWConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const double decay = 1.0 - cfg.learning_rate * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<S>(mi);
    v[i] = static_cast<S>(vi);
    const double m_hat = mi / bc1;
    const double v_hat = vi / bc2;
    double p = static_cast<double>(params[i]) * decay;
    p -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    params[i] = static_cast<S>(p);
  }
}

template <class S>
void adamw_step(ModelParams<S>& params, const ModelParams<S>& grads, OptimState<S>& state, const AdamWConfig& cfg) {
  bool finite = true;
  grads.for_each_set([&](const ParamSet<S>& g) { finite = finite && g.all_finite(); });
  if (!finite) throw NumericError("non-finite gradient");
  ++state.step;
  adamw_update<S>(params.encoder.tensors.flat(), grads.encoder.tensors.flat(), state.m.encoder.tensors.flat(),
                  state.v.encoder.tensors.flat(), state.step, cfg);
  adamw_update<S>(params.head_tensors().flat(), grads.head_tensors().flat(), state.m.head_tensors().flat(),
                  state.v.head_tensors().flat(), state.step, cfg);
}

template <class S>
double global_norm(const ModelParams<S>& grads) {
  double sq = 0.0;
  grads.for_each_set([&](const ParamSet<S>& g) { sq += squared_norm<S>(g.flat()); });
  return std::sqrt(sq);
}

// Rescales so the global L2 norm is at most max_norm. Returns the norm
// before clipping.
template <class S>
double clip_global_norm(ModelParams<S>& grads, double max_norm = 1.0) {
  const double norm = global_norm(grads);
  auto scale_all = [&](double factor) {
    const S s = static_cast<S>(factor);
    grads.for_each_set([&](ParamSet<S>& g) {
      for (S& x : g.flat()) x *= s;
    });
  };
  if (norm > max_norm) {
    scale_all(max_norm / norm);
    // Low-precision rounding can leave the result a few ulps above the cap.
    const double after = global_norm(grads);
    if (after > max_norm) scale_all(max_norm / after * (1.0 - 4.0 * std::numeric_limits<S>::epsilon()));
  }
  return norm;
}

}  // namespace orient
