#pragma once

// Central finite-difference checks of the analytic gradients, run in
// double precision.

#include <cmath>
#include <string>
#include <vector>

#include "orient/head.hpp"
#include "orient/model.hpp"
#include "orient/training.hpp"

namespace orient {

// |a - b| / (|a| + |b| + 1e-8); stays bounded when both are near zero.
inline double guarded_rel_error(double a, double b) { return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-8); }

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

namespace detail {

// Walks every entry of `params`, comparing `grads` with the symmetric
// difference quotient of `loss`.
template <class LossFn>
void fd_compare(ParamSet<double>& params, const ParamSet<double>& grads, LossFn&& loss, double step,
                GradCheckResult& res) {
  for (const auto& spec : params.specs()) {
    for (std::size_t k = 0; k < spec.size(); ++k) {
      double& x = params.flat()[spec.offset + k];
      const double saved = x;
      x = saved + step;
      const double up = loss();
      x = saved - step;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grads.flat()[spec.offset + k];
      const double err = guarded_rel_error(analytic, numeric);
      ++res.checked;
      if (res.worst_tensor.empty() || err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_tensor = spec.name;
        res.worst_index = k;
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
    }
  }
}

}  // namespace detail

// Full model (patch embedding through loss) in eval mode.
inline GradCheckResult grad_check(ModelParams<double> params, const PreparedSample& sample, double step = 1e-4) {
  ModelParams<double> grads = params.zeros_like();
  sample_loss_and_grad(sample, params, Mode::eval, nullptr, grads);
  auto loss = [&] {
    return softmax_cross_entropy(model_forward(sample.crops, params, Mode::eval, nullptr), sample.label).loss;
  };
  GradCheckResult res;
  detail::fd_compare(params.encoder.tensors, grads.encoder.tensors, loss, step, res);
  detail::fd_compare(params.head_tensors(), grads.head_tensors(), loss, step, res);
  return res;
}

// Head alone with a fixed dropout mask; also checks d loss / d h_cls.
inline GradCheckResult head_grad_check(HeadParams<double> params, Vec<double> h, const Vec<double>& mask,
                                       RotationClass label, double step = 1e-4) {
  HeadParams<double> grads = params;
  grads.tensors.set_zero();
  HeadCache<double> cache;
  const auto ce = softmax_cross_entropy(head_forward_masked<double>(h, params, mask, &cache), label);
  const Vec<double> dh = head_backward(ce.grad, cache, params, grads);
  auto loss = [&] { return softmax_cross_entropy(head_forward_masked<double>(h, params, mask), label).loss; };

  GradCheckResult res;
  detail::fd_compare(params.tensors, grads.tensors, loss, step, res);

  ParamSet<double> input;
  input.add("h_cls", static_cast<int>(h.size()));
  ParamSet<double> input_grad = input.zeros_like();
  for (Eigen::Index i = 0; i < h.size(); ++i) input_grad.flat()[static_cast<std::size_t>(i)] = dh(i);
  auto input_loss = [&] {
    Vec<double> hh = h;
    for (Eigen::Index i = 0; i < h.size(); ++i) hh(i) = input.flat()[static_cast<std::size_t>(i)];
    return softmax_cross_entropy(head_forward_masked<double>(hh, params, mask), label).loss;
  };
  for (Eigen::Index i = 0; i < h.size(); ++i) input.flat()[static_cast<std::size_t>(i)] = h(i);
  detail::fd_compare(input, input_grad, input_loss, step, res);
  return res;
}

}  // namespace orient
