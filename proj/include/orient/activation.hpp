#pragma once

#include <cmath>
#include <numbers>

namespace orient {

// Exact GELU, x * Phi(x) with Phi the standard normal CDF.
template <class S>
S gelu(S x) {
  return x * S(0.5) * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
}

// d/dx [x * Phi(x)] = Phi(x) + x * phi(x).
template <class S>
S gelu_derivative(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
  const S pdf = std::exp(S(-0.5) * x * x) * (std::numbers::inv_sqrtpi_v<S> / std::numbers::sqrt2_v<S>);
  return cdf + x * pdf;
}

}  // namespace orient
