#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "csi/core/tensor.hpp"
#include "csi/error.hpp"

namespace csi {

/// Central-difference gradient of f at x.
inline Vector finite_diff_grad(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                               double step = 1e-6) {
  Vector probe(x.begin(), x.end());
  Vector grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " + std::to_string(i));
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace csi
