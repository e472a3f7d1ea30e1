#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "csi/core/rng.hpp"
#include "csi/core/tensor.hpp"
#include "csi/error.hpp"

namespace csi {

enum class Activation { Tanh, Sigmoid, Identity };

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Identity: return x;
  }
  return x;
}

/// Derivative expressed through the activation output y.
inline double activation_grad_from_output(Activation a, double y) {
  switch (a) {
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

/// activation(W x + b).
inline Vector dense_forward(std::span<const double> x, const Matrix& w, std::span<const double> b,
                            Activation act) {
  if (w.cols() != x.size() || w.rows() != b.size())
    throw ShapeError("dense_forward: W is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                     ", x has " + std::to_string(x.size()) + ", b has " + std::to_string(b.size()));
  Vector out(w.rows());
  affine(w, x, b, out);
  for (double& v : out) v = activate(act, v);
  if (!all_finite(out)) throw NumericError("dense_forward: non-finite output");
  return out;
}

/// Inverted-dropout mask: each entry is 0 with probability p, else 1/(1-p).
inline Vector dropout_mask(std::size_t dim, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout_mask: p must lie in [0, 1)");
  Vector mask(dim, 1.0);
  if (p == 0.0) return mask;
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep;
  return mask;
}

/// Uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Matrix& w, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.flat()) v = rng.uniform(-r, r);
}

}  // namespace csi
