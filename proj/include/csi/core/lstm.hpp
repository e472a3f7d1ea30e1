#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csi/core/layers.hpp"
#include "csi/core/rng.hpp"
#include "csi/core/tensor.hpp"
#include "csi/error.hpp"

namespace csi {

/// Standard LSTM without peepholes. Gate rows are stacked in the order
/// input, forget, output, candidate; each block has `hidden` rows.
struct LstmParams {
  Matrix w_x;  // 4H x D
  Matrix w_h;  // 4H x H
  Vector b;    // 4H

  LstmParams() = default;
  LstmParams(std::size_t input_dim, std::size_t hidden_dim)
      : w_x(4 * hidden_dim, input_dim), w_h(4 * hidden_dim, hidden_dim), b(4 * hidden_dim, 0.0) {}

  std::size_t input_dim() const noexcept { return w_x.cols(); }
  std::size_t hidden_dim() const noexcept { return w_h.cols(); }

  /// Glorot-uniform weights, forget-gate bias 1, other biases 0.
  void initialize(Rng& rng) {
    glorot_uniform(w_x, rng);
    glorot_uniform(w_h, rng);
    const std::size_t h = hidden_dim();
    std::fill(b.begin(), b.end(), 0.0);
    std::fill(b.begin() + static_cast<std::ptrdiff_t>(h), b.begin() + static_cast<std::ptrdiff_t>(2 * h), 1.0);
  }

  void check_shapes() const {
    const std::size_t h = hidden_dim();
    if (w_x.rows() != 4 * h || w_h.rows() != 4 * h || b.size() != 4 * h)
      throw ShapeError("LstmParams: inconsistent shapes");
  }

  bool operator==(const LstmParams&) const = default;
};

struct LstmGrads {
  Matrix w_x;
  Matrix w_h;
  Vector b;
  std::vector<Vector> inputs;
  Vector h0;
  Vector c0;
};

/// Everything the backward pass needs from one forward pass.
struct LstmCache {
  struct Step {
    Vector x;
    Vector h_prev;
    Vector c_prev;
    Vector i, f, o, g;
    Vector c;
    Vector tanh_c;
  };
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<Step> steps;
};

struct LstmOutput {
  Vector h_t;
  Vector c_t;
  LstmCache cache;
};

/// One recurrence step; fills `step` with the gate activations.
inline void lstm_step(std::span<const double> x, const Vector& h_prev, const Vector& c_prev,
                      const LstmParams& p, LstmCache::Step& step, Vector& preact) {
  const std::size_t h = p.hidden_dim();
  preact.assign(4 * h, 0.0);
  affine(p.w_x, x, p.b, preact);
  for (std::size_t r = 0; r < 4 * h; ++r) preact[r] += dot(p.w_h.row(r), h_prev);

  step.x.assign(x.begin(), x.end());
  step.h_prev = h_prev;
  step.c_prev = c_prev;
  step.i.resize(h);
  step.f.resize(h);
  step.o.resize(h);
  step.g.resize(h);
  step.c.resize(h);
  step.tanh_c.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    step.i[k] = sigmoid(preact[k]);
    step.f[k] = sigmoid(preact[h + k]);
    step.o[k] = sigmoid(preact[2 * h + k]);
    step.g[k] = std::tanh(preact[3 * h + k]);
    step.c[k] = step.f[k] * c_prev[k] + step.i[k] * step.g[k];
    step.tanh_c[k] = std::tanh(step.c[k]);
  }
}

inline LstmOutput lstm_forward(const std::vector<Vector>& seq, const LstmParams& p, const Vector& h0,
                               const Vector& c0) {
  p.check_shapes();
  if (seq.empty()) throw EmptySequenceError("lstm_forward: empty sequence");
  const std::size_t h = p.hidden_dim();
  if (h0.size() != h || c0.size() != h) throw ShapeError("lstm_forward: initial state has wrong size");

  LstmOutput out;
  out.cache.input_dim = p.input_dim();
  out.cache.hidden_dim = h;
  out.cache.steps.resize(seq.size());
  Vector h_prev = h0, c_prev = c0, preact;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].size() != p.input_dim())
      throw ShapeError("lstm_forward: step " + std::to_string(t) + " has dimension " +
                       std::to_string(seq[t].size()) + ", expected " + std::to_string(p.input_dim()));
    auto& step = out.cache.steps[t];
    lstm_step(seq[t], h_prev, c_prev, p, step, preact);
    for (std::size_t k = 0; k < h; ++k) h_prev[k] = step.o[k] * step.tanh_c[k];
    c_prev = step.c;
  }
  out.h_t = std::move(h_prev);
  out.c_t = std::move(c_prev);
  return out;
}

/// Backpropagation through time, seeded with dLoss/dh_T. Gradients are
/// accumulated into `grads`, which must be shaped like the parameters
/// (use lstm_zero_grads) so callers can sum over many sequences.
inline void lstm_backward_accumulate(const LstmCache& cache, const LstmParams& p, std::span<const double> grad_h_t,
                                     LstmGrads& grads) {
  const std::size_t h = cache.hidden_dim;
  if (cache.steps.empty()) throw StateError("lstm_backward: empty cache");
  if (grad_h_t.size() != h || p.hidden_dim() != h || p.input_dim() != cache.input_dim)
    throw ShapeError("lstm_backward: cache, parameters and gradient disagree on shape");
  if (grads.w_x.rows() != p.w_x.rows() || grads.w_x.cols() != p.w_x.cols() || grads.b.size() != p.b.size())
    throw ShapeError("lstm_backward: gradient buffers not shaped like parameters");

  grads.inputs.assign(cache.steps.size(), Vector(cache.input_dim, 0.0));
  Vector dh(grad_h_t.begin(), grad_h_t.end());
  Vector dc(h, 0.0);
  Vector dpre(4 * h);
  for (std::size_t t = cache.steps.size(); t-- > 0;) {
    const auto& s = cache.steps[t];
    for (std::size_t k = 0; k < h; ++k) {
      const double d_o = dh[k] * s.tanh_c[k];
      const double d_c = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
      const double d_i = d_c * s.g[k];
      const double d_g = d_c * s.i[k];
      const double d_f = d_c * s.c_prev[k];
      dpre[k] = d_i * s.i[k] * (1.0 - s.i[k]);
      dpre[h + k] = d_f * s.f[k] * (1.0 - s.f[k]);
      dpre[2 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
      dpre[3 * h + k] = d_g * (1.0 - s.g[k] * s.g[k]);
      dc[k] = d_c * s.f[k];
    }
    add_outer(grads.w_x, dpre, s.x);
    add_outer(grads.w_h, dpre, s.h_prev);
    add_into(grads.b, dpre);
    add_transposed_product(p.w_x, dpre, grads.inputs[t]);
    std::fill(dh.begin(), dh.end(), 0.0);
    add_transposed_product(p.w_h, dpre, dh);
  }
  grads.h0 = std::move(dh);
  grads.c0 = std::move(dc);
}

inline LstmGrads lstm_zero_grads(const LstmParams& p) {
  LstmGrads g;
  g.w_x = Matrix(p.w_x.rows(), p.w_x.cols());
  g.w_h = Matrix(p.w_h.rows(), p.w_h.cols());
  g.b = Vector(p.b.size(), 0.0);
  return g;
}

inline LstmGrads lstm_backward(const LstmCache& cache, const LstmParams& p, std::span<const double> grad_h_t) {
  LstmGrads g = lstm_zero_grads(p);
  lstm_backward_accumulate(cache, p, grad_h_t, g);
  return g;
}

}  // namespace csi
