#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "csi/core/adam.hpp"
#include "csi/core/layers.hpp"
#include "csi/core/lstm.hpp"
#include "csi/core/rng.hpp"
#include "csi/core/tensor.hpp"
#include "csi/model/config.hpp"

namespace csi {

/// Dimensions that fix every parameter shape.
struct ModelShape {
  std::size_t input_dim = 0;  // raw x_t after channel selection
  std::size_t embed_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t repr_dim = 0;
  std::size_t score_input_dim = 0;  // rank of y_i
  std::size_t user_dim = 0;

  static ModelShape from(const ModelConfig& m, const FeatureConfig& f) {
    return {csi::input_dim(m.ablation, f), m.embed_dim, m.hidden_dim, m.repr_dim, f.rank_score_user, m.user_dim};
  }

  bool operator==(const ModelShape&) const = default;
};

/// Every trainable tensor of the network. Also used, zero-initialized, as
/// the gradient accumulator.
struct ModelParams {
  Matrix w_a;  // embed x input
  Vector b_a;
  LstmParams lstm;  // embed -> hidden
  Matrix w_r;       // repr x hidden
  Vector b_r;
  Matrix w_u;  // user_dim x score_input
  Vector b_u;
  Vector w_s;  // user_dim
  Vector b_s;  // 1
  Vector w_c;  // repr + 1
  Vector b_c;  // 1

  static ModelParams zeros(const ModelShape& s) {
    ModelParams p;
    p.w_a = Matrix(s.embed_dim, s.input_dim);
    p.b_a = Vector(s.embed_dim, 0.0);
    p.lstm = LstmParams(s.embed_dim, s.hidden_dim);
    p.w_r = Matrix(s.repr_dim, s.hidden_dim);
    p.b_r = Vector(s.repr_dim, 0.0);
    p.w_u = Matrix(s.user_dim, s.score_input_dim);
    p.b_u = Vector(s.user_dim, 0.0);
    p.w_s = Vector(s.user_dim, 0.0);
    p.b_s = Vector(1, 0.0);
    p.w_c = Vector(s.repr_dim + 1, 0.0);
    p.b_c = Vector(1, 0.0);
    return p;
  }

  /// Glorot-uniform weights, zero biases, LSTM forget bias 1.
  static ModelParams initialized(const ModelShape& s, Rng& rng) {
    ModelParams p = zeros(s);
    glorot_uniform(p.w_a, rng);
    p.lstm.initialize(rng);
    glorot_uniform(p.w_r, rng);
    glorot_uniform(p.w_u, rng);
    const double rs = std::sqrt(6.0 / static_cast<double>(s.user_dim + 1));
    for (double& x : p.w_s) x = rng.uniform(-rs, rs);
    const double rc = std::sqrt(6.0 / static_cast<double>(s.repr_dim + 2));
    for (double& x : p.w_c) x = rng.uniform(-rc, rc);
    return p;
  }

  ModelShape shape() const {
    return {w_a.cols(), w_a.rows(), lstm.hidden_dim(), w_r.rows(), w_u.cols(), w_u.rows()};
  }

  /// Calls f(name, flat span) for each tensor in a fixed order.
  template <class F>
  void for_each(F&& f) {
    f(std::string_view("w_a"), w_a.flat());
    f(std::string_view("b_a"), std::span<double>(b_a));
    f(std::string_view("lstm_w_x"), lstm.w_x.flat());
    f(std::string_view("lstm_w_h"), lstm.w_h.flat());
    f(std::string_view("lstm_b"), std::span<double>(lstm.b));
    f(std::string_view("w_r"), w_r.flat());
    f(std::string_view("b_r"), std::span<double>(b_r));
    f(std::string_view("w_u"), w_u.flat());
    f(std::string_view("b_u"), std::span<double>(b_u));
    f(std::string_view("w_s"), std::span<double>(w_s));
    f(std::string_view("b_s"), std::span<double>(b_s));
    f(std::string_view("w_c"), std::span<double>(w_c));
    f(std::string_view("b_c"), std::span<double>(b_c));
  }

  template <class F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](std::string_view name, std::span<double> s) { f(name, std::span<const double>(s)); });
  }

  std::vector<std::span<double>> spans() {
    std::vector<std::span<double>> out;
    for_each([&](std::string_view, std::span<double> s) { out.push_back(s); });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](std::string_view, std::span<const double> s) { n += s.size(); });
    return n;
  }

  /// Flattened copy of all tensors, in for_each order.
  Vector flatten() const {
    Vector out;
    for_each([&](std::string_view, std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
    return out;
  }

  void assign_flat(std::span<const double> flat) {
    std::size_t pos = 0;
    for_each([&](std::string_view, std::span<double> s) {
      if (pos + s.size() > flat.size()) throw ShapeError("assign_flat: too few values");
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                flat.begin() + static_cast<std::ptrdiff_t>(pos + s.size()), s.begin());
      pos += s.size();
    });
    if (pos != flat.size()) throw ShapeError("assign_flat: too many values");
  }

  void set_zero() {
    for_each([](std::string_view, std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
  }

  void add(const ModelParams& other) {
    auto dst = spans();
    std::size_t k = 0;
    other.for_each([&](std::string_view, std::span<const double> s) { add_into(dst[k++], s); });
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](std::string_view, std::span<const double> s) { ok = ok && csi::all_finite(s); });
    return ok;
  }

  bool operator==(const ModelParams&) const = default;
};

/// One Adam state per tensor.
struct ModelOptimizer {
  std::vector<AdamState> states;

  ModelOptimizer(ModelParams& p, AdamConfig cfg) {
    for (auto s : p.spans()) states.emplace_back(s.size(), cfg);
  }

  void step(ModelParams& p, ModelParams& g) {
    auto ps = p.spans();
    auto gs = g.spans();
    for (std::size_t k = 0; k < ps.size(); ++k) adam_step(ps[k], gs[k], states[k]);
  }
};

}  // namespace csi
