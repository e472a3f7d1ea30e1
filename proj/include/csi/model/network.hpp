#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "csi/core/layers.hpp"
#include "csi/core/lstm.hpp"
#include "csi/core/rng.hpp"
#include "csi/core/tensor.hpp"
#include "csi/data/dataset.hpp"
#include "csi/error.hpp"
#include "csi/features/features.hpp"
#include "csi/model/config.hpp"
#include "csi/model/params.hpp"

namespace csi {

/// Model-ready view of one article: channel-selected inputs, the engaged-user
/// mask and the label (-1 when unlabeled).
struct ArticleInput {
  std::size_t article = 0;
  std::vector<Vector> x;
  std::vector<std::size_t> mask;
  int label = -1;
};

inline std::vector<ArticleInput> make_inputs(const FeatureSet& fs, const Dataset& ds,
                                             const std::vector<std::size_t>& articles, Ablation ablation,
                                             const FeatureConfig& fcfg) {
  std::vector<ArticleInput> out;
  out.reserve(articles.size());
  for (auto j : articles) {
    ArticleInput in;
    in.article = j;
    for (const auto& x : fs.sequences.at(j).x) in.x.push_back(select_channels(x, ablation, fcfg));
    in.mask = fs.masks.at(j);
    in.label = ds.label(j) ? *ds.label(j) : -1;
    out.push_back(std::move(in));
  }
  return out;
}

struct CaptureDropout {
  std::vector<Vector> embed;  // one mask per step, over x~_t
  Vector hidden;              // over h_T
};

inline CaptureDropout draw_capture_dropout(std::size_t steps, const ModelShape& s, double p, Rng& rng) {
  CaptureDropout d;
  for (std::size_t t = 0; t < steps; ++t) d.embed.push_back(dropout_mask(s.embed_dim, p, rng));
  d.hidden = dropout_mask(s.hidden_dim, p, rng);
  return d;
}

struct CaptureCache {
  const std::vector<Vector>* x = nullptr;
  std::vector<Vector> embedded;  // x~_t before dropout
  LstmCache lstm;
  Vector h_dropped;  // h_T after dropout
  Vector v;
  const CaptureDropout* dropout = nullptr;
};

/// v_j = tanh(W_r drop(h_T) + b_r), h_T from the LSTM over drop(tanh(W_a x_t + b_a)).
/// Without dropout masks this is the deterministic inference path.
inline Vector capture_forward(const std::vector<Vector>& x, const ModelParams& p, const CaptureDropout* dropout = nullptr,
                              CaptureCache* cache = nullptr) {
  if (x.empty()) throw EmptySequenceError("capture_forward: empty sequence");
  const std::size_t hdim = p.lstm.hidden_dim();
  std::vector<Vector> embedded(x.size());
  std::vector<Vector> lstm_in(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (x[t].size() != p.w_a.cols())
      throw ShapeError("capture_forward: input has dimension " + std::to_string(x[t].size()) + ", W_a expects " +
                       std::to_string(p.w_a.cols()));
    embedded[t] = dense_forward(x[t], p.w_a, p.b_a, Activation::Tanh);
    lstm_in[t] = embedded[t];
    if (dropout)
      for (std::size_t k = 0; k < lstm_in[t].size(); ++k) lstm_in[t][k] *= dropout->embed[t][k];
  }
  auto lstm = lstm_forward(lstm_in, p.lstm, Vector(hdim, 0.0), Vector(hdim, 0.0));
  Vector h = lstm.h_t;
  if (dropout)
    for (std::size_t k = 0; k < hdim; ++k) h[k] *= dropout->hidden[k];
  Vector v = dense_forward(h, p.w_r, p.b_r, Activation::Tanh);
  if (cache) {
    cache->x = &x;
    cache->embedded = std::move(embedded);
    cache->lstm = std::move(lstm.cache);
    cache->h_dropped = std::move(h);
    cache->v = v;
    cache->dropout = dropout;
  }
  return v;
}

/// Convenience overload: training mode when `rng` is given.
inline Vector capture_forward(const std::vector<Vector>& x, const ModelParams& p, double dropout_p, Rng* rng) {
  if (!rng || dropout_p == 0.0) return capture_forward(x, p);
  const auto masks = draw_capture_dropout(x.size(), p.shape(), dropout_p, *rng);
  return capture_forward(x, p, &masks);
}

/// Accumulates Capture's parameter gradients given dLoss/dv_j.
inline void capture_backward(const CaptureCache& cache, const ModelParams& p, std::span<const double> grad_v,
                             ModelParams& grad) {
  if (!cache.x || cache.lstm.steps.empty()) throw StateError("capture_backward: missing forward cache");
  const std::size_t dv = p.w_r.rows();
  Vector dr(dv);
  for (std::size_t k = 0; k < dv; ++k) dr[k] = grad_v[k] * (1.0 - cache.v[k] * cache.v[k]);
  add_outer(grad.w_r, dr, cache.h_dropped);
  add_into(grad.b_r, dr);
  Vector dh(p.w_r.cols(), 0.0);
  add_transposed_product(p.w_r, dr, dh);
  if (cache.dropout)
    for (std::size_t k = 0; k < dh.size(); ++k) dh[k] *= cache.dropout->hidden[k];

  LstmGrads lg;
  lg.w_x = std::move(grad.lstm.w_x);
  lg.w_h = std::move(grad.lstm.w_h);
  lg.b = std::move(grad.lstm.b);
  lstm_backward_accumulate(cache.lstm, p.lstm, dh, lg);
  grad.lstm.w_x = std::move(lg.w_x);
  grad.lstm.w_h = std::move(lg.w_h);
  grad.lstm.b = std::move(lg.b);

  Vector da(p.w_a.rows());
  for (std::size_t t = 0; t < cache.embedded.size(); ++t) {
    const auto& e = cache.embedded[t];
    for (std::size_t k = 0; k < da.size(); ++k) {
      double g = lg.inputs[t][k];
      if (cache.dropout) g *= cache.dropout->embed[t][k];
      da[k] = g * (1.0 - e[k] * e[k]);
    }
    add_outer(grad.w_a, da, (*cache.x)[t]);
    add_into(grad.b_a, da);
  }
}

struct ScoreOutput {
  Vector s;          // per user, in (0, 1)
  Matrix y_tilde;    // users x user_dim
};

/// s_i = sigmoid(w_s . y~_i + b_s) with y~_i = tanh(W_u y_i + b_u), for a single user.
inline double score_user(std::span<const double> y, const ModelParams& p, std::span<double> y_tilde) {
  affine(p.w_u, y, p.b_u, y_tilde);
  for (double& v : y_tilde) v = std::tanh(v);
  return sigmoid(dot(p.w_s, y_tilde) + p.b_s[0]);
}

inline ScoreOutput score_forward(const Matrix& y, const ModelParams& p) {
  if (y.cols() != p.w_u.cols())
    throw ShapeError("score_forward: y has " + std::to_string(y.cols()) + " columns, W_u expects " +
                     std::to_string(p.w_u.cols()));
  ScoreOutput out;
  out.s.resize(y.rows());
  out.y_tilde = Matrix(y.rows(), p.w_u.rows());
  for (std::size_t i = 0; i < y.rows(); ++i) out.s[i] = score_user(y.row(i), p, out.y_tilde.row(i));
  return out;
}

struct IntegrateOutput {
  double p = 0.0;     // mean engaged-user score
  double z = 0.0;     // classifier logit
  double l_hat = 0.5;
};

/// p_j = mean of s over the mask (0 when the Score path is disabled),
/// L^_j = sigmoid(w_c . [v_j; p_j] + b_c).
inline IntegrateOutput integrate_forward(std::span<const double> v, std::span<const double> s,
                                         const std::vector<std::size_t>& mask, const ModelParams& p,
                                         bool use_score = true) {
  if (mask.empty()) throw ParameterError("integrate_forward: empty user mask");
  if (v.size() + 1 != p.w_c.size()) throw ShapeError("integrate_forward: v does not match w_c");
  IntegrateOutput out;
  if (use_score) {
    double acc = 0.0;
    for (auto i : mask) {
      if (i >= s.size()) throw ShapeError("integrate_forward: mask index out of range");
      acc += s[i];
    }
    out.p = acc / static_cast<double>(mask.size());
  }
  out.z = dot(std::span<const double>(p.w_c).first(v.size()), v) + p.w_c.back() * out.p + p.b_c[0];
  out.l_hat = sigmoid(out.z);
  return out;
}

inline constexpr double kProbClip = 1e-12;

/// Mean binary cross-entropy plus (lambda / 2) ||W_u||^2.
inline double csi_loss(std::span<const double> l_hat, std::span<const int> labels, const Matrix& w_u, double lambda) {
  if (l_hat.size() != labels.size()) throw ShapeError("csi_loss: prediction and label counts differ");
  if (l_hat.empty()) throw ShapeError("csi_loss: empty batch");
  double ce = 0.0;
  for (std::size_t j = 0; j < l_hat.size(); ++j) {
    const double q = std::clamp(l_hat[j], kProbClip, 1.0 - kProbClip);
    ce += labels[j] ? std::log(q) : std::log(1.0 - q);
  }
  double reg = 0.0;
  for (double w : w_u.flat()) reg += w * w;
  return -ce / static_cast<double>(l_hat.size()) + 0.5 * lambda * reg;
}

namespace detail {

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
    return;
  }
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  for (std::size_t w = 0; w < t; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n; k += t) body(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

struct BatchOutput {
  double loss = 0.0;
  std::vector<double> l_hat;
};

/// Loss and exact gradient over one batch. `grad` is overwritten. Dropout is
/// applied when `dropout_rng` is non-null and p > 0; masks are drawn in batch
/// order before any parallel work so results do not depend on `threads`.
inline BatchOutput batch_gradient(const std::vector<const ArticleInput*>& batch, const ModelParams& p, const Matrix& y,
                                  const ModelConfig& cfg, Rng* dropout_rng, ModelParams& grad, int threads = 1) {
  if (batch.empty()) throw ShapeError("batch_gradient: empty batch");
  const bool use_score = uses_score(cfg.ablation);
  const std::size_t n_users = y.rows();
  const ModelShape shape = p.shape();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  grad = ModelParams::zeros(shape);

  // Score forward for every user touched by the batch.
  std::vector<std::size_t> users;
  std::vector<long> slot(n_users, -1);
  Vector s_all(n_users, 0.0);
  Matrix y_tilde;
  if (use_score) {
    for (const auto* a : batch) users.insert(users.end(), a->mask.begin(), a->mask.end());
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    y_tilde = Matrix(users.size(), shape.user_dim);
    for (std::size_t k = 0; k < users.size(); ++k) {
      if (users[k] >= n_users) throw ShapeError("batch_gradient: mask index out of range");
      slot[users[k]] = static_cast<long>(k);
      s_all[users[k]] = score_user(y.row(users[k]), p, y_tilde.row(k));
    }
  }

  std::vector<CaptureDropout> masks;
  const bool dropout = dropout_rng && cfg.dropout_p > 0.0;
  if (dropout)
    for (const auto* a : batch) masks.push_back(draw_capture_dropout(a->x.size(), shape, cfg.dropout_p, *dropout_rng));

  std::vector<ModelParams> per_article(batch.size());
  std::vector<double> grad_p(batch.size(), 0.0);
  BatchOutput out;
  out.l_hat.assign(batch.size(), 0.0);
  detail::parallel_for(batch.size(), threads, [&](std::size_t k) {
    const auto& a = *batch[k];
    if (a.label != 0 && a.label != 1) throw ParameterError("batch_gradient: unlabeled article in batch");
    CaptureCache cache;
    const Vector v = capture_forward(a.x, p, dropout ? &masks[k] : nullptr, &cache);
    const auto integ = integrate_forward(v, s_all, a.mask, p, use_score);
    out.l_hat[k] = integ.l_hat;
    const double dz = (integ.l_hat - static_cast<double>(a.label)) * inv_n;
    auto& g = per_article[k];
    g = ModelParams::zeros(shape);
    for (std::size_t d = 0; d < v.size(); ++d) g.w_c[d] += dz * v[d];
    g.w_c.back() += dz * integ.p;
    g.b_c[0] += dz;
    Vector dv(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) dv[d] = dz * p.w_c[d];
    capture_backward(cache, p, dv, g);
    grad_p[k] = use_score ? dz * p.w_c.back() : 0.0;
  });

  for (const auto& g : per_article) grad.add(g);

  if (use_score) {
    Vector ds(users.size(), 0.0);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const double share = grad_p[k] / static_cast<double>(batch[k]->mask.size());
      for (auto i : batch[k]->mask) ds[static_cast<std::size_t>(slot[i])] += share;
    }
    Vector du(shape.user_dim);
    for (std::size_t k = 0; k < users.size(); ++k) {
      const double s = s_all[users[k]];
      const double dq = ds[k] * s * (1.0 - s);
      auto yt = y_tilde.row(k);
      for (std::size_t d = 0; d < yt.size(); ++d) {
        grad.w_s[d] += dq * yt[d];
        du[d] = dq * p.w_s[d] * (1.0 - yt[d] * yt[d]);
      }
      grad.b_s[0] += dq;
      add_outer(grad.w_u, du, y.row(users[k]));
      add_into(grad.b_u, du);
    }
  }

  auto gw = grad.w_u.flat();
  auto pw = p.w_u.flat();
  for (std::size_t k = 0; k < gw.size(); ++k) gw[k] += cfg.lambda_reg * pw[k];

  std::vector<int> labels;
  for (const auto* a : batch) labels.push_back(a->label);
  out.loss = csi_loss(out.l_hat, labels, p.w_u, cfg.lambda_reg);
  return out;
}

struct ArticleResult {
  std::size_t article = 0;
  Vector v;
  double p = 0.0;
  double l_hat = 0.5;
};

struct UserResult {
  double s = 0.5;
  Vector y_tilde;
};

struct Prediction {
  std::vector<ArticleResult> articles;  // in input order
  std::vector<UserResult> users;        // indexed by user
};

/// Deterministic inference (dropout off).
inline Prediction predict(const ModelParams& p, const ModelConfig& cfg, const std::vector<ArticleInput>& inputs,
                          const Matrix& y, int threads = 1) {
  const auto score = score_forward(y, p);
  Prediction out;
  out.users.resize(y.rows());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    out.users[i].s = score.s[i];
    auto row = score.y_tilde.row(i);
    out.users[i].y_tilde.assign(row.begin(), row.end());
  }
  out.articles.resize(inputs.size());
  detail::parallel_for(inputs.size(), threads, [&](std::size_t k) {
    const auto& a = inputs[k];
    auto& r = out.articles[k];
    r.article = a.article;
    r.v = capture_forward(a.x, p);
    const auto integ = integrate_forward(r.v, score.s, a.mask, p, uses_score(cfg.ablation));
    r.p = integ.p;
    r.l_hat = integ.l_hat;
  });
  return out;
}

/// Inference-mode loss over labeled inputs (no dropout).
inline double evaluate_loss(const ModelParams& p, const ModelConfig& cfg, const std::vector<ArticleInput>& inputs,
                            const Matrix& y, int threads = 1) {
  const auto pred = predict(p, cfg, inputs, y, threads);
  std::vector<double> l_hat;
  std::vector<int> labels;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    l_hat.push_back(pred.articles[k].l_hat);
    labels.push_back(inputs[k].label);
  }
  return csi_loss(l_hat, labels, p.w_u, cfg.lambda_reg);
}

inline int hard_label(double l_hat) { return l_hat >= 0.5 ? 1 : 0; }

}  // namespace csi
