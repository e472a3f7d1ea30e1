#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "csi/core/rng.hpp"
#include "csi/core/svd.hpp"
#include "csi/core/tensor.hpp"
#include "csi/error.hpp"

namespace csi {

enum class ClusterMethod { KMeans, Spectral };

inline ClusterMethod parse_cluster_method(const std::string& s) {
  if (s == "kmeans") return ClusterMethod::KMeans;
  if (s == "spectral") return ClusterMethod::Spectral;
  throw UsageError("unknown clustering method '" + s + "' (expected kmeans or spectral)");
}

struct KMeansResult {
  std::vector<std::size_t> assignment;
  Matrix centers;
  double inertia = 0.0;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

inline KMeansResult lloyd_once(const Matrix& x, std::size_t k, Rng& rng, int max_iter) {
  const std::size_t n = x.rows();
  KMeansResult r;
  r.centers = Matrix(k, x.cols());
  // k-means++ seeding
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.below(n);
  std::copy(x.row(first).begin(), x.row(first).end(), r.centers.row(0).begin());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(x.row(i), r.centers.row(c - 1)));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
    } else {
      pick = rng.below(n);
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), r.centers.row(c).begin());
  }

  r.assignment.assign(n, 0);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(x.row(i), r.centers.row(c));
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (r.assignment[i] != best) changed = true;
      r.assignment[i] = best;
    }
    if (!changed) break;
    Matrix sums(k, x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      add_into(sums.row(r.assignment[i]), x.row(i));
      ++counts[r.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // keep the old center for an empty cluster
      auto dst = r.centers.row(c);
      auto src = sums.row(c);
      for (std::size_t d = 0; d < dst.size(); ++d) dst[d] = src[d] / static_cast<double>(counts[c]);
    }
  }
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) r.inertia += sq_dist(x.row(i), r.centers.row(r.assignment[i]));
  return r;
}

/// Relabels clusters in order of first appearance so equal partitions compare equal.
inline void canonical_labels(std::vector<std::size_t>& a, std::size_t k) {
  std::vector<std::size_t> map(k, k);
  std::size_t next = 0;
  for (auto& c : a) {
    if (map[c] == k) map[c] = next++;
    c = map[c];
  }
}

}  // namespace detail

/// k-means++ seeded Lloyd's; the restart with the lowest inertia wins.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int restarts = 50, int max_iter = 300) {
  if (k < 1) throw ParameterError("kmeans: k must be >= 1");
  if (x.rows() < k) throw SizeError("kmeans: k=" + std::to_string(k) + " exceeds " + std::to_string(x.rows()) + " points");
  if (!all_finite(x.flat())) throw NumericError("kmeans: non-finite input");
  Rng rng(derive_seed(seed, "kmeans"));
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto cand = detail::lloyd_once(x, k, rng, max_iter);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

/// Symmetrized cosine k-nearest-neighbor affinity with weights (1 + cos) / 2.
inline Matrix knn_cosine_graph(const Matrix& x, std::size_t neighbors) {
  const std::size_t n = x.rows();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = norm2(x.row(i));
  Matrix sim(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double c = norms[i] > 0.0 && norms[j] > 0.0 ? dot(x.row(i), x.row(j)) / (norms[i] * norms[j]) : 0.0;
      sim(i, j) = 0.5 * (1.0 + std::clamp(c, -1.0, 1.0));
    }
  const std::size_t kn = std::min(neighbors, n > 0 ? n - 1 : 0);
  Matrix w(n, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (a == i || b == i) return b == i && a != i;
      return sim(i, a) > sim(i, b);
    });
    for (std::size_t t = 0; t < kn; ++t) {
      const auto j = order[t];
      w(i, j) = std::max(w(i, j), sim(i, j));
      w(j, i) = std::max(w(j, i), sim(i, j));
    }
  }
  return w;
}

/// Top-k eigenvectors of the normalized affinity D^-1/2 W D^-1/2 (the
/// smallest of the normalized Laplacian) by subspace iteration on the
/// shifted, positive semidefinite matrix S + I.
inline Matrix spectral_embedding(const Matrix& w, std::size_t k, std::uint64_t seed, int iterations = 300) {
  const std::size_t n = w.rows();
  std::vector<double> dinv(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (double v : w.row(i)) d += v;
    dinv[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = dinv[i] * w(i, j) * dinv[j] + (i == j ? 1.0 : 0.0);
  Rng rng(derive_seed(seed, "spectral"));
  Matrix q(n, k);
  for (double& v : q.flat()) v = rng.normal();
  detail::orthonormalize_columns(q, rng);
  for (int it = 0; it < iterations; ++it) {
    q = matmul(s, q);
    detail::orthonormalize_columns(q, rng);
  }
  return q;
}

struct ClusterResult {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<std::size_t>> contingency;  // rows: clusters, cols: (true, fake)
  Matrix projection;                                  // n x 2, rows of U diag(sigma)
};

inline std::vector<std::vector<std::size_t>> contingency_table(const std::vector<std::size_t>& assignment,
                                                               std::span<const int> labels, std::size_t k) {
  if (assignment.size() != labels.size()) throw ShapeError("contingency_table: length mismatch");
  std::vector<std::vector<std::size_t>> t(k, std::vector<std::size_t>(2, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ParameterError("contingency_table: labels must be 0 or 1");
    ++t.at(assignment[i])[static_cast<std::size_t>(labels[i])];
  }
  return t;
}

/// Rank-2 projection of the stacked rows (zero rows when the matrix is all zero).
inline Matrix projection_2d(const Matrix& x) {
  const std::size_t rank = std::min<std::size_t>(2, std::min(x.rows(), x.cols()));
  Matrix out(x.rows(), 2);
  if (rank == 0) return out;
  SvdResult svd;
  try {
    svd = truncated_svd(SparseMatrix::from_dense(x), rank);
  } catch (const DegenerateInputError&) {
    return out;
  }
  const Matrix us = svd.scaled_u();
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < rank; ++c) out(i, c) = us(i, c);
  return out;
}

inline ClusterResult cluster_articles(const Matrix& v, std::span<const int> labels, std::size_t k, std::uint64_t seed,
                                      ClusterMethod method = ClusterMethod::Spectral, std::size_t neighbors = 10) {
  if (k < 1) throw ParameterError("cluster_articles: k must be >= 1");
  if (v.rows() < k) throw SizeError("cluster_articles: k=" + std::to_string(k) + " exceeds " +
                                    std::to_string(v.rows()) + " articles");
  if (labels.size() != v.rows()) throw ShapeError("cluster_articles: one label per article required");
  ClusterResult r;
  if (k == 1) {
    r.assignment.assign(v.rows(), 0);
  } else if (method == ClusterMethod::KMeans) {
    r.assignment = kmeans(v, k, seed).assignment;
  } else {
    Matrix emb = spectral_embedding(knn_cosine_graph(v, neighbors), k, seed);
    for (std::size_t i = 0; i < emb.rows(); ++i) {
      auto row = emb.row(i);
      const double nr = norm2(row);
      if (nr > 0.0)
        for (double& x : row) x /= nr;
    }
    r.assignment = kmeans(emb, k, seed).assignment;
  }
  detail::canonical_labels(r.assignment, k);
  r.contingency = contingency_table(r.assignment, labels, k);
  r.projection = projection_2d(v);
  return r;
}

}  // namespace csi
