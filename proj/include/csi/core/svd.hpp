#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "csi/core/rng.hpp"
#include "csi/core/tensor.hpp"
#include "csi/error.hpp"

namespace csi {

/// Rank-k factorization M ~= U diag(sigma) V^T with orthonormal columns.
struct SvdResult {
  Matrix u;      // rows x k
  Vector sigma;  // k, nonincreasing
  Matrix v;      // cols x k

  /// Rows of U diag(sigma), the per-entity embedding used by the features.
  Matrix scaled_u() const {
    Matrix out = u;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= sigma[c];
    return out;
  }
};

struct SvdOptions {
  std::size_t oversampling = 10;
  std::size_t power_iterations = 4;
  std::size_t dense_threshold = 64;  // min-dim at or below this uses the exact dense path
  std::uint64_t seed = 0x5eed5eedULL;
};

namespace detail {

/// Modified Gram-Schmidt, applied twice. Columns that collapse numerically are
/// replaced by seeded random directions orthogonalized against the rest, so the
/// result always has orthonormal columns.
inline void orthonormalize_columns(Matrix& q, Rng& rng) {
  const std::size_t n = q.rows();
  const std::size_t k = q.cols();
  for (std::size_t j = 0; j < k; ++j) {
    double original = 0.0;
    for (std::size_t r = 0; r < n; ++r) original += q(r, j) * q(r, j);
    original = std::sqrt(original);
    for (int attempt = 0;; ++attempt) {
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < j; ++i) {
          double proj = 0.0;
          for (std::size_t r = 0; r < n; ++r) proj += q(r, i) * q(r, j);
          for (std::size_t r = 0; r < n; ++r) q(r, j) -= proj * q(r, i);
        }
      }
      double nrm = 0.0;
      for (std::size_t r = 0; r < n; ++r) nrm += q(r, j) * q(r, j);
      nrm = std::sqrt(nrm);
      if (nrm > 1e-10 * std::max(original, 1.0) && nrm > 1e-300) {
        for (std::size_t r = 0; r < n; ++r) q(r, j) /= nrm;
        break;
      }
      if (attempt > 8) throw NumericError("orthonormalize_columns: cannot complete basis");
      for (std::size_t r = 0; r < n; ++r) q(r, j) = rng.normal();
      original = std::sqrt(static_cast<double>(n));
    }
  }
}

/// Flip each singular pair so the largest-magnitude entry of u is positive.
inline void canonicalize_signs(SvdResult& s) {
  for (std::size_t c = 0; c < s.u.cols(); ++c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < s.u.rows(); ++r)
      if (std::abs(s.u(r, c)) > std::abs(s.u(best, c)) + 1e-12) best = r;
    if (s.u(best, c) < 0.0) {
      for (std::size_t r = 0; r < s.u.rows(); ++r) s.u(r, c) = -s.u(r, c);
      for (std::size_t r = 0; r < s.v.rows(); ++r) s.v(r, c) = -s.v(r, c);
    }
  }
}

/// Full thin SVD of a dense matrix by one-sided (Hestenes) Jacobi rotations.
/// Returns min(rows, cols) singular triplets sorted by decreasing value.
inline SvdResult jacobi_svd(const Matrix& a, Rng& rng) {
  const bool transposed = a.rows() < a.cols();
  Matrix g = transposed ? a.transposed() : a;  // m x n with m >= n
  const std::size_t m = g.rows();
  const std::size_t n = g.cols();

  // Work column-major for cache-friendly column rotations.
  std::vector<Vector> cols(n, Vector(m));
  std::vector<Vector> vcols(n, Vector(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < m; ++r) cols[j][r] = g(r, j);
    vcols[j][j] = 1.0;
  }

  constexpr double eps = 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          alpha += cols[p][r] * cols[p][r];
          beta += cols[q][r] * cols[q][r];
          gamma += cols[p][r] * cols[q][r];
        }
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < m; ++r) {
          const double xp = cols[p][r], xq = cols[q][r];
          cols[p][r] = c * xp - s * xq;
          cols[q][r] = s * xp + c * xq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double xp = vcols[p][r], xq = vcols[q][r];
          vcols[p][r] = c * xp - s * xq;
          vcols[q][r] = s * xp + c * xq;
        }
      }
    }
    if (!rotated) break;
  }

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(cols[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double smax = n ? sigma[order[0]] : 0.0;
  Matrix u(m, n);
  Matrix vv(n, n);
  Vector sorted(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    sorted[k] = sigma[j];
    const bool live = sigma[j] > 1e-13 * std::max(smax, 1e-300) && sigma[j] > 0.0;
    for (std::size_t r = 0; r < m; ++r) u(r, k) = live ? cols[j][r] / sigma[j] : 0.0;
    if (!live) sorted[k] = 0.0;
    for (std::size_t r = 0; r < n; ++r) vv(r, k) = vcols[j][r];
  }
  orthonormalize_columns(u, rng);
  orthonormalize_columns(vv, rng);

  SvdResult out;
  if (transposed) {
    out.u = std::move(vv);
    out.v = std::move(u);
  } else {
    out.u = std::move(u);
    out.v = std::move(vv);
  }
  out.sigma = std::move(sorted);
  return out;
}

inline SvdResult truncate(SvdResult full, std::size_t k) {
  SvdResult out;
  out.sigma.assign(full.sigma.begin(), full.sigma.begin() + static_cast<std::ptrdiff_t>(k));
  out.u = Matrix(full.u.rows(), k);
  out.v = Matrix(full.v.rows(), k);
  for (std::size_t r = 0; r < full.u.rows(); ++r)
    for (std::size_t c = 0; c < k; ++c) out.u(r, c) = full.u(r, c);
  for (std::size_t r = 0; r < full.v.rows(); ++r)
    for (std::size_t c = 0; c < k; ++c) out.v(r, c) = full.v(r, c);
  return out;
}

}  // namespace detail

/// Rank-k truncated SVD. Small problems (min-dim <= dense_threshold) are
/// solved exactly; larger ones use randomized subspace iteration with a
/// seeded Gaussian test matrix.
inline SvdResult truncated_svd(const SparseMatrix& m, std::size_t k, const SvdOptions& opt = {}) {
  const std::size_t min_dim = std::min(m.rows(), m.cols());
  if (k < 1 || k > min_dim)
    throw RankError("truncated_svd: rank " + std::to_string(k) + " outside [1, " + std::to_string(min_dim) + "]");
  const bool nonzero =
      std::any_of(m.entries().begin(), m.entries().end(), [](const auto& e) { return e.value != 0.0; });
  if (!nonzero) throw DegenerateInputError("truncated_svd: matrix is all zero");

  Rng rng(opt.seed);
  SvdResult result;
  if (min_dim <= opt.dense_threshold) {
    result = detail::truncate(detail::jacobi_svd(m.to_dense(), rng), k);
  } else {
    const std::size_t l = std::min(k + opt.oversampling, min_dim);
    Matrix omega(m.cols(), l);
    for (double& x : omega.flat()) x = rng.normal();
    Matrix q = m.multiply(omega);  // rows x l
    detail::orthonormalize_columns(q, rng);
    for (std::size_t it = 0; it < opt.power_iterations; ++it) {
      Matrix z = m.multiply_transposed(q);  // cols x l
      detail::orthonormalize_columns(z, rng);
      q = m.multiply(z);
      detail::orthonormalize_columns(q, rng);
    }
    // B^T = M^T Q is cols x l; its SVD gives B = Q^T M = Ub S Vb^T.
    Matrix bt = m.multiply_transposed(q);
    SvdResult small = detail::jacobi_svd(bt, rng);  // bt = Vb S Ub^T
    SvdResult full;
    full.sigma = small.sigma;
    full.u = matmul(q, small.v);  // rows x l
    full.v = small.u;             // cols x l
    detail::orthonormalize_columns(full.u, rng);
    result = detail::truncate(std::move(full), k);
  }
  detail::canonicalize_signs(result);
  return result;
}

}  // namespace csi
