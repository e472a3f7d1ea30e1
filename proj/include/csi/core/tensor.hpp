#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "csi/error.hpp"

namespace csi {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw ShapeError("Matrix: data size does not match dims");
  }

  static Matrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_) throw ShapeError("Matrix::from_rows: ragged rows");
      std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  Vector col(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Coordinate-format sparse matrix. Construction rejects duplicate
/// coordinates, out-of-range indices and non-finite values.
class SparseMatrix {
 public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.row >= rows_ || e.col >= cols_) throw ShapeError("SparseMatrix: index out of range");
      if (!std::isfinite(e.value)) throw NumericError("SparseMatrix: non-finite value");
      if (i > 0 && entries_[i - 1].row == e.row && entries_[i - 1].col == e.col)
        throw ShapeError("SparseMatrix: duplicate coordinate (" + std::to_string(e.row) + ", " +
                         std::to_string(e.col) + ")");
    }
  }

  static SparseMatrix from_dense(const Matrix& m) {
    std::vector<Entry> es;
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c)
        if (m(r, c) != 0.0) es.push_back({r, c, m(r, c)});
    return {m.rows(), m.cols(), std::move(es)};
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  /// Entry lookup by binary search; zero when absent.
  double at(std::size_t r, std::size_t c) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{r, c},
                               [](const Entry& e, const std::pair<std::size_t, std::size_t>& k) {
                                 return std::tie(e.row, e.col) < std::tie(k.first, k.second);
                               });
    return (it != entries_.end() && it->row == r && it->col == c) ? it->value : 0.0;
  }

  Matrix to_dense() const {
    Matrix m(rows_, cols_);
    for (const auto& e : entries_) m(e.row, e.col) = e.value;
    return m;
  }

  /// this * B for dense B (cols x k).
  Matrix multiply(const Matrix& b) const {
    if (b.rows() != cols_) throw ShapeError("SparseMatrix::multiply: inner dims differ");
    Matrix out(rows_, b.cols());
    for (const auto& e : entries_) {
      auto src = b.row(e.col);
      auto dst = out.row(e.row);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += e.value * src[k];
    }
    return out;
  }

  /// this^T * B for dense B (rows x k).
  Matrix multiply_transposed(const Matrix& b) const {
    if (b.rows() != rows_) throw ShapeError("SparseMatrix::multiply_transposed: inner dims differ");
    Matrix out(cols_, b.cols());
    for (const auto& e : entries_) {
      auto src = b.row(e.row);
      auto dst = out.row(e.col);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += e.value * src[k];
    }
    return out;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Entry> entries_;
};

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

/// Four interleaved partial sums, combined in a fixed order.
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// out = W x + b (b may be empty).
inline void affine(const Matrix& w, std::span<const double> x, std::span<const double> b,
                   std::span<double> out) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    out[r] = (b.empty() ? 0.0 : b[r]) + dot(w.row(r), x);
  }
}

/// out += W^T y.
inline void add_transposed_product(const Matrix& w, std::span<const double> y, std::span<double> out) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    auto wr = w.row(r);
    for (std::size_t c = 0; c < wr.size(); ++c) out[c] += wr[c] * yr;
  }
}

/// G += a b^T.
inline void add_outer(Matrix& g, std::span<const double> a, std::span<const double> b) {
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    auto gr = g.row(r);
    for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += ar * b[c];
  }
}

inline void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dims differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

}  // namespace csi
