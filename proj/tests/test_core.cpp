#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "csi/core/adam.hpp"
#include "csi/core/gradcheck.hpp"
#include "csi/core/layers.hpp"
#include "csi/core/lstm.hpp"
#include "csi/core/rng.hpp"
#include "csi/core/svd.hpp"
#include "csi/core/tensor.hpp"

using namespace csi;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& x : m.flat()) x = scale * rng.normal();
  return m;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

double max_orthonormality_error(const Matrix& q) {
  double worst = 0.0;
  for (std::size_t a = 0; a < q.cols(); ++a)
    for (std::size_t b = 0; b < q.cols(); ++b) {
      const double d = dot(q.col(a), q.col(b));
      worst = std::max(worst, std::abs(d - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

}  // namespace

TEST(Dense, ZeroWeightsTanhGivesZero) {
  Matrix w(3, 2);
  auto out = dense_forward(Vector{0.7, -2.0}, w, Vector(3, 0.0), Activation::Tanh);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(Dense, SigmoidOfZero) {
  Matrix w(1, 1, 1.0);
  auto out = dense_forward(Vector{0.0}, w, Vector{0.0}, Activation::Sigmoid);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
}

TEST(Dense, IdentityHandArithmetic) {
  Matrix w(2, 2, Vector{1, 2, 3, 4});
  auto out = dense_forward(Vector{1, 1}, w, Vector{1, 1}, Activation::Identity);
  EXPECT_DOUBLE_EQ(out[0], 4.0);
  EXPECT_DOUBLE_EQ(out[1], 8.0);
}

TEST(Dense, ShapeMismatchThrows) {
  Matrix w(2, 3);
  EXPECT_THROW(dense_forward(Vector{1, 1}, w, Vector{0, 0}, Activation::Tanh), ShapeError);
  EXPECT_THROW(dense_forward(Vector{1, 1, 1}, w, Vector{0}, Activation::Tanh), ShapeError);
}

TEST(Dense, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  Matrix w = random_matrix(3, 4, rng);
  Vector b{0.1, -0.2, 0.3};
  Vector x{0.5, -0.1, 0.2, 0.9};
  Vector seed{1.0, -0.5, 2.0};
  for (auto act : {Activation::Tanh, Activation::Sigmoid, Activation::Identity}) {
    auto f = [&](std::span<const double> xs) {
      auto y = dense_forward(xs, w, b, act);
      return dot(y, seed);
    };
    auto y = dense_forward(x, w, b, act);
    Vector dpre(3);
    for (std::size_t r = 0; r < 3; ++r) dpre[r] = seed[r] * activation_grad_from_output(act, y[r]);
    Vector analytic(4, 0.0);
    add_transposed_product(w, dpre, analytic);
    auto fd = finite_diff_grad(f, x);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_LT(relative_error(analytic[i], fd[i]), 1e-4);
  }
}

TEST(Sparse, RejectsDuplicatesAndBadValues) {
  EXPECT_THROW(SparseMatrix(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), ShapeError);
  EXPECT_THROW(SparseMatrix(2, 2, {{2, 0, 1.0}}), ShapeError);
  EXPECT_THROW(SparseMatrix(2, 2, {{0, 1, NAN}}), NumericError);
}

TEST(Sparse, MultiplyMatchesDense) {
  Rng rng(5);
  Matrix d = random_matrix(5, 4, rng);
  d(1, 2) = 0.0;
  auto s = SparseMatrix::from_dense(d);
  Matrix b = random_matrix(4, 3, rng);
  Matrix p = s.multiply(b);
  Matrix q = matmul(d, b);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p.flat()[i], q.flat()[i], 1e-12);
  Matrix c = random_matrix(5, 2, rng);
  Matrix pt = s.multiply_transposed(c);
  Matrix qt = matmul(d.transposed(), c);
  for (std::size_t i = 0; i < pt.size(); ++i) EXPECT_NEAR(pt.flat()[i], qt.flat()[i], 1e-12);
}

TEST(Svd, IdentitySingularValues) {
  auto r = truncated_svd(SparseMatrix::from_dense(Matrix::identity(3)), 3);
  for (double s : r.sigma) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Svd, RankOneOuterProduct) {
  SparseMatrix m(2, 3, {{0, 1, 12.0}});
  auto r = truncated_svd(m, 1);
  EXPECT_NEAR(r.sigma[0], 12.0, 1e-12);
}

TEST(Svd, RandomIntegerMatrixMatchesEigenDecomposition) {
  Rng rng(11);
  Matrix m(6, 5);
  for (double& x : m.flat()) x = static_cast<double>(static_cast<int>(rng.below(11)) - 5);
  auto r = truncated_svd(SparseMatrix::from_dense(m), 2);
  Eigen::MatrixXd e = to_eigen(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(e.transpose() * e);
  auto vals = eig.eigenvalues();  // ascending
  EXPECT_NEAR(r.sigma[0], std::sqrt(vals(4)), 1e-8);
  EXPECT_NEAR(r.sigma[1], std::sqrt(vals(3)), 1e-8);
}

TEST(Svd, SmallMatricesAgainstEigenOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + rng.below(8), cols = 1 + rng.below(8);
    Matrix m = random_matrix(rows, cols, rng);
    const std::size_t k = 1 + rng.below(std::min(rows, cols));
    auto r = truncated_svd(SparseMatrix::from_dense(m), k);
    Eigen::JacobiSVD<Eigen::MatrixXd> oracle(to_eigen(m));
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_NEAR(r.sigma[i], oracle.singularValues()(static_cast<Eigen::Index>(i)), 1e-8);
      if (i > 0) {
        EXPECT_LE(r.sigma[i], r.sigma[i - 1]);
      }
      Vector mv(rows, 0.0);
      auto vi = r.v.col(i);
      for (std::size_t a = 0; a < rows; ++a) mv[a] = dot(m.row(a), vi);
      double resid = 0.0;
      for (std::size_t a = 0; a < rows; ++a) resid += std::pow(mv[a] - r.sigma[i] * r.u(a, i), 2);
      EXPECT_LE(std::sqrt(resid), 1e-6);
    }
    EXPECT_LT(max_orthonormality_error(r.u), 1e-8);
    EXPECT_LT(max_orthonormality_error(r.v), 1e-8);
  }
}

TEST(Svd, RandomizedPathOnPlantedLowRankMatrix) {
  Rng rng(23);
  Matrix a = random_matrix(120, 4, rng), b = random_matrix(4, 90, rng);
  Matrix m = matmul(a, b);
  for (double& x : m.flat()) x += 1e-3 * rng.normal();
  auto r = truncated_svd(SparseMatrix::from_dense(m), 4);
  Eigen::JacobiSVD<Eigen::MatrixXd> oracle(to_eigen(m));
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(r.sigma[i], oracle.singularValues()(static_cast<Eigen::Index>(i)), 1e-8 * oracle.singularValues()(0));
  EXPECT_LT(max_orthonormality_error(r.u), 1e-8);
  EXPECT_LT(max_orthonormality_error(r.v), 1e-8);
}

TEST(Svd, RandomizedPathOnFlatSpectrumStaysClose) {
  Rng rng(23);
  std::vector<SparseMatrix::Entry> es;
  for (std::size_t r = 0; r < 120; ++r)
    for (std::size_t c = 0; c < 90; ++c)
      if (rng.bernoulli(0.1)) es.push_back({r, c, 1.0});
  SparseMatrix m(120, 90, es);
  auto r = truncated_svd(m, 5);
  Eigen::JacobiSVD<Eigen::MatrixXd> oracle(to_eigen(m.to_dense()));
  for (std::size_t i = 0; i < 5; ++i) {
    const double want = oracle.singularValues()(static_cast<Eigen::Index>(i));
    EXPECT_LE(r.sigma[i], want + 1e-9);
    EXPECT_GT(r.sigma[i], 0.99 * want);
  }
  EXPECT_LT(max_orthonormality_error(r.u), 1e-8);
}

TEST(Svd, Errors) {
  auto m = SparseMatrix::from_dense(Matrix::identity(3));
  EXPECT_THROW(truncated_svd(m, 0), RankError);
  EXPECT_THROW(truncated_svd(m, 4), RankError);
  EXPECT_THROW(truncated_svd(SparseMatrix(3, 3, {}), 1), DegenerateInputError);
}

TEST(Svd, SeededIsDeterministic) {
  Rng rng(29);
  std::vector<SparseMatrix::Entry> es;
  for (std::size_t r = 0; r < 100; ++r)
    for (std::size_t c = 0; c < 80; ++c)
      if (rng.bernoulli(0.05)) es.push_back({r, c, 1.0});
  SparseMatrix m(100, 80, es);
  auto a = truncated_svd(m, 4);
  auto b = truncated_svd(m, 4);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.sigma, b.sigma);
}

TEST(Lstm, ZeroParametersGiveZeroState) {
  LstmParams p(3, 2);
  std::vector<Vector> seq{{1, 2, 3}, {-1, 0.5, 4}};
  auto out = lstm_forward(seq, p, Vector(2, 0.0), Vector(2, 0.0));
  for (double v : out.h_t) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, ScalarHandComputedStep) {
  LstmParams p(1, 1);
  p.w_x.fill(1.0);
  p.w_h.fill(1.0);
  auto out = lstm_forward({{1.0}}, p, Vector{0.0}, Vector{0.0});
  const double gate = 1.0 / (1.0 + std::exp(-1.0));
  const double c = gate * std::tanh(1.0);
  EXPECT_NEAR(out.c_t[0], c, 1e-12);
  EXPECT_NEAR(out.h_t[0], gate * std::tanh(c), 1e-12);
  EXPECT_NEAR(out.h_t[0], 0.3696064, 1e-6);
}

TEST(Lstm, EmptySequenceThrows) {
  LstmParams p(1, 1);
  EXPECT_THROW(lstm_forward({}, p, Vector{0.0}, Vector{0.0}), EmptySequenceError);
}

TEST(Lstm, SequenceEqualsIteratedSteps) {
  Rng rng(31);
  LstmParams p(3, 4);
  p.initialize(rng);
  std::vector<Vector> seq{{0.1, -0.3, 0.5}, {0.2, 0.2, -0.7}, {1.0, 0.0, 0.3}};
  auto whole = lstm_forward(seq, p, Vector(4, 0.0), Vector(4, 0.0));
  Vector h(4, 0.0), c(4, 0.0);
  for (const auto& x : seq) {
    auto one = lstm_forward({x}, p, h, c);
    h = one.h_t;
    c = one.c_t;
  }
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(whole.h_t[k], h[k]);
    EXPECT_DOUBLE_EQ(whole.c_t[k], c[k]);
  }
}

TEST(Lstm, ZeroSeedGivesZeroGradients) {
  Rng rng(37);
  LstmParams p(2, 3);
  p.initialize(rng);
  auto out = lstm_forward({{0.3, 0.1}, {-0.2, 0.4}}, p, Vector(3, 0.0), Vector(3, 0.0));
  auto g = lstm_backward(out.cache, p, Vector(3, 0.0));
  for (double v : g.w_x.flat()) EXPECT_EQ(v, 0.0);
  for (double v : g.w_h.flat()) EXPECT_EQ(v, 0.0);
  for (double v : g.b) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, BackwardShapeMismatchThrows) {
  LstmParams p(1, 2);
  auto out = lstm_forward({{1.0}}, p, Vector(2, 0.0), Vector(2, 0.0));
  EXPECT_THROW(lstm_backward(out.cache, p, Vector(3, 0.0)), ShapeError);
}

TEST(Lstm, ScalarGradientsMatchFiniteDifferencesAbsolute) {
  LstmParams p(1, 1);
  p.w_x.fill(1.0);
  p.w_h.fill(1.0);
  auto out = lstm_forward({{1.0}}, p, Vector{0.0}, Vector{0.0});
  auto g = lstm_backward(out.cache, p, Vector{1.0});
  auto f = [&](std::span<const double> wx) {
    LstmParams q = p;
    std::copy(wx.begin(), wx.end(), q.w_x.flat().begin());
    return lstm_forward({{1.0}}, q, Vector{0.0}, Vector{0.0}).h_t[0];
  };
  auto fd = finite_diff_grad(f, p.w_x.flat());
  for (std::size_t i = 0; i < fd.size(); ++i) EXPECT_NEAR(g.w_x.flat()[i], fd[i], 1e-6);
}

TEST(Lstm, ThreeStepGradientsMatchFiniteDifferences) {
  Rng rng(41);
  LstmParams p(3, 4);
  p.initialize(rng);
  std::vector<Vector> seq{{0.4, -0.2, 0.1}, {0.0, 0.9, -0.5}, {-0.3, 0.3, 0.6}};
  Vector seed{0.5, -1.0, 0.25, 2.0};
  auto out = lstm_forward(seq, p, Vector(4, 0.0), Vector(4, 0.0));
  auto g = lstm_backward(out.cache, p, seed);

  auto check = [&](Matrix LstmParams::*field, const Matrix& analytic) {
    auto f = [&](std::span<const double> w) {
      LstmParams q = p;
      std::copy(w.begin(), w.end(), (q.*field).flat().begin());
      return dot(lstm_forward(seq, q, Vector(4, 0.0), Vector(4, 0.0)).h_t, seed);
    };
    auto fd = finite_diff_grad(f, (p.*field).flat());
    for (std::size_t i = 0; i < fd.size(); ++i) EXPECT_LT(relative_error(analytic.flat()[i], fd[i]), 1e-4);
  };
  check(&LstmParams::w_x, g.w_x);
  check(&LstmParams::w_h, g.w_h);

  auto fb = [&](std::span<const double> b) {
    LstmParams q = p;
    q.b.assign(b.begin(), b.end());
    return dot(lstm_forward(seq, q, Vector(4, 0.0), Vector(4, 0.0)).h_t, seed);
  };
  auto fdb = finite_diff_grad(fb, p.b);
  for (std::size_t i = 0; i < fdb.size(); ++i) EXPECT_LT(relative_error(g.b[i], fdb[i]), 1e-4);

  for (std::size_t t = 0; t < seq.size(); ++t) {
    auto fx = [&](std::span<const double> x) {
      auto s2 = seq;
      s2[t].assign(x.begin(), x.end());
      return dot(lstm_forward(s2, p, Vector(4, 0.0), Vector(4, 0.0)).h_t, seed);
    };
    auto fdx = finite_diff_grad(fx, seq[t]);
    for (std::size_t i = 0; i < fdx.size(); ++i) EXPECT_LT(relative_error(g.inputs[t][i], fdx[i]), 1e-4);
  }
}

TEST(Adam, ZeroGradientIsIdentity) {
  Vector p{1.0, -2.0};
  AdamState s(2, {});
  adam_step(p, Vector{0.0, 0.0}, s);
  EXPECT_EQ(p, (Vector{1.0, -2.0}));
  EXPECT_EQ(s.t, 1u);
}

TEST(Adam, FirstStepIsScaleInvariant) {
  for (double g : {10.0, 0.01}) {
    Vector p{0.0};
    AdamState s(1, {});
    adam_step(p, Vector{g}, s);
    EXPECT_NEAR(p[0], -0.001, 1e-8);
  }
}

TEST(Adam, ShapeMismatchThrows) {
  Vector p{0.0, 0.0};
  AdamState s(2, {});
  EXPECT_THROW(adam_step(p, Vector{1.0}, s), ShapeError);
}

TEST(Adam, MinimizesQuadratic) {
  Vector p{3.0, -4.0};
  AdamConfig c;
  c.lr = 0.05;
  AdamState s(2, c);
  for (int i = 0; i < 2000; ++i) adam_step(p, Vector{2 * p[0], 2 * p[1]}, s);
  EXPECT_NEAR(p[0], 0.0, 1e-2);
  EXPECT_NEAR(p[1], 0.0, 1e-2);
  for (double v : s.v) EXPECT_GE(v, 0.0);
}

TEST(Dropout, ZeroProbabilityIsAllOnes) {
  Rng rng(1);
  for (double v : dropout_mask(50, 0.0, rng)) EXPECT_EQ(v, 1.0);
}

TEST(Dropout, ZeroFractionAndScale) {
  Rng rng(2);
  auto m = dropout_mask(100000, 0.2, rng);
  std::size_t zeros = 0;
  for (double v : m) {
    if (v == 0.0) ++zeros;
    else EXPECT_DOUBLE_EQ(v, 1.25);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.2, 0.01);
}

TEST(Dropout, SameSeedSameMask) {
  Rng a(7), b(7);
  EXPECT_EQ(dropout_mask(100, 0.5, a), dropout_mask(100, 0.5, b));
}

TEST(Dropout, InvalidProbabilityThrows) {
  Rng rng(1);
  EXPECT_THROW(dropout_mask(3, 1.0, rng), ParameterError);
  EXPECT_THROW(dropout_mask(3, -0.1, rng), ParameterError);
}

TEST(FiniteDiff, Square) {
  auto g = finite_diff_grad([](std::span<const double> x) { return x[0] * x[0]; }, Vector{3.0}, 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDiff, ConstantIsZero) {
  auto g = finite_diff_grad([](std::span<const double>) { return 4.0; }, Vector{1.0, 2.0});
  EXPECT_EQ(g, (Vector{0.0, 0.0}));
}

TEST(FiniteDiff, NonFiniteThrows) {
  EXPECT_THROW(finite_diff_grad([](std::span<const double> x) { return std::log(x[0]); }, Vector{0.0}), NumericError);
}

TEST(Rng, DerivedSeedsDifferByStage) {
  EXPECT_NE(derive_seed(42, "a"), derive_seed(42, "b"));
  EXPECT_EQ(derive_seed(42, "a"), derive_seed(42, "a"));
  Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
}
