#include <cmath>
#include <limits>
#include <numeric>

#include "boba/linalg.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using boba::AffineSubspace;
using boba::ErrorCode;
using boba::Matrix;
using boba::Vector;
using testing::random_matrix;
using testing::random_vector;

namespace {

AffineSubspace axis_subspace() {
  AffineSubspace s;
  s.basis = Matrix(2, 1);
  s.basis << 1.0, 0.0;
  s.mean = Vector::Zero(2);
  return s;
}

AffineSubspace random_subspace(int d, int k, std::mt19937_64& rng) {
  return boba::truncated_svd(random_matrix(d, k + 4, rng), k).subspace;
}

}  // namespace

TEST_SUITE("linalg") {
  TEST_CASE("truncated_svd of identical columns has the column as mean and zero spread") {
    Matrix pts(3, 4);
    for (int j = 0; j < 4; ++j) pts.col(j) << 1.0, -2.0, 0.5;
    const auto svd = boba::truncated_svd(pts, 1);
    CHECK((svd.subspace.mean - pts.col(0)).norm() < 1e-15);
    CHECK(svd.singular_values(0) == doctest::Approx(0.0));
    CHECK(std::abs(svd.subspace.basis.col(0).norm() - 1.0) < 1e-12);
  }

  TEST_CASE("truncated_svd of two symmetric points") {
    Matrix pts(2, 2);
    pts << -1.0, 1.0, 0.0, 0.0;
    const auto svd = boba::truncated_svd(pts, 1);
    CHECK(svd.subspace.mean.norm() < 1e-15);
    Matrix expected(2, 2);
    expected << 1.0, 0.0, 0.0, 0.0;
    CHECK((oracle::projector(svd.subspace.basis) - expected).norm() < 1e-12);
    CHECK(svd.singular_values(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  }

  TEST_CASE("truncated_svd reconstruction loss equals the discarded spectrum") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix pts = random_matrix(5, 10, rng);
      const auto svd = boba::truncated_svd(pts, 2);
      const Vector sv = oracle::centered_singular_values(pts);
      double tail = 0.0;
      for (Eigen::Index j = 2; j < sv.size(); ++j) tail += sv(j) * sv(j);
      CHECK(boba::reconstruction_loss(svd.subspace, pts) == doctest::Approx(tail).epsilon(1e-10));
      CHECK(svd.singular_values(0) == doctest::Approx(sv(0)).epsilon(1e-10));
      CHECK(svd.singular_values(1) == doctest::Approx(sv(1)).epsilon(1e-10));
    }
  }

  TEST_CASE("truncated_svd spans the oracle principal subspace, on both the wide and tall routes") {
    std::mt19937_64 rng(12);
    for (const auto& [d, n] : {std::pair{4, 12}, std::pair{12, 5}}) {
      const Matrix pts = random_matrix(d, n, rng);
      const auto svd = boba::truncated_svd(pts, 3);
      const Matrix expected = oracle::projector(oracle::principal_basis(pts, 3));
      CHECK((oracle::projector(svd.subspace.basis) - expected).norm() < 1e-9);
      CHECK((svd.subspace.mean - pts.rowwise().mean()).norm() < 1e-12);
    }
  }

  TEST_CASE("basis columns are orthonormal and singular values non-increasing") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      std::uniform_int_distribution<int> dim(2, 15);
      const int d = dim(rng);
      const int n = dim(rng);
      const int k = std::uniform_int_distribution<int>(1, std::min(d, n))(rng);
      const auto svd = boba::truncated_svd(random_matrix(d, n, rng), k);
      const Matrix gram = svd.subspace.basis.transpose() * svd.subspace.basis;
      CHECK((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);
      for (int j = 0; j < k; ++j) {
        CHECK(svd.singular_values(j) >= 0.0);
        if (j > 0) CHECK(svd.singular_values(j) <= svd.singular_values(j - 1));
      }
    }
  }

  TEST_CASE("rank-deficient input still yields an orthonormal basis") {
    Matrix pts(4, 3);
    pts << 1, 2, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0;
    const auto svd = boba::truncated_svd(pts, 3);
    const Matrix gram = svd.subspace.basis.transpose() * svd.subspace.basis;
    CHECK((gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(svd.singular_values(1) == doctest::Approx(0.0));
  }

  TEST_CASE("truncated_svd is deterministic") {
    std::mt19937_64 rng(14);
    const Matrix pts = random_matrix(7, 9, rng);
    const auto a = boba::truncated_svd(pts, 3);
    const auto b = boba::truncated_svd(pts, 3);
    CHECK(a.subspace.basis == b.subspace.basis);
    CHECK(a.singular_values == b.singular_values);
  }

  TEST_CASE("truncated_svd rejects bad ranks and non-finite input") {
    Matrix pts = Matrix::Ones(3, 4);
    CHECK_ERROR_CODE(boba::truncated_svd(pts, 4), ErrorCode::kInvalidRank);
    CHECK_ERROR_CODE(boba::truncated_svd(pts, 0), ErrorCode::kInvalidRank);
    pts(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_ERROR_CODE(boba::truncated_svd(pts, 1), ErrorCode::kInvalidInput);
    pts(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_ERROR_CODE(boba::truncated_svd(pts, 1), ErrorCode::kInvalidInput);
  }

  TEST_CASE("project drops the orthogonal coordinate") {
    const auto s = axis_subspace();
    Vector g(2);
    g << 3.0, 4.0;
    const Vector p = boba::project(s, g);
    CHECK(p(0) == 3.0);
    CHECK(p(1) == 0.0);
    CHECK(boba::squared_residual(s, g) == doctest::Approx(16.0));
  }

  TEST_CASE("project leaves points of the subspace unchanged") {
    std::mt19937_64 rng(15);
    const auto s = random_subspace(6, 2, rng);
    const Vector on = s.basis * random_vector(2, rng) + s.mean;
    CHECK((boba::project(s, on) - on).norm() < 1e-12);
  }

  TEST_CASE("project is the nearest point among 1000 sampled subspace points") {
    std::mt19937_64 rng(16);
    const auto s = random_subspace(8, 3, rng);
    const Vector g = random_vector(8, rng, 3.0);
    const double best = (boba::project(s, g) - g).norm();
    for (int t = 0; t < 1000; ++t) {
      const Vector other = s.basis * random_vector(3, rng, 3.0) + s.mean;
      CHECK(best <= (other - g).norm() + 1e-12);
    }
    CHECK((boba::project(s, g) - oracle::project_onto(s.basis, s.mean, g)).norm() < 1e-10);
  }

  TEST_CASE("encode and decode compose to projection and invert on coordinates") {
    std::mt19937_64 rng(17);
    const auto s = random_subspace(9, 4, rng);
    CHECK((boba::decode(s, Vector::Zero(4)) - s.mean).norm() < 1e-15);
    for (int t = 0; t < 20; ++t) {
      const Vector g = random_vector(9, rng);
      CHECK((boba::decode(s, boba::encode(s, g)) - boba::project(s, g)).norm() < 1e-10);
      const Vector lambda = random_vector(4, rng);
      CHECK((boba::encode(s, boba::decode(s, lambda)) - lambda).norm() < 1e-10);
      const Vector on = boba::decode(s, lambda);
      CHECK((boba::decode(s, boba::encode(s, on)) - on).norm() < 1e-10);
    }
    const Matrix pts = random_matrix(9, 5, rng);
    const Matrix enc = boba::encode_columns(s, pts);
    for (int j = 0; j < 5; ++j) CHECK((enc.col(j) - boba::encode(s, pts.col(j))).norm() < 1e-12);
  }

  TEST_CASE("projection operations reject dimension mismatches") {
    const auto s = axis_subspace();
    CHECK_ERROR_CODE(boba::project(s, Vector::Zero(3)), ErrorCode::kDimensionMismatch);
    CHECK_ERROR_CODE(boba::encode(s, Vector::Zero(3)), ErrorCode::kDimensionMismatch);
    CHECK_ERROR_CODE(boba::decode(s, Vector::Zero(2)), ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("affine coordinates of a vertex are one-hot") {
    Matrix v(2, 3);
    v << 1.0, 0.0, -1.0, 0.0, 1.0, -1.0;
    for (int z = 0; z < 3; ++z) {
      const Vector p = boba::solve_affine_coordinates(v, v.col(z));
      for (int j = 0; j < 3; ++j) CHECK(p(j) == doctest::Approx(j == z ? 1.0 : 0.0).epsilon(1e-12));
    }
  }

  TEST_CASE("affine coordinates on a segment") {
    Matrix v(1, 2);
    v << -2.0, 5.0;
    Vector g(1);
    g << 0.3 * -2.0 + 0.7 * 5.0;
    const Vector p = boba::solve_affine_coordinates(v, g);
    CHECK(p(0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(p(1) == doctest::Approx(0.7).epsilon(1e-12));
  }

  TEST_CASE("affine coordinates satisfy both constraints and match Gaussian elimination") {
    std::mt19937_64 rng(18);
    for (int t = 0; t < 50; ++t) {
      const Matrix v = random_matrix(3, 4, rng);
      const Vector g = random_vector(3, rng);
      const Vector p = boba::solve_affine_coordinates(v, g);
      CHECK((v * p - g).norm() < 1e-8);
      CHECK(std::abs(p.sum() - 1.0) < 1e-8);
      Matrix stacked(4, 4);
      stacked << v, Matrix::Ones(1, 4);
      Vector rhs(4);
      rhs << g, 1.0;
      CHECK((p - oracle::gauss_solve(stacked, rhs)).norm() < 1e-8);
    }
  }

  TEST_CASE("collinear vertices are a degenerate simplex") {
    Matrix v(2, 3);
    v << 0.0, 1.0, 2.0, 0.0, 1.0, 2.0;
    CHECK_ERROR_CODE(boba::AffineCoordinateSolver{v}, ErrorCode::kDegenerateSimplex);
    Matrix repeated(1, 2);
    repeated << 1.0, 1.0;
    CHECK_ERROR_CODE(boba::solve_affine_coordinates(repeated, Vector::Zero(1)), ErrorCode::kDegenerateSimplex);
    CHECK_ERROR_CODE(boba::solve_affine_coordinates(Matrix::Zero(2, 2), Vector::Zero(1)),
                     ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("kth singular value examples") {
    Matrix same = Matrix::Ones(3, 5);
    CHECK(boba::kth_singular_value(same, 1) == doctest::Approx(0.0));
    Matrix cross(2, 4);
    cross << 1, -1, 0, 0, 0, 0, 1, -1;
    CHECK(boba::kth_singular_value(cross, 2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    std::mt19937_64 rng(19);
    const Matrix pts = random_matrix(6, 9, rng);
    const Vector sv = oracle::centered_singular_values(pts);
    for (int k = 1; k <= 6; ++k) CHECK(boba::kth_singular_value(pts, k) == doctest::Approx(sv(k - 1)).epsilon(1e-9));
    CHECK_ERROR_CODE(boba::kth_singular_value(pts, 7), ErrorCode::kInvalidRank);
    CHECK_ERROR_CODE(boba::kth_singular_value(pts, 0), ErrorCode::kInvalidRank);
  }

  TEST_CASE("gram and cross_gram match explicit products") {
    std::mt19937_64 rng(20);
    const Matrix a = random_matrix(30, 6, rng);
    const Matrix b = random_matrix(30, 3, rng);
    CHECK((boba::gram(a) - a.transpose() * a).norm() < 1e-12);
    CHECK((boba::cross_gram(a, b) - a.transpose() * b).norm() < 1e-12);
    CHECK_ERROR_CODE(boba::cross_gram(a, Matrix::Zero(29, 2)), ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("kernel subspace agrees with the explicit subspace") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
      const Matrix x = random_matrix(12, 9, rng);
      const Matrix k = x.transpose() * x;
      std::vector<int> cols = {0, 2, 3, 5, 6, 8};
      const auto ks = boba::kernel_truncated_svd(k, cols, 3);
      const AffineSubspace explicit_fit = boba::truncated_svd(oracle::columns(x, cols), 3).subspace;
      const AffineSubspace implicit_fit = boba::materialize(ks, x);
      CHECK((oracle::projector(implicit_fit.basis) - oracle::projector(explicit_fit.basis)).norm() < 1e-8);
      CHECK((implicit_fit.mean - explicit_fit.mean).norm() < 1e-10);
      const Vector res = boba::kernel_squared_residuals(k, ks);
      const Matrix enc = boba::kernel_encode(k, ks);
      for (int j = 0; j < 9; ++j) {
        CHECK(res(j) == doctest::Approx(boba::squared_residual(explicit_fit, x.col(j))).epsilon(1e-8));
        const Vector weights = ks.basis_weights * enc.col(j) + ks.mean_weights;
        CHECK((boba::combine_columns(x, nullptr, weights) - boba::project(explicit_fit, x.col(j))).norm() < 1e-8);
      }
      const Vector w = random_vector(9, rng);
      CHECK((boba::combine_columns(x, nullptr, w) - x * w).norm() < 1e-12);
    }
  }

  TEST_CASE("property: nearest point, contraction, affine commutation, idempotence") {
    std::mt19937_64 rng(22);
    std::uniform_int_distribution<int> dim(2, 10);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int t = 0; t < 500; ++t) {
      const int d = dim(rng);
      const int k = std::uniform_int_distribution<int>(1, d - 1)(rng);
      const auto s = random_subspace(d, k, rng);
      const Vector u = random_vector(d, rng, 3.0);
      const Vector v = random_vector(d, rng, 3.0);
      const Vector pu = boba::project(s, u);
      const Vector pv = boba::project(s, v);
      CHECK((pu - u).norm() <= (pv - u).norm() + 1e-8);
      CHECK((pu - pv).norm() <= (u - v).norm() + 1e-8);
      CHECK((boba::project(s, pu) - pu).norm() < 1e-9 * (1.0 + pu.norm()));

      const int m = std::uniform_int_distribution<int>(2, 5)(rng);
      const Matrix pts = random_matrix(d, m, rng);
      Vector lambda(m);
      for (int i = 0; i < m - 1; ++i) lambda(i) = normal(rng);
      lambda(m - 1) = 1.0 - lambda.head(m - 1).sum();
      Vector combo = Vector::Zero(d);
      for (int i = 0; i < m; ++i) combo += lambda(i) * boba::project(s, pts.col(i));
      CHECK((boba::project(s, pts * lambda) - combo).norm() < 1e-8 * (1.0 + lambda.cwiseAbs().sum()));
    }
  }

  TEST_CASE("property: the fitted subspace beats 100 perturbed subspaces") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 10; ++t) {
      const Matrix pts = random_matrix(6, 12, rng);
      const auto fit = boba::truncated_svd(pts, 2).subspace;
      const double best = boba::reconstruction_loss(fit, pts);
      for (int p = 0; p < 100; ++p) {
        AffineSubspace other;
        const Matrix raw = fit.basis + random_matrix(6, 2, rng, 0.1);
        other.basis = raw.householderQr().householderQ() * Matrix::Identity(6, 2);
        other.mean = fit.mean + random_vector(6, rng, 0.1);
        CHECK(best <= boba::reconstruction_loss(other, pts) + 1e-10);
      }
    }
  }
}
