#include "boba/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "boba/error.hpp"

namespace boba {
namespace {

// Eigenvalues of a Gram matrix are accurate to about eps * lambda_max, so
// anything below this relative level is indistinguishable from zero.
constexpr double kRelativeEigenFloor = 1e-13;

void orient_columns(Matrix& u, Matrix* v) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index arg = 0;
    u.col(j).cwiseAbs().maxCoeff(&arg);
    if (u(arg, j) < 0.0) {
      u.col(j) *= -1.0;
      if (v != nullptr) v->col(j) *= -1.0;
    }
  }
}

// Modified Gram-Schmidt over the columns flagged valid; the remaining columns
// are filled with standard basis vectors orthogonalised against the rest.
void orthonormalize(Matrix& u, std::vector<bool> valid) {
  const Eigen::Index d = u.rows();
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    if (!valid[j]) continue;
    for (Eigen::Index i = 0; i < j; ++i) {
      if (valid[i]) u.col(j) -= u.col(i).dot(u.col(j)) * u.col(i);
    }
    const double norm = u.col(j).norm();
    if (norm > 0.0) {
      u.col(j) /= norm;
    } else {
      valid[j] = false;
    }
  }
  Eigen::Index candidate = 0;
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    if (valid[j]) continue;
    while (candidate < d) {
      Vector e = Vector::Unit(d, candidate++);
      for (Eigen::Index i = 0; i < u.cols(); ++i) {
        if (valid[i]) e -= u.col(i).dot(e) * u.col(i);
      }
      for (Eigen::Index i = 0; i < u.cols(); ++i) {
        if (valid[i]) e -= u.col(i).dot(e) * u.col(i);
      }
      const double norm = e.norm();
      if (norm > 0.5) {
        u.col(j) = e / norm;
        valid[j] = true;
        break;
      }
    }
  }
}

void check_points(const Matrix& points, int rank) {
  require(points.rows() > 0 && points.cols() > 0, ErrorCode::kInvalidInput, "empty point matrix");
  require(all_finite(points), ErrorCode::kInvalidInput, "non-finite entries in point matrix");
  const auto limit = std::min(points.rows(), points.cols());
  require(rank >= 1 && rank <= limit, ErrorCode::kInvalidRank,
          "rank " + std::to_string(rank) + " outside [1, " + std::to_string(limit) + "]");
}

void check_dims(const AffineSubspace& s, Eigen::Index d) {
  require(s.mean.size() == d && s.basis.rows() == d, ErrorCode::kDimensionMismatch,
          "vector of length " + std::to_string(d) + " against subspace in R^" +
              std::to_string(s.mean.size()));
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

Vector column_mean(const Matrix& points) { return points.rowwise().mean(); }

Matrix gram(const Matrix& a) {
  Matrix k = Matrix::Zero(a.cols(), a.cols());
  k.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  return k.selfadjointView<Eigen::Lower>();
}

Matrix cross_gram(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorCode::kDimensionMismatch, "cross_gram row mismatch");
  return a.transpose() * b;
}

TruncatedSvd truncated_svd(const Matrix& points, int rank) {
  check_points(points, rank);
  const Eigen::Index d = points.rows();
  const Eigen::Index n = points.cols();
  const Eigen::Index k = rank;

  TruncatedSvd out;
  out.subspace.mean = column_mean(points);
  const Matrix centered = points.colwise() - out.subspace.mean;

  Matrix u(d, k);
  Matrix v(n, k);
  Vector sigma(k);
  std::vector<bool> valid(static_cast<size_t>(k), false);

  if (n <= d) {
    // Gram route: eigen-decompose the n x n kernel, U = A V Sigma^-1.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram(centered));
    const Vector& lambda = eig.eigenvalues();
    const double top = std::max(lambda(n - 1), 0.0);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double l = std::max(lambda(n - 1 - j), 0.0);
      sigma(j) = std::sqrt(l);
      v.col(j) = eig.eigenvectors().col(n - 1 - j);
      if (top > 0.0 && l > kRelativeEigenFloor * top) {
        u.col(j) = centered * v.col(j) / sigma(j);
        valid[j] = true;
      } else {
        u.col(j).setZero();
      }
    }
  } else {
    // Covariance route: eigen-decompose the d x d scatter, V = A^T U Sigma^-1.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram(centered.transpose()));
    const Vector& lambda = eig.eigenvalues();
    const double top = std::max(lambda(d - 1), 0.0);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double l = std::max(lambda(d - 1 - j), 0.0);
      sigma(j) = std::sqrt(l);
      u.col(j) = eig.eigenvectors().col(d - 1 - j);
      valid[j] = true;
      if (top > 0.0 && l > kRelativeEigenFloor * top) {
        v.col(j) = centered.transpose() * u.col(j) / sigma(j);
      } else {
        v.col(j).setZero();
      }
    }
  }

  orthonormalize(u, valid);
  orient_columns(u, &v);
  out.subspace.basis = std::move(u);
  out.singular_values = std::move(sigma);
  out.right_vectors = std::move(v);
  return out;
}

Vector project(const AffineSubspace& subspace, const Vector& g) {
  return decode(subspace, encode(subspace, g));
}

Vector encode(const AffineSubspace& subspace, const Vector& g) {
  check_dims(subspace, g.size());
  return subspace.basis.transpose() * (g - subspace.mean);
}

Vector decode(const AffineSubspace& subspace, const Vector& lambda) {
  require(lambda.size() == subspace.basis.cols(), ErrorCode::kDimensionMismatch,
          "latent vector length " + std::to_string(lambda.size()) + " against rank " +
              std::to_string(subspace.basis.cols()));
  return subspace.basis * lambda + subspace.mean;
}

Matrix encode_columns(const AffineSubspace& subspace, const Matrix& points) {
  check_dims(subspace, points.rows());
  return subspace.basis.transpose() * (points.colwise() - subspace.mean);
}

double squared_residual(const AffineSubspace& subspace, const Vector& g) {
  return (g - project(subspace, g)).squaredNorm();
}

double reconstruction_loss(const AffineSubspace& subspace, const Matrix& points) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) loss += squared_residual(subspace, points.col(i));
  return loss;
}

AffineCoordinateSolver::AffineCoordinateSolver(const Matrix& encoded_vertices, double min_rcond) {
  const Eigen::Index c = encoded_vertices.cols();
  require(c >= 1 && encoded_vertices.rows() == c - 1, ErrorCode::kDimensionMismatch,
          "encoded vertices must be (c-1) x c");
  require(all_finite(encoded_vertices), ErrorCode::kInvalidInput, "non-finite encoded vertices");
  system_.resize(c, c);
  system_.topRows(c - 1) = encoded_vertices;
  system_.row(c - 1).setOnes();
  const Vector sv = Eigen::JacobiSVD<Matrix>(system_).singularValues();
  rcond_ = sv(0) > 0.0 ? sv(c - 1) / sv(0) : 0.0;
  require(rcond_ >= min_rcond, ErrorCode::kDegenerateSimplex,
          "stacked vertex system has reciprocal condition " + std::to_string(rcond_));
  lu_.compute(system_);
}

Vector AffineCoordinateSolver::solve(const Vector& encoded_g) const {
  const Eigen::Index c = system_.cols();
  require(encoded_g.size() == c - 1, ErrorCode::kDimensionMismatch,
          "encoded gradient length mismatch");
  Vector rhs(c);
  rhs.head(c - 1) = encoded_g;
  rhs(c - 1) = 1.0;
  Vector p = lu_.solve(rhs);
  // One step of iterative refinement keeps both constraints tight.
  p += lu_.solve(rhs - system_ * p);
  return p;
}

Vector solve_affine_coordinates(const Matrix& encoded_vertices, const Vector& encoded_g,
                                double min_rcond) {
  return AffineCoordinateSolver(encoded_vertices, min_rcond).solve(encoded_g);
}

Vector centered_singular_values(const Matrix& points) {
  require(points.rows() > 0 && points.cols() > 0, ErrorCode::kInvalidInput, "empty point matrix");
  require(all_finite(points), ErrorCode::kInvalidInput, "non-finite entries in point matrix");
  const Matrix centered = points.colwise() - column_mean(points);
  return Eigen::BDCSVD<Matrix>(centered).singularValues();
}

double kth_singular_value(const Matrix& points, int k) {
  const auto limit = std::min(points.rows(), points.cols());
  require(k >= 1 && k <= limit, ErrorCode::kInvalidRank,
          "k = " + std::to_string(k) + " outside [1, " + std::to_string(limit) + "]");
  return centered_singular_values(points)(k - 1);
}

KernelSubspace kernel_truncated_svd(const Matrix& gram_matrix, std::span<const int> columns,
                                    int rank) {
  const Eigen::Index total = gram_matrix.rows();
  const auto m = static_cast<Eigen::Index>(columns.size());
  require(m >= 1, ErrorCode::kInvalidInput, "empty column selection");
  require(rank >= 1 && rank <= m, ErrorCode::kInvalidRank,
          "rank " + std::to_string(rank) + " exceeds selection size " + std::to_string(m));

  Matrix sub(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = gram_matrix(columns[a], columns[b]);
  }
  const Vector row_mean = sub.rowwise().mean();
  const double grand = row_mean.mean();
  Matrix centered = sub;
  centered.colwise() -= row_mean;
  centered.rowwise() -= row_mean.transpose();
  centered.array() += grand;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(centered);
  const Vector& lambda = eig.eigenvalues();
  const double top = std::max(lambda(m - 1), 0.0);

  KernelSubspace out;
  out.mean_weights = Vector::Zero(total);
  for (int c : columns) out.mean_weights(c) = 1.0 / static_cast<double>(m);
  out.basis_weights = Matrix::Zero(total, rank);
  out.singular_values.resize(rank);
  for (Eigen::Index j = 0; j < rank; ++j) {
    const double l = std::max(lambda(m - 1 - j), 0.0);
    out.singular_values(j) = std::sqrt(l);
    if (!(top > 0.0 && l > kRelativeEigenFloor * top)) continue;
    Vector w = eig.eigenvectors().col(m - 1 - j);
    w.array() -= w.mean();
    w /= out.singular_values(j);
    for (Eigen::Index a = 0; a < m; ++a) out.basis_weights(columns[a], j) = w(a);
  }
  return out;
}

Matrix kernel_encode(const Matrix& gram_matrix, const KernelSubspace& s) {
  const Vector ka = gram_matrix * s.mean_weights;
  Matrix encoded = s.basis_weights.transpose() * gram_matrix;
  encoded.colwise() -= s.basis_weights.transpose() * ka;
  return encoded;
}

Vector kernel_squared_residuals(const Matrix& gram_matrix, const KernelSubspace& s) {
  const Vector ka = gram_matrix * s.mean_weights;
  const double aka = s.mean_weights.dot(ka);
  const Matrix encoded = kernel_encode(gram_matrix, s);
  Vector out(gram_matrix.rows());
  for (Eigen::Index j = 0; j < gram_matrix.rows(); ++j) {
    const double dist = gram_matrix(j, j) - 2.0 * ka(j) + aka;
    out(j) = std::max(dist - encoded.col(j).squaredNorm(), 0.0);
  }
  return out;
}

Vector combine_columns(const Matrix& first, const Matrix* second, const Vector& weights) {
  const Eigen::Index n1 = first.cols();
  const Eigen::Index n2 = second != nullptr ? second->cols() : 0;
  require(weights.size() == n1 + n2, ErrorCode::kDimensionMismatch, "weight length mismatch");
  Vector out = first * weights.head(n1);
  if (n2 > 0) out.noalias() += *second * weights.tail(n2);
  return out;
}

AffineSubspace materialize(const KernelSubspace& s, const Matrix& first, const Matrix* second) {
  AffineSubspace out;
  out.mean = combine_columns(first, second, s.mean_weights);
  const Eigen::Index d = first.rows();
  const Eigen::Index k = s.basis_weights.cols();
  Matrix u(d, k);
  std::vector<bool> valid(static_cast<size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    valid[j] = s.basis_weights.col(j).squaredNorm() > 0.0;
    u.col(j) = valid[j] ? combine_columns(first, second, s.basis_weights.col(j))
                        : Vector::Zero(d);
  }
  orthonormalize(u, valid);
  orient_columns(u, nullptr);
  out.basis = std::move(u);
  return out;
}

}  // namespace boba
