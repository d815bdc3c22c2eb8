#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace boba {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Affine subspace {basis * lambda + mean}. The basis columns are orthonormal.
struct AffineSubspace {
  Matrix basis;  // d x k
  Vector mean;   // d

  Eigen::Index ambient_dim() const { return mean.size(); }
  Eigen::Index rank() const { return basis.cols(); }
};

struct TruncatedSvd {
  AffineSubspace subspace;
  Vector singular_values;  // k, non-increasing
  Matrix right_vectors;    // n x k
};

/// Best rank-k affine approximation of the columns of `points`: the mean is
/// the column average and the basis spans the top-k left singular vectors of
/// the centered matrix. Basis orientation: the largest-magnitude entry of each
/// column is positive. Directions with zero singular value are completed to an
/// orthonormal basis deterministically.
TruncatedSvd truncated_svd(const Matrix& points, int rank);

Vector project(const AffineSubspace& subspace, const Vector& g);
Vector encode(const AffineSubspace& subspace, const Vector& g);
Vector decode(const AffineSubspace& subspace, const Vector& lambda);
Matrix encode_columns(const AffineSubspace& subspace, const Matrix& points);

/// ||g - project(g)||^2
double squared_residual(const AffineSubspace& subspace, const Vector& g);

/// Sum of squared residuals of every column (untrimmed reconstruction loss).
double reconstruction_loss(const AffineSubspace& subspace, const Matrix& points);

/// Solves [V; 1^T] p = [g; 1] for the affine coordinates p of g with respect
/// to the c vertices in V ((c-1) x c). Throws kDegenerateSimplex when the
/// reciprocal condition number of the stacked system is below min_rcond.
class AffineCoordinateSolver {
 public:
  static constexpr double kDefaultMinRcond = 1e-10;

  explicit AffineCoordinateSolver(const Matrix& encoded_vertices,
                                  double min_rcond = kDefaultMinRcond);

  Vector solve(const Vector& encoded_g) const;
  double rcond() const { return rcond_; }
  Eigen::Index num_vertices() const { return system_.cols(); }

 private:
  Matrix system_;
  Eigen::PartialPivLU<Matrix> lu_;
  double rcond_ = 0.0;
};

Vector solve_affine_coordinates(const Matrix& encoded_vertices, const Vector& encoded_g,
                                double min_rcond = AffineCoordinateSolver::kDefaultMinRcond);

/// Singular values of (points - mean 1^T), non-increasing, length min(d, n).
Vector centered_singular_values(const Matrix& points);

/// sigma_k (1-based) of the centered points.
double kth_singular_value(const Matrix& points, int k);

Vector column_mean(const Matrix& points);

/// A^T A, computed as a symmetric rank update.
Matrix gram(const Matrix& a);

/// a^T b
Matrix cross_gram(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

// -- Kernel-space affine subspaces -----------------------------------------
//
// Every quantity BOBA needs (residuals, encodings, the decoded aggregate) can
// be written in terms of inner products between the input columns. A
// KernelSubspace stores the subspace implicitly as weights over the columns
// of some column set X (N columns): mean = X a, basis = X B. All operations
// below take the N x N Gram matrix X^T X and never touch the d-dimensional
// data, so each refit costs O(N^3) instead of O(N^2 d).

struct KernelSubspace {
  Vector mean_weights;   // N
  Matrix basis_weights;  // N x k; zero columns mark rank-deficient directions
  Vector singular_values;
};

/// Truncated SVD of the selected columns (indices into the Gram matrix).
KernelSubspace kernel_truncated_svd(const Matrix& gram, std::span<const int> columns, int rank);

/// ||x_j - project(x_j)||^2 for every column j of the Gram matrix.
Vector kernel_squared_residuals(const Matrix& gram, const KernelSubspace& subspace);

/// Encoded coordinates of every column: basis^T (x_j - mean), k x N.
Matrix kernel_encode(const Matrix& gram, const KernelSubspace& subspace);

/// Explicit basis/mean given the data columns (X may be split in two blocks
/// that are logically concatenated: [first second]).
AffineSubspace materialize(const KernelSubspace& subspace, const Matrix& first,
                           const Matrix* second = nullptr);

/// [first second] * weights
Vector combine_columns(const Matrix& first, const Matrix* second, const Vector& weights);

}  // namespace boba
