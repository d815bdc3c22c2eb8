#pragma once

#include <string>

#include "boba/linalg.hpp"
#include "boba/rng.hpp"

namespace boba {

enum class AttackKind { kNone, kGauss, kIpm, kLie, kMimic, kMinMax, kMinSum };

AttackKind parse_attack_kind(const std::string& name);
std::string attack_kind_name(AttackKind kind);

struct AttackSpec {
  AttackKind kind = AttackKind::kNone;
  double gamma = 10.0;        // IPM scale
  double variance = 200.0;    // Gauss
  double gamma_init = 10.0;   // MinMax / MinSum search start
  double tau = 1e-5;          // MinMax / MinSum search resolution
  int mimic_target = -1;      // honest column index; -1 lets the caller choose
};

/// Columns drawn i.i.d. from N(0, variance I).
Matrix gauss_attack(Eigen::Index dim, int count, Rng& rng, double variance = 200.0);

/// Every column equals -gamma times the honest mean.
Matrix ipm_attack(const Matrix& honest, int count, double gamma = 10.0);

/// z = Phi^-1((n - floor(n/2 + 1)) / (n - |B|)).
double lie_z(int n, int byzantine_count);

/// Every column equals the coordinate-wise honest mean + z * standard deviation.
Matrix lie_attack(const Matrix& honest, int n, int count);

Matrix mimic_attack(const Matrix& honest, int target, int count);

enum class MinOptVariant { kMinMax, kMinSum };

struct MinOptResult {
  Matrix columns;
  double gamma = 0.0;
};

/// Largest gamma (to within tau) such that mean + gamma * std stays inside
/// the honest spread: max distance to any honest gradient bounded by the max
/// pairwise honest distance (MinMax), or sum of squared distances bounded by
/// the largest honest sum (MinSum).
MinOptResult min_opt_attack(const Matrix& honest, int count, MinOptVariant variant,
                            double gamma_init = 10.0, double tau = 1e-5);

bool min_opt_feasible(const Matrix& honest, const Vector& candidate, MinOptVariant variant);

/// Coordinate-wise sample standard deviation (zero for a single column).
Vector coordinate_std(const Matrix& columns);

/// Inverse of the standard normal CDF, |error| < 1e-12 on (0, 1).
double inverse_normal_cdf(double p);

/// Dispatches on spec.kind. n_total = honest + Byzantine client count.
Matrix apply_attack(const AttackSpec& spec, const Matrix& honest, int n_total, int count, Rng& rng);

}  // namespace boba
