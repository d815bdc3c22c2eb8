#include "boba/attacks.hpp"

#include <cmath>
#include <limits>

#include "boba/aggregation.hpp"
#include "boba/error.hpp"

namespace boba {
namespace {

Matrix replicate(const Vector& column, int count) {
  return column.replicate(1, count);
}

void require_honest(const Matrix& honest, int count) {
  require(honest.cols() >= 1, ErrorCode::kInvalidInput, "attack needs at least one honest gradient");
  require(count >= 0, ErrorCode::kInvalidInput, "negative Byzantine count");
}

}  // namespace

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "none") return AttackKind::kNone;
  if (name == "gauss") return AttackKind::kGauss;
  if (name == "ipm") return AttackKind::kIpm;
  if (name == "lie") return AttackKind::kLie;
  if (name == "mimic") return AttackKind::kMimic;
  if (name == "minmax") return AttackKind::kMinMax;
  if (name == "minsum") return AttackKind::kMinSum;
  throw Error(ErrorCode::kConfig, "unknown attack '" + name + "'");
}

std::string attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kGauss: return "gauss";
    case AttackKind::kIpm: return "ipm";
    case AttackKind::kLie: return "lie";
    case AttackKind::kMimic: return "mimic";
    case AttackKind::kMinMax: return "minmax";
    case AttackKind::kMinSum: return "minsum";
  }
  return "none";
}

Matrix gauss_attack(Eigen::Index dim, int count, Rng& rng, double variance) {
  require(variance > 0.0, ErrorCode::kInvalidInput, "Gauss attack variance must be positive");
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  Matrix out(dim, count);
  for (int j = 0; j < count; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) out(i, j) = normal(rng);
  }
  return out;
}

Matrix ipm_attack(const Matrix& honest, int count, double gamma) {
  require_honest(honest, count);
  return replicate(-gamma * honest.rowwise().mean(), count);
}

double lie_z(int n, int byzantine_count) {
  require(n > byzantine_count, ErrorCode::kPreconditionViolated, "LIE needs n > |B|");
  const double numerator = n - std::floor(n / 2.0 + 1.0);
  return inverse_normal_cdf(numerator / static_cast<double>(n - byzantine_count));
}

Vector coordinate_std(const Matrix& columns) {
  const Eigen::Index n = columns.cols();
  if (n < 2) return Vector::Zero(columns.rows());
  const Matrix centered = columns.colwise() - columns.rowwise().mean();
  return (centered.rowwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt();
}

Matrix lie_attack(const Matrix& honest, int n, int count) {
  require_honest(honest, count);
  const double z = lie_z(n, count);
  return replicate(honest.rowwise().mean() + z * coordinate_std(honest), count);
}

Matrix mimic_attack(const Matrix& honest, int target, int count) {
  require_honest(honest, count);
  require(target >= 0 && target < honest.cols(), ErrorCode::kInvalidInput,
          "mimic target " + std::to_string(target) + " out of range");
  return replicate(honest.col(target), count);
}

bool min_opt_feasible(const Matrix& honest, const Vector& candidate, MinOptVariant variant) {
  const Matrix d2 = pairwise_squared_distances(honest);
  const Vector to_candidate = (honest.colwise() - candidate).colwise().squaredNorm().transpose();
  if (variant == MinOptVariant::kMinMax) {
    return to_candidate.maxCoeff() <= d2.maxCoeff();
  }
  return to_candidate.sum() <= d2.rowwise().sum().maxCoeff();
}

MinOptResult min_opt_attack(const Matrix& honest, int count, MinOptVariant variant,
                            double gamma_init, double tau) {
  require(honest.cols() >= 2, ErrorCode::kInvalidInput, "MinMax/MinSum need two honest gradients");
  require(gamma_init > 0.0 && tau > 0.0, ErrorCode::kInvalidInput, "gamma_init and tau must be > 0");
  const Vector mean = honest.rowwise().mean();
  const Vector direction = coordinate_std(honest);
  MinOptResult out;
  if (direction.squaredNorm() == 0.0) {
    out.columns = replicate(mean, count);
    return out;
  }

  const Matrix d2 = pairwise_squared_distances(honest);
  const double max_pair = d2.maxCoeff();
  const double max_sum = d2.rowwise().sum().maxCoeff();
  auto feasible = [&](double gamma) {
    const Vector candidate = mean + gamma * direction;
    const Vector dist = (honest.colwise() - candidate).colwise().squaredNorm().transpose();
    return variant == MinOptVariant::kMinMax ? dist.maxCoeff() <= max_pair : dist.sum() <= max_sum;
  };

  // gamma = 0 is always feasible: the mean is inside both spreads.
  double lo = 0.0;
  double hi = gamma_init;
  for (int guard = 0; feasible(hi) && guard < 1000; ++guard) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo >= tau) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.gamma = lo;
  out.columns = replicate(mean + lo * direction, count);
  return out;
}

double inverse_normal_cdf(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::kInvalidInput, "inverse normal CDF needs p in (0, 1)");
  // 1 - p is exact for p >= 0.5, so the upper half goes through the lower tail.
  if (p > 0.5) return -inverse_normal_cdf(1.0 - p);
  // Acklam's rational approximation followed by one Halley refinement step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x = 0.0;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

Matrix apply_attack(const AttackSpec& spec, const Matrix& honest, int n_total, int count, Rng& rng) {
  if (count == 0 || spec.kind == AttackKind::kNone) return Matrix(honest.rows(), 0);
  switch (spec.kind) {
    case AttackKind::kGauss: return gauss_attack(honest.rows(), count, rng, spec.variance);
    case AttackKind::kIpm: return ipm_attack(honest, count, spec.gamma);
    case AttackKind::kLie: return lie_attack(honest, n_total, count);
    case AttackKind::kMimic:
      return mimic_attack(honest, spec.mimic_target < 0 ? 0 : spec.mimic_target, count);
    case AttackKind::kMinMax:
      return min_opt_attack(honest, count, MinOptVariant::kMinMax, spec.gamma_init, spec.tau).columns;
    case AttackKind::kMinSum:
      return min_opt_attack(honest, count, MinOptVariant::kMinSum, spec.gamma_init, spec.tau).columns;
    case AttackKind::kNone: break;
  }
  return Matrix(honest.rows(), 0);
}

}  // namespace boba
