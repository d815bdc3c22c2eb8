#include <cmath>
#include <string>

#include "boba/aggregation.hpp"
#include "boba/error.hpp"
#include "boba/rng.hpp"

namespace boba {

BoundTerms compute_boba_error_bound(const BoundInputs& in) {
  require(in.n > 2 * in.f, ErrorCode::kPreconditionViolated,
          "bound needs n > 2f, got n = " + std::to_string(in.n) + ", f = " + std::to_string(in.f));
  require(in.sigma > 0.0, ErrorCode::kPreconditionViolated, "bound needs sigma > 0");

  const double n = in.n;
  const double f = in.f;
  const double c = in.c;
  const double ratio = 1.0 / (n - 2.0 * f) + (in.delta * in.delta) / (in.sigma * in.sigma);
  const double spread = 1.0 + c * std::abs(in.p_min);
  const double beta2 = in.beta * in.beta;

  BoundTerms t;
  t.c1 = 4.0 + 8.0 * ratio * (2.0 * (n - f) + in.honest_count);
  t.c2 = 16.0 * ratio * (n - f) + 16.0 * c * spread * spread * beta2;
  t.c3 = 16.0 * spread * spread;
  t.value = t.c1 * in.eps * in.eps + t.c2 * in.eps_server * in.eps_server +
            t.c3 * beta2 * in.delta_server * in.delta_server;
  return t;
}

LowerBoundInstance make_lower_bound_instance(int honest_count, int byzantine_count, double delta) {
  const int n = honest_count + byzantine_count;
  require(honest_count >= 1 && byzantine_count >= 0, ErrorCode::kInvalidInput,
          "need at least one honest client");
  require(n % 2 == 0, ErrorCode::kPreconditionViolated,
          "lower-bound construction needs an even client count, got " + std::to_string(n));

  LowerBoundInstance out;
  const double value = static_cast<double>(honest_count) / n * delta;
  out.gradients.resize(1, n);
  out.honest_first.assign(static_cast<size_t>(n), false);
  out.honest_second.assign(static_cast<size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    out.gradients(0, i) = i < n / 2 ? value : -value;
    out.honest_first[static_cast<size_t>(i)] = i < honest_count;
    out.honest_second[static_cast<size_t>(i)] = i >= byzantine_count;
  }
  out.beta = static_cast<double>(byzantine_count) / n;
  out.expected_mean_first = out.beta * delta;
  out.expected_mean_second = -out.beta * delta;
  return out;
}

ThreeClientInstance make_three_client_instance(double delta, double eps, std::uint64_t seed) {
  require(eps >= 0.0 && delta > 2.0 * eps, ErrorCode::kPreconditionViolated,
          "three-client instance needs delta > 2 eps");
  const double r = 1.0 / std::sqrt(2.0);
  const Eigen::Vector2d outer(-r, r);
  const Eigen::Vector2d inner(r, r);

  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  ThreeClientInstance out;
  out.z1 = coin(rng) ? 1 : 0;
  out.z2 = coin(rng) ? 1 : 0;

  out.expected.resize(2, 3);
  out.expected.col(0) = 0.5 * delta * outer;
  out.expected.col(1) = 0.5 * delta * outer;
  out.expected.col(2) = -delta * outer;
  out.gradients = out.expected;
  out.gradients.col(0) += eps * (2.0 * out.z1 - 1.0) * inner;
  out.gradients.col(1) += eps * (2.0 * out.z2 - 1.0) * inner;
  out.expected_mean = Vector::Zero(2);
  return out;
}

}  // namespace boba
