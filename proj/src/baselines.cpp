#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "boba/aggregation.hpp"
#include "boba/error.hpp"
#include "boba/rng.hpp"

namespace boba {
namespace {

void require_clients(const Matrix& gradients) {
  require(gradients.cols() >= 1 && gradients.rows() >= 1, ErrorCode::kInvalidInput,
          "empty gradient matrix");
}

std::vector<int> order_by(const std::vector<double>& values) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] < values[b]; });
  return order;
}

Vector mean_of(const Matrix& gradients, const std::vector<bool>& mask) {
  Vector sum = Vector::Zero(gradients.rows());
  int count = 0;
  for (Eigen::Index i = 0; i < gradients.cols(); ++i) {
    if (mask[static_cast<size_t>(i)]) {
      sum += gradients.col(i);
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace

Vector average(const Matrix& gradients) {
  require_clients(gradients);
  return gradients.rowwise().mean();
}

Vector coordinate_median(const Matrix& gradients) {
  require_clients(gradients);
  const Eigen::Index n = gradients.cols();
  Vector out(gradients.rows());
  std::vector<double> row(static_cast<size_t>(n));
  for (Eigen::Index r = 0; r < gradients.rows(); ++r) {
    for (Eigen::Index i = 0; i < n; ++i) row[i] = gradients(r, i);
    const auto mid = row.begin() + n / 2;
    std::nth_element(row.begin(), mid, row.end());
    if (n % 2 == 1) {
      out(r) = *mid;
    } else {
      const double upper = *mid;
      const double lower = *std::max_element(row.begin(), mid);
      out(r) = 0.5 * (lower + upper);
    }
  }
  return out;
}

Vector trimmed_mean(const Matrix& gradients, int f) {
  require_clients(gradients);
  const Eigen::Index n = gradients.cols();
  require(f >= 0 && n > 2 * f, ErrorCode::kPreconditionViolated,
          "trimmed mean needs n > 2f, got n = " + std::to_string(n) + ", f = " + std::to_string(f));
  Vector out(gradients.rows());
  std::vector<double> row(static_cast<size_t>(n));
  for (Eigen::Index r = 0; r < gradients.rows(); ++r) {
    for (Eigen::Index i = 0; i < n; ++i) row[i] = gradients(r, i);
    std::sort(row.begin(), row.end());
    double s = 0.0;
    for (Eigen::Index i = f; i < n - f; ++i) s += row[i];
    out(r) = s / static_cast<double>(n - 2 * f);
  }
  return out;
}

Matrix pairwise_squared_distances(const Matrix& gradients) {
  const Eigen::Index n = gradients.cols();
  Matrix d2 = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d2(i, j) = d2(j, i) = (gradients.col(i) - gradients.col(j)).squaredNorm();
    }
  }
  return d2;
}

AggregationResult krum(const Matrix& gradients, int f, int multi) {
  require_clients(gradients);
  const int n = static_cast<int>(gradients.cols());
  const int neighbours = n - f - 2;
  require(f >= 0 && neighbours >= 1, ErrorCode::kPreconditionViolated,
          "Krum needs n - f - 2 >= 1, got n = " + std::to_string(n) + ", f = " + std::to_string(f));
  require(multi >= 1 && multi <= n, ErrorCode::kPreconditionViolated, "Multi-Krum m out of range");

  const Matrix d2 = pairwise_squared_distances(gradients);
  std::vector<double> scores(static_cast<size_t>(n));
  std::vector<double> others;
  for (int i = 0; i < n; ++i) {
    others.clear();
    for (int j = 0; j < n; ++j) {
      if (j != i) others.push_back(d2(i, j));
    }
    std::partial_sort(others.begin(), others.begin() + neighbours, others.end());
    scores[i] = std::accumulate(others.begin(), others.begin() + neighbours, 0.0);
  }

  const std::vector<int> order = order_by(scores);
  AggregationResult result;
  result.accepted.assign(static_cast<size_t>(n), false);
  for (int r = 0; r < multi; ++r) result.accepted[static_cast<size_t>(order[r])] = true;
  result.aggregate = mean_of(gradients, result.accepted);
  result.diagnostics.scores = std::move(scores);
  return result;
}

double geometric_median_objective(const Matrix& gradients, const Vector& y) {
  return (gradients.colwise() - y).colwise().norm().sum();
}

GeometricMedian geometric_median(const Matrix& gradients, double tol, int max_iter) {
  require_clients(gradients);
  constexpr double kCoincide = 1e-12;
  GeometricMedian best;
  Vector y = gradients.rowwise().mean();
  best.point = y;
  best.objective = geometric_median_objective(gradients, y);

  for (int it = 1; it <= max_iter; ++it) {
    Vector numerator = Vector::Zero(y.size());
    double denominator = 0.0;
    for (Eigen::Index i = 0; i < gradients.cols(); ++i) {
      const double dist = (gradients.col(i) - y).norm();
      if (dist < kCoincide) continue;
      numerator += gradients.col(i) / dist;
      denominator += 1.0 / dist;
    }
    best.iterations = it;
    if (denominator == 0.0) break;  // every input coincides with y
    const Vector next = numerator / denominator;
    const double step = (next - y).norm();
    y = next;
    const double objective = geometric_median_objective(gradients, y);
    if (objective < best.objective) {
      best.objective = objective;
      best.point = y;
    }
    if (step < tol) break;
  }
  // Weiszfeld converges slowly when the minimiser is an input point, so the
  // nearest input is tried as a candidate.
  Eigen::Index nearest = 0;
  (gradients.colwise() - best.point).colwise().squaredNorm().minCoeff(&nearest);
  const double at_input = geometric_median_objective(gradients, gradients.col(nearest));
  if (at_input < best.objective) {
    best.objective = at_input;
    best.point = gradients.col(nearest);
  }
  return best;
}

Vector fltrust(const Matrix& gradients, const Matrix& server_gradients) {
  require_clients(gradients);
  require(server_gradients.cols() >= 1 && server_gradients.rows() == gradients.rows(),
          ErrorCode::kMissingServerGradients, "FLTrust needs server gradients of matching dimension");
  const Vector reference = server_gradients.rowwise().mean();
  const double ref_norm = reference.norm();
  require(ref_norm > 0.0, ErrorCode::kInvalidInput, "server gradient has zero norm");

  Vector sum = Vector::Zero(gradients.rows());
  double total_weight = 0.0;
  for (Eigen::Index i = 0; i < gradients.cols(); ++i) {
    const double norm = gradients.col(i).norm();
    if (norm == 0.0) continue;
    const double cosine = gradients.col(i).dot(reference) / (norm * ref_norm);
    const double weight = std::max(cosine, 0.0);
    if (weight == 0.0) continue;
    sum += weight * (ref_norm / norm) * gradients.col(i);
    total_weight += weight;
  }
  if (total_weight == 0.0) return reference;
  return sum / total_weight;
}

AggregationResult loss_rejection(const Matrix& gradients, int f, RejectionVariant variant,
                                 const ServerLossFn& server_loss, const Vector& global_params,
                                 double learning_rate) {
  require_clients(gradients);
  const int n = static_cast<int>(gradients.cols());
  require(f >= 0 && f < n, ErrorCode::kPreconditionViolated, "loss rejection needs 0 <= f < n");
  require(static_cast<bool>(server_loss), ErrorCode::kInvalidInput,
          "loss rejection needs server data");
  require(global_params.size() == gradients.rows(), ErrorCode::kDimensionMismatch,
          "global parameters and gradients differ in dimension");

  AggregationResult result;
  result.accepted.assign(static_cast<size_t>(n), true);
  std::vector<double> scores(static_cast<size_t>(n), 0.0);
  if (f > 0) {
    if (variant == RejectionVariant::kSelf) {
      for (int i = 0; i < n; ++i) {
        scores[i] = server_loss(global_params - learning_rate * gradients.col(i));
      }
    } else {
      // Score = loss increase when client i is left out of the average; the
      // clients whose inclusion lowers the loss the most rank first.
      const Vector total = gradients.rowwise().sum();
      const double with_all = server_loss(global_params - learning_rate * total / n);
      for (int i = 0; i < n; ++i) {
        const Vector without = (total - gradients.col(i)) / static_cast<double>(n - 1);
        scores[i] = with_all - server_loss(global_params - learning_rate * without);
      }
    }
    const std::vector<int> order = order_by(scores);
    result.accepted.assign(static_cast<size_t>(n), false);
    for (int r = 0; r < n - f; ++r) result.accepted[static_cast<size_t>(order[r])] = true;
  }
  result.aggregate = mean_of(gradients, result.accepted);
  result.diagnostics.scores = std::move(scores);
  return result;
}

std::vector<int> bucket_permutation(int n, std::uint64_t seed) {
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0xB0C4E7ULL}));
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  return order;
}

AggregationResult bucketing(const AggregationInput& input, int bucket_size, const Aggregator& inner) {
  require(bucket_size >= 1, ErrorCode::kInvalidInput, "bucket size must be >= 1");
  const int n = input.num_clients();
  const int buckets = (n + bucket_size - 1) / bucket_size;
  const std::vector<int> order = bucket_permutation(n, input.seed);

  Matrix bucketed(input.dim(), buckets);
  for (int b = 0; b < buckets; ++b) {
    const int begin = b * bucket_size;
    const int end = std::min(n, begin + bucket_size);
    Vector sum = Vector::Zero(input.dim());
    for (int p = begin; p < end; ++p) sum += input.gradients.col(order[p]);
    bucketed.col(b) = sum / static_cast<double>(end - begin);
  }

  AggregationInput inner_input{bucketed, input.server_gradients, input.f, input.num_classes,
                               input.seed, input.server_loss, input.global_params,
                               input.learning_rate};
  AggregationResult inner_result = inner(inner_input);

  AggregationResult result;
  result.aggregate = std::move(inner_result.aggregate);
  result.accepted.assign(static_cast<size_t>(n), false);
  for (int b = 0; b < buckets; ++b) {
    if (!inner_result.accepted[static_cast<size_t>(b)]) continue;
    const int end = std::min(n, (b + 1) * bucket_size);
    for (int p = b * bucket_size; p < end; ++p) result.accepted[static_cast<size_t>(order[p])] = true;
  }
  result.diagnostics = std::move(inner_result.diagnostics);
  return result;
}

}  // namespace boba
