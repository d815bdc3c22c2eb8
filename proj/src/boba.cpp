#include <algorithm>
#include <cstring>
#include <numeric>
#include <string>

#include "boba/aggregation.hpp"
#include "boba/error.hpp"

namespace boba {
namespace {

struct KernelFit {
  KernelSubspace kernel;
  std::vector<int> selection;  // sorted client indices
  double trimmed_loss = 0.0;
  std::vector<double> loss_trace;
  int trsvd_calls = 0;
};

void validate_boba_input(const AggregationInput& in, const BobaParams& params) {
  const int n = in.num_clients();
  const int c = in.num_classes;
  require(n >= 1, ErrorCode::kInvalidInput, "no client gradients");
  require(in.f >= 0 && in.f < n, ErrorCode::kPreconditionViolated,
          "need 0 <= f < n, got f = " + std::to_string(in.f) + ", n = " + std::to_string(n));
  require(in.server_gradients != nullptr, ErrorCode::kMissingServerGradients,
          "BOBA needs one server gradient per class");
  require(c >= 2, ErrorCode::kInvalidInput, "BOBA needs at least two classes");
  require(in.server_gradients->cols() == c, ErrorCode::kDimensionMismatch,
          "server gradient set has " + std::to_string(in.server_gradients->cols()) +
              " columns for " + std::to_string(c) + " classes");
  require(in.server_gradients->rows() == in.dim(), ErrorCode::kDimensionMismatch,
          "server gradients and client gradients differ in dimension");
  require(n - in.f >= c - 1, ErrorCode::kPreconditionViolated,
          "n - f = " + std::to_string(n - in.f) + " cannot span a " + std::to_string(c - 1) +
              "-dimensional subspace");
  require(params.p_min <= 0.0, ErrorCode::kInvalidInput, "p_min must be non-positive");
  require(params.max_alternations >= 1, ErrorCode::kInvalidInput, "max_alternations must be >= 1");
}

// For every column of [G, Gamma], the first column bitwise identical to it.
// Colluding clients often upload the same vector, and duplicates share
// their Gram rows. A short prefix filters candidates before a full compare.
std::vector<Eigen::Index> first_duplicates(const Matrix& g, const Matrix& s) {
  const Eigen::Index n = g.cols();
  const Eigen::Index total = n + s.cols();
  const Eigen::Index d = g.rows();
  const Eigen::Index prefix = std::min<Eigen::Index>(d, 4);
  auto column = [&](Eigen::Index j) { return j < n ? g.col(j).data() : s.col(j - n).data(); };
  std::vector<Eigen::Index> rep(static_cast<size_t>(total));
  for (Eigen::Index j = 0; j < total; ++j) {
    rep[j] = j;
    for (Eigen::Index i = 0; i < j; ++i) {
      if (rep[i] != i) continue;
      if (std::memcmp(column(i), column(j), sizeof(double) * prefix) == 0 &&
          std::memcmp(column(i), column(j), sizeof(double) * d) == 0) {
        rep[j] = i;
        break;
      }
    }
  }
  return rep;
}

// Gram matrix of [G, Gamma] in one pass over row chunks that stay in cache.
// A non-finite input entry makes its column's diagonal non-finite, so the
// finiteness check runs on the small result instead of the inputs.
Matrix combined_gram(const Matrix& g, const Matrix& s) {
  constexpr Eigen::Index kChunk = 256;
  const Eigen::Index n = g.cols();
  const Eigen::Index total = n + s.cols();
  const Eigen::Index d = g.rows();
  const std::vector<Eigen::Index> rep = first_duplicates(g, s);
  std::vector<Eigen::Index> unique;
  std::vector<Eigen::Index> slot(static_cast<size_t>(total));
  for (Eigen::Index j = 0; j < total; ++j) {
    if (rep[j] == j) {
      slot[j] = static_cast<Eigen::Index>(unique.size());
      unique.push_back(j);
    } else {
      slot[j] = slot[rep[j]];
    }
  }
  const auto m = static_cast<Eigen::Index>(unique.size());
  Matrix lower = Matrix::Zero(m, m);
  Matrix chunk(std::min(kChunk, d), m);
  for (Eigen::Index r = 0; r < d; r += kChunk) {
    const Eigen::Index h = std::min(kChunk, d - r);
    for (Eigen::Index u = 0; u < m; ++u) {
      const Eigen::Index j = unique[u];
      chunk.col(u).head(h) = j < n ? g.col(j).segment(r, h) : s.col(j - n).segment(r, h);
    }
    lower.selfadjointView<Eigen::Lower>().rankUpdate(chunk.topRows(h).transpose());
  }
  const Matrix compact = lower.selfadjointView<Eigen::Lower>();
  Matrix k(total, total);
  for (Eigen::Index b = 0; b < total; ++b) {
    for (Eigen::Index a = 0; a < total; ++a) k(a, b) = compact(slot[a], slot[b]);
  }
  require(all_finite(k), ErrorCode::kInvalidInput, "non-finite gradients");
  return k;
}

std::vector<int> smallest(const Vector& values, int n, int keep) {
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values(a) < values(b); });
  order.resize(static_cast<size_t>(keep));
  std::sort(order.begin(), order.end());
  return order;
}

double sum_at(const Vector& values, const std::vector<int>& idx) {
  double s = 0.0;
  for (int i : idx) s += values(i);
  return s;
}

std::vector<bool> to_mask(const std::vector<int>& idx, int n) {
  std::vector<bool> mask(static_cast<size_t>(n), false);
  for (int i : idx) mask[static_cast<size_t>(i)] = true;
  return mask;
}

KernelFit fit_alternating(const Matrix& k, int n, int c, int f, int max_alternations) {
  std::vector<int> server(static_cast<size_t>(c));
  std::iota(server.begin(), server.end(), n);

  KernelFit fit;
  fit.kernel = kernel_truncated_svd(k, server, c - 1);
  fit.trsvd_calls = 1;
  std::vector<int> previous;
  int refits = 0;
  while (true) {
    const Vector residuals = kernel_squared_residuals(k, fit.kernel);
    std::vector<int> selection = smallest(residuals, n, n - f);
    const double loss = sum_at(residuals, selection);
    fit.loss_trace.push_back(loss);
    if (selection == previous || refits >= max_alternations) {
      fit.selection = std::move(selection);
      fit.trimmed_loss = loss;
      return fit;
    }
    fit.kernel = kernel_truncated_svd(k, selection, c - 1);
    ++fit.trsvd_calls;
    ++refits;
    fit.loss_trace.push_back(sum_at(kernel_squared_residuals(k, fit.kernel), selection));
    previous = std::move(selection);
  }
}

std::int64_t binomial_capped(int n, int m, std::int64_t cap) {
  m = std::min(m, n - m);
  std::int64_t value = 1;
  for (int i = 1; i <= m; ++i) {
    value = value * (n - m + i) / i;
    if (value > cap) return cap + 1;
  }
  return value;
}

KernelFit fit_exhaustive(const Matrix& k, int n, int c, int f, std::int64_t cap) {
  const int m = n - f;
  const std::int64_t count = binomial_capped(n, m, cap);
  require(count <= cap, ErrorCode::kCombinatorialCap,
          "C(" + std::to_string(n) + ", " + std::to_string(m) + ") exceeds the cap of " +
              std::to_string(cap));

  KernelFit best;
  best.trimmed_loss = std::numeric_limits<double>::infinity();
  std::vector<int> subset(static_cast<size_t>(m));
  std::iota(subset.begin(), subset.end(), 0);
  while (true) {
    KernelSubspace candidate = kernel_truncated_svd(k, subset, c - 1);
    ++best.trsvd_calls;
    const Vector residuals = kernel_squared_residuals(k, candidate);
    std::vector<int> selection = smallest(residuals, n, m);
    const double loss = sum_at(residuals, selection);
    if (loss < best.trimmed_loss) {
      best.trimmed_loss = loss;
      best.kernel = std::move(candidate);
      best.selection = std::move(selection);
    }
    // Next combination in lexicographic order.
    int i = m - 1;
    while (i >= 0 && subset[static_cast<size_t>(i)] == n - m + i) --i;
    if (i < 0) break;
    ++subset[static_cast<size_t>(i)];
    for (int j = i + 1; j < m; ++j) subset[static_cast<size_t>(j)] = subset[static_cast<size_t>(j - 1)] + 1;
  }
  best.loss_trace.push_back(best.trimmed_loss);
  return best;
}

KernelFit fit_kernel(const Matrix& k, const AggregationInput& in, const BobaParams& params) {
  const int n = in.num_clients();
  if (params.mode == FitMode::kExhaustive) {
    return fit_exhaustive(k, n, in.num_classes, in.f, params.exhaustive_cap);
  }
  return fit_alternating(k, n, in.num_classes, in.f, params.max_alternations);
}

SubspaceFit to_public(KernelFit fit, const AggregationInput& in) {
  SubspaceFit out;
  out.subspace = materialize(fit.kernel, in.gradients, in.server_gradients);
  out.kernel = std::move(fit.kernel);
  out.selection = to_mask(fit.selection, in.num_clients());
  out.trimmed_loss = fit.trimmed_loss;
  out.loss_trace = std::move(fit.loss_trace);
  out.trsvd_calls = fit.trsvd_calls;
  return out;
}

}  // namespace

int AggregationResult::accepted_count() const {
  return static_cast<int>(std::count(accepted.begin(), accepted.end(), true));
}

TrimmedLoss trimmed_reconstruction_loss(const AffineSubspace& subspace, const Matrix& gradients,
                                        int f) {
  const int n = static_cast<int>(gradients.cols());
  require(f >= 0 && f < n, ErrorCode::kPreconditionViolated,
          "trimmed loss needs 0 <= f < n, got f = " + std::to_string(f));
  TrimmedLoss out;
  out.residuals.resize(n);
  for (int i = 0; i < n; ++i) out.residuals(i) = squared_residual(subspace, gradients.col(i));
  const std::vector<int> selection = smallest(out.residuals, n, n - f);
  out.loss = sum_at(out.residuals, selection);
  out.selection = to_mask(selection, n);
  return out;
}

SubspaceFit fit_subspace_alternating(const AggregationInput& input, const BobaParams& params) {
  validate_boba_input(input, params);
  const Matrix k = combined_gram(input.gradients, *input.server_gradients);
  return to_public(fit_alternating(k, input.num_clients(), input.num_classes, input.f,
                                   params.max_alternations),
                   input);
}

SubspaceFit fit_subspace_exhaustive(const AggregationInput& input, const BobaParams& params) {
  validate_boba_input(input, params);
  const Matrix k = combined_gram(input.gradients, *input.server_gradients);
  return to_public(fit_exhaustive(k, input.num_clients(), input.num_classes, input.f,
                                  params.exhaustive_cap),
                   input);
}

AggregationResult boba_aggregate(const AggregationInput& input, const BobaParams& params) {
  validate_boba_input(input, params);
  const int n = input.num_clients();
  const int c = input.num_classes;
  const Matrix k = combined_gram(input.gradients, *input.server_gradients);
  KernelFit fit = fit_kernel(k, input, params);

  // Stage 2: label-distribution estimates in the (c-1)-dimensional latent space.
  const Matrix encoded = kernel_encode(k, fit.kernel);
  const AffineCoordinateSolver solver(encoded.rightCols(c));

  AggregationResult result;
  result.diagnostics.label_estimates.resize(c, n);
  Vector min_entry(n);
  for (int i = 0; i < n; ++i) {
    const Vector p = solver.solve(encoded.col(i));
    result.diagnostics.label_estimates.col(i) = p;
    min_entry(i) = p.minCoeff();
  }

  result.accepted.assign(static_cast<size_t>(n), false);
  int accepted = 0;
  for (int i = 0; i < n; ++i) {
    if (min_entry(i) >= params.p_min) {
      result.accepted[static_cast<size_t>(i)] = true;
      ++accepted;
    }
  }
  if (accepted < n - input.f) {
    // Too many rejections: keep the n - f clients whose estimates are least negative.
    const Vector negated = -min_entry;
    result.accepted = to_mask(smallest(negated, n, n - input.f), n);
    accepted = n - input.f;
  }

  Vector latent = Vector::Zero(c - 1);
  for (int i = 0; i < n; ++i) {
    if (result.accepted[static_cast<size_t>(i)]) latent += encoded.col(i);
  }
  latent /= static_cast<double>(accepted);

  // Decode through the column weights: mu = X (B latent + a).
  const Vector weights = fit.kernel.basis_weights * latent + fit.kernel.mean_weights;
  result.aggregate = combine_columns(input.gradients, input.server_gradients, weights);

  result.diagnostics.trimmed_loss = fit.trimmed_loss;
  result.diagnostics.trsvd_calls = fit.trsvd_calls;
  result.diagnostics.loss_trace = std::move(fit.loss_trace);
  result.diagnostics.scores.assign(min_entry.data(), min_entry.data() + n);
  return result;
}

}  // namespace boba
