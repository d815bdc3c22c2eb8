#include "boba/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "boba/error.hpp"
#include "boba/rng.hpp"

namespace boba {
namespace {

std::int64_t binomial_capped(int n, int k, std::int64_t cap) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > cap) return cap + 1;
  }
  return r;
}

double subset_sigma(const Matrix& points, const std::vector<int>& cols, int k) {
  Matrix sub(points.rows(), static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = points.col(cols[j]);
  if (k > std::min<Eigen::Index>(sub.rows(), sub.cols())) return 0.0;
  return kth_singular_value(sub, k);
}

}  // namespace

AccuracyReport accuracy_and_recall(const std::vector<int>& predicted, const std::vector<int>& labels,
                                   int num_classes) {
  require(!labels.empty(), ErrorCode::kInvalidInput, "accuracy on an empty test set");
  require(predicted.size() == labels.size(), ErrorCode::kDimensionMismatch,
          "prediction and label counts differ");
  Vector hits = Vector::Zero(num_classes);
  Vector totals = Vector::Zero(num_classes);
  int correct = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    totals(labels[i]) += 1.0;
    if (predicted[i] == labels[i]) {
      hits(labels[i]) += 1.0;
      ++correct;
    }
  }
  AccuracyReport out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  out.recall.resize(num_classes);
  for (int z = 0; z < num_classes; ++z) {
    out.recall(z) = totals(z) > 0 ? hits(z) / totals(z) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

AccuracyReport accuracy_and_recall(const Architecture& arch, const Vector& params,
                                   const LabeledDataset& test) {
  require(!test.empty(), ErrorCode::kInvalidInput, "accuracy on an empty test set");
  return accuracy_and_recall(predict(arch, params, test.features), test.labels, arch.num_classes);
}

double max_recall_drop(const Vector& recalls, const Vector& reference_recalls) {
  require(recalls.size() == reference_recalls.size(), ErrorCode::kDimensionMismatch,
          "recall vectors differ in length");
  double drop = 0.0;
  for (Eigen::Index z = 0; z < recalls.size(); ++z) {
    if (std::isnan(recalls(z)) || std::isnan(reference_recalls(z))) continue;
    drop = std::max(drop, reference_recalls(z) - recalls(z));
  }
  return drop;
}

double gradient_estimation_error(const Vector& estimate, const Vector& expected) {
  require(estimate.size() == expected.size(), ErrorCode::kDimensionMismatch,
          "gradient estimate and expectation differ in dimension");
  return (estimate - expected).squaredNorm();
}

VariationReport measure_variations(const VariationSamples& s) {
  require(s.client_expected.cols() >= 1, ErrorCode::kInvalidInput,
          "variation report needs the client expectation oracle");
  require(s.client_samples.size() == static_cast<size_t>(s.client_expected.cols()),
          ErrorCode::kDimensionMismatch, "one sample block per honest client required");
  require(s.server_samples.empty() || s.server_samples.size() == static_cast<size_t>(s.server_expected.cols()),
          ErrorCode::kDimensionMismatch, "one sample block per server class required");
  require(s.server_samples.empty() || s.server_expected.rows() == s.client_expected.rows(),
          ErrorCode::kDimensionMismatch, "server oracle dimension mismatch");

  auto inner = [](const Matrix& draws, const Vector& expected) {
    require(draws.cols() >= 1 && draws.rows() == expected.size(), ErrorCode::kInvalidInput,
            "empty or mismatched variation samples");
    return (draws.colwise() - expected).colwise().squaredNorm().mean();
  };

  VariationReport r;
  const Vector mu = column_mean(s.client_expected);
  const Eigen::Index h = s.client_expected.cols();
  r.client_inner.resize(h);
  r.client_outer.resize(h);
  for (Eigen::Index i = 0; i < h; ++i) {
    r.client_inner(i) = inner(s.client_samples[static_cast<size_t>(i)], s.client_expected.col(i));
    r.client_outer(i) = (s.client_expected.col(i) - mu).squaredNorm();
  }
  r.eps2 = r.client_inner.maxCoeff();
  r.delta2 = r.client_outer.maxCoeff();

  const Eigen::Index c = static_cast<Eigen::Index>(s.server_samples.size());
  r.server_inner = Vector::Zero(c);
  r.server_outer = Vector::Zero(c);
  for (Eigen::Index z = 0; z < c; ++z) {
    r.server_inner(z) = inner(s.server_samples[static_cast<size_t>(z)], s.server_expected.col(z));
    r.server_outer(z) = (s.server_expected.col(z) - mu).squaredNorm();
  }
  if (c > 0) {
    r.eps2_server = r.server_inner.maxCoeff();
    r.delta2_server = r.server_outer.maxCoeff();
  }
  return r;
}

AssumptionReport assumption_report(const Matrix& honest_expected, int n, int f, int c,
                                   const Matrix& server_expected, const AssumptionOptions& options) {
  const int h = static_cast<int>(honest_expected.cols());
  const int m = n - 2 * f;
  require(c >= 2, ErrorCode::kInvalidInput, "assumption report needs c >= 2");
  require(m >= 1, ErrorCode::kPreconditionViolated, "n - 2f must be positive");
  require(m <= h, ErrorCode::kPreconditionViolated,
          "n - 2f exceeds the number of honest clients");

  AssumptionReport r;
  r.seed = options.seed;
  r.sigma = std::numeric_limits<double>::infinity();
  const std::int64_t total = binomial_capped(h, m, options.cap);
  std::vector<int> cols(static_cast<size_t>(m));
  if (total <= options.cap) {
    std::iota(cols.begin(), cols.end(), 0);
    while (true) {
      r.sigma = std::min(r.sigma, subset_sigma(honest_expected, cols, c - 1));
      ++r.subsets_checked;
      int i = m - 1;
      while (i >= 0 && cols[static_cast<size_t>(i)] == h - m + i) --i;
      if (i < 0) break;
      ++cols[static_cast<size_t>(i)];
      for (int j = i + 1; j < m; ++j) cols[static_cast<size_t>(j)] = cols[static_cast<size_t>(j - 1)] + 1;
    }
  } else {
    require(options.allow_sampling, ErrorCode::kCombinatorialCap,
            "subset count exceeds the cap and sampling is disabled");
    r.exhaustive = false;
    Rng rng(options.seed);
    std::vector<int> pool(static_cast<size_t>(h));
    for (std::int64_t s = 0; s < options.samples; ++s) {
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < m; ++i) {
        std::uniform_int_distribution<int> pick(i, h - 1);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(pick(rng))]);
      }
      std::copy(pool.begin(), pool.begin() + m, cols.begin());
      std::sort(cols.begin(), cols.end());
      r.sigma = std::min(r.sigma, subset_sigma(honest_expected, cols, c - 1));
      ++r.subsets_checked;
    }
  }

  if (server_expected.cols() >= 1) {
    std::vector<int> all(static_cast<size_t>(server_expected.cols()));
    std::iota(all.begin(), all.end(), 0);
    r.sigma_server = subset_sigma(server_expected, all, c - 1);
  }
  return r;
}

Vector explained_variance_ratios(const Matrix& gradients) {
  require(gradients.cols() > 1, ErrorCode::kInvalidInput,
          "variance concentration needs at least two gradients");
  const Vector sv = centered_singular_values(gradients);
  const Vector var = sv.array().square();
  const double total = var.sum();
  if (!(total > 0.0)) {
    Vector out = Vector::Zero(var.size());
    if (out.size() > 0) out(0) = 1.0;
    return out;
  }
  return var / total;
}

double variance_concentration(const Matrix& gradients, int c) {
  require(c >= 1, ErrorCode::kInvalidInput, "c must be >= 1");
  const Vector ratios = explained_variance_ratios(gradients);
  const Eigen::Index k = std::min<Eigen::Index>(c - 1, ratios.size());
  return std::clamp(ratios.head(k).sum(), 0.0, 1.0);
}

}  // namespace boba
