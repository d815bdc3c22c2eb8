#pragma once

#include <cstdint>
#include <vector>

#include "boba/dataset.hpp"
#include "boba/model.hpp"

namespace boba {

struct AccuracyReport {
  double accuracy = 0.0;
  Vector recall;  // per class; NaN for classes absent from the test set
};

AccuracyReport accuracy_and_recall(const std::vector<int>& predicted, const std::vector<int>& labels,
                                   int num_classes);
AccuracyReport accuracy_and_recall(const Architecture& arch, const Vector& params,
                                   const LabeledDataset& test);

/// max_z max(reference_z - observed_z, 0); classes missing from either side are skipped.
double max_recall_drop(const Vector& recalls, const Vector& reference_recalls);

/// ||estimate - expected||^2
double gradient_estimation_error(const Vector& estimate, const Vector& expected);

struct VariationSamples {
  std::vector<Matrix> client_samples;  // per honest client, d x draws of g_i
  Matrix client_expected;              // d x |H|, E g_i
  std::vector<Matrix> server_samples;  // per class, d x draws of gamma_z
  Matrix server_expected;              // d x c, E gamma_z
};

/// Squared variations. Inner variations average the squared deviation of the
/// draws; outer variations are squared distances to E mu = mean of E g_i.
struct VariationReport {
  double eps2 = 0.0;
  double delta2 = 0.0;
  double eps2_server = 0.0;
  double delta2_server = 0.0;
  Vector client_inner;
  Vector client_outer;
  Vector server_inner;
  Vector server_outer;
};

VariationReport measure_variations(const VariationSamples& samples);

struct AssumptionReport {
  double sigma = 0.0;         // min over checked (n - 2f)-subsets of sigma_{c-1}
  double sigma_server = 0.0;  // sigma_{c-1} of the server expectations
  std::int64_t subsets_checked = 0;
  bool exhaustive = true;
  std::uint64_t seed = 0;     // sampling seed when not exhaustive
};

struct AssumptionOptions {
  std::int64_t cap = 100'000;
  std::int64_t samples = 10'000;
  std::uint64_t seed = 0;
  bool allow_sampling = true;
};

/// honest_expected is d x |H|. server_expected may be empty (sigma_server = 0).
AssumptionReport assumption_report(const Matrix& honest_expected, int n, int f, int c,
                                   const Matrix& server_expected,
                                   const AssumptionOptions& options = {});

/// Fraction of the centred variance captured by the first c - 1 components.
double variance_concentration(const Matrix& gradients, int c);

/// Per-component variance fractions of the centred columns.
Vector explained_variance_ratios(const Matrix& gradients);

}  // namespace boba
