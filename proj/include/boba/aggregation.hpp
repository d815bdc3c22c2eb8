#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "boba/linalg.hpp"

namespace boba {

/// Loss of a candidate parameter vector on server-held data.
using ServerLossFn = std::function<double(const Vector& params)>;

struct AggregationInput {
  const Matrix& gradients;                    // d x n, one column per client
  const Matrix* server_gradients = nullptr;   // d x c, one column per class
  int f = 0;                                  // declared Byzantine tolerance
  int num_classes = 0;
  std::uint64_t seed = 0;                     // bucketing permutation
  // Loss-based rejection rules only.
  const ServerLossFn* server_loss = nullptr;
  const Vector* global_params = nullptr;
  double learning_rate = 0.0;

  Eigen::Index dim() const { return gradients.rows(); }
  int num_clients() const { return static_cast<int>(gradients.cols()); }
};

struct Diagnostics {
  double trimmed_loss = std::numeric_limits<double>::quiet_NaN();
  int trsvd_calls = 0;
  std::vector<double> loss_trace;
  Matrix label_estimates;      // c x n estimated label distributions (BOBA)
  std::vector<double> scores;  // per-client scores (Krum, rejection rules)
};

struct AggregationResult {
  Vector aggregate;
  std::vector<bool> accepted;
  Diagnostics diagnostics;

  int accepted_count() const;
};

// -- BOBA ------------------------------------------------------------------

enum class FitMode { kAlternating, kExhaustive };

struct BobaParams {
  double p_min = -0.5;
  int max_alternations = 50;
  std::int64_t exhaustive_cap = 200'000;
  FitMode mode = FitMode::kAlternating;
};

struct TrimmedLoss {
  double loss = 0.0;
  std::vector<bool> selection;
  Vector residuals;
};

/// Sum of the n - f smallest squared residuals; ties go to the lower index.
TrimmedLoss trimmed_reconstruction_loss(const AffineSubspace& subspace, const Matrix& gradients,
                                        int f);

struct SubspaceFit {
  AffineSubspace subspace;
  KernelSubspace kernel;      // weights over [clients, server classes]
  std::vector<bool> selection;
  double trimmed_loss = 0.0;
  std::vector<double> loss_trace;  // loss after every r / P update
  int trsvd_calls = 0;
};

/// Stage 1 by alternating optimisation, initialised from the server
/// gradients. Stops when the selection set repeats or after
/// max_alternations refits.
SubspaceFit fit_subspace_alternating(const AggregationInput& input, const BobaParams& params = {});

/// Stage 1 by exhaustive search over every (n - f)-subset.
SubspaceFit fit_subspace_exhaustive(const AggregationInput& input, const BobaParams& params = {});

AggregationResult boba_aggregate(const AggregationInput& input, const BobaParams& params = {});

// -- Baselines ---------------------------------------------------------------

Vector average(const Matrix& gradients);
Vector coordinate_median(const Matrix& gradients);
Vector trimmed_mean(const Matrix& gradients, int f);

/// Symmetric n x n matrix of squared Euclidean distances between columns.
Matrix pairwise_squared_distances(const Matrix& gradients);

/// Krum with k = n - f - 2 neighbours. multi = 1 is single Krum; otherwise
/// the `multi` lowest-score gradients are averaged.
AggregationResult krum(const Matrix& gradients, int f, int multi = 1);

struct GeometricMedian {
  Vector point;
  double objective = 0.0;
  int iterations = 0;
};

GeometricMedian geometric_median(const Matrix& gradients, double tol = 1e-8, int max_iter = 1000);

/// Sum of Euclidean distances from y to every column.
double geometric_median_objective(const Matrix& gradients, const Vector& y);

Vector fltrust(const Matrix& gradients, const Matrix& server_gradients);

enum class RejectionVariant { kSelf, kAverage };

AggregationResult loss_rejection(const Matrix& gradients, int f, RejectionVariant variant,
                                 const ServerLossFn& server_loss, const Vector& global_params,
                                 double learning_rate);

using Aggregator = std::function<AggregationResult(const AggregationInput&)>;

/// Client order used by bucketing for a given seed.
std::vector<int> bucket_permutation(int n, std::uint64_t seed);

AggregationResult bucketing(const AggregationInput& input, int bucket_size, const Aggregator& inner);

// -- Name-based construction ------------------------------------------------

struct AggregatorSpec {
  std::string name = "boba";
  BobaParams boba;
  int bucket_size = 2;
  double geomed_tol = 1e-8;
  int geomed_max_iter = 1000;
};

/// average, coomed, trmean, krum, mkrum, geomed, fltrust, selfrej, avgrej,
/// bkrum, bmkrum, boba, boba-es
const std::vector<std::string>& aggregator_names();
bool needs_server_gradients(const std::string& name);
bool needs_server_loss(const std::string& name);
Aggregator make_aggregator(const AggregatorSpec& spec);

// -- Error bound and theory fixtures -----------------------------------------

struct BoundInputs {
  double eps = 0.0;        // client inner variation bound
  double eps_server = 0.0;
  double delta = 0.0;      // client outer variation bound
  double delta_server = 0.0;
  double sigma = 0.0;      // client singular value lower bound
  int n = 0;
  int f = 0;
  int c = 0;
  double p_min = -0.5;
  double beta = 0.0;       // |B| / n
  int honest_count = 0;
};

struct BoundTerms {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double value = 0.0;
};

/// C1 eps^2 + C2 eps_s^2 + C3 beta^2 delta_s^2 for BOBA's estimation error.
BoundTerms compute_boba_error_bound(const BoundInputs& in);

/// Two 1-D gradient sets with identical values and swapped honest/Byzantine
/// identities; any aggregator errs by at least (beta delta)^2 on one of them.
struct LowerBoundInstance {
  Matrix gradients;                // 1 x n
  std::vector<bool> honest_first;  // honest mask for set 1
  std::vector<bool> honest_second;
  double expected_mean_first = 0.0;
  double expected_mean_second = 0.0;
  double beta = 0.0;
};

LowerBoundInstance make_lower_bound_instance(int honest_count, int byzantine_count, double delta);

/// Three clients in R^2: two near delta/2 * v and one at -delta * v with
/// v = (-1, 1)/sqrt(2), perturbed by +-eps along (1, 1)/sqrt(2). E mu = 0.
struct ThreeClientInstance {
  Matrix gradients;  // 2 x 3
  Matrix expected;   // 2 x 3
  Vector expected_mean;
  int z1 = 0;
  int z2 = 0;
};

ThreeClientInstance make_three_client_instance(double delta, double eps, std::uint64_t seed);

}  // namespace boba
