#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boba/aggregation.hpp"
#include "boba/metrics.hpp"

namespace boba {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 7;
  int lemma_instances = 10'000;
  double lemma_tol = 1e-8;
  int bound_instances = 500;
  int monte_carlo_draws = 10'000;
  int threads = 0;
  /// Test hook: the named check runs with an impossible tolerance.
  std::string corrupt;
};

/// Projection lemmas on random affine subspaces: nearest point,
/// 1-contraction, affine-combination commutation, idempotence.
std::vector<CheckResult> verify_lemmas(const VerifyOptions& options = {});

/// Lower-bound pair for every aggregator, the three-client instance for
/// Krum / CooMed / BOBA.
std::vector<CheckResult> verify_fixtures(const VerifyOptions& options = {});

/// One randomized label-skew instance with its measured constants.
struct BoundInstance {
  Matrix honest;           // d x |H|
  Matrix honest_expected;  // d x |H|
  Matrix server;           // d x c
  Matrix server_expected;  // d x c
  int byzantine = 0;
  int f = 0;
  int c = 0;
};

BoundInstance make_bound_instance(std::uint64_t seed);

struct BoundEvaluation {
  double worst_error = 0.0;  // max over attacks of ||mu_hat - E mu||^2
  std::string worst_attack;
  BoundTerms bound;
  VariationReport variations;
  AssumptionReport assumption;
};

BoundEvaluation evaluate_bound_instance(const BoundInstance& instance, double p_min = -0.5);

/// compute_boba_error_bound against measured error on randomized instances.
std::vector<CheckResult> verify_bounds(const VerifyOptions& options = {});

/// suite = lemmas | fixtures | bounds | all; throws kConfig otherwise.
std::vector<CheckResult> run_verify_suite(const std::string& suite, const VerifyOptions& options = {});

}  // namespace boba
