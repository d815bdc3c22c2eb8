#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "boba/aggregation.hpp"
#include "boba/config.hpp"
#include "boba/datagen.hpp"
#include "boba/metrics.hpp"
#include "boba/model.hpp"

namespace boba {

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). Indices are statically strided, so results written to
/// per-index slots do not depend on the thread count.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

/// Everything a run needs besides the model parameters: client datasets,
/// server-held per-class data, test data and the expectation oracle sets.
struct SimData {
  Architecture arch;
  std::optional<GaussianMixtureTask> task;
  ClientPartition partition;
  std::vector<LabeledDataset> server_per_class;
  LabeledDataset server_pooled;
  LabeledDataset test;
  std::vector<LabeledDataset> oracle_per_class;
};

/// Data depends only on the task/partition sections and the master seed, so
/// runs that differ in attack or aggregator share identical honest clients.
SimData build_sim_data(const SimConfig& config);

struct RoundRecord {
  int round = 0;
  double eta = 0.0;
  double train_loss = 0.0;     // after the update
  double test_acc = 0.0;       // after the update
  Vector recall;               // after the update
  double grad_err = 0.0;       // ||mu_hat - E mu||^2
  double grad_sq_norm = 0.0;   // ||grad L(w_t)||^2 of the honest objective
  int trsvd_calls = 0;
  int accepted_count = 0;
  double trimmed_loss = 0.0;
  double es_loss = 0.0;        // exhaustive-search loss when compare_es is on
  std::vector<int> participants;
  Vector aggregate;            // kept only when RunOptions::keep_vectors
  Vector honest_mean;
  Vector expected_mean;
  Matrix honest_gradients;     // kept only when RunOptions::keep_honest
};

struct RunOptions {
  int threads = 0;
  bool keep_vectors = false;
  bool keep_honest = false;
  std::optional<Aggregator> aggregator;  // replaces the configured rule
};

/// One federated training run. step() executes a full round: honest local
/// updates, server virtual-client gradients, the attack, aggregation and the
/// global parameter update.
class Simulation {
 public:
  Simulation(const SimConfig& config, const SimData& data, RunOptions options = {});

  RoundRecord step();
  int round() const { return round_; }
  const Vector& params() const { return params_; }
  void set_params(const Vector& params) { params_ = params; }

  /// (1/|H|) sum_i L_i(w) and its gradient.
  LossGradient honest_objective(const Vector& params) const;

  /// Honest gradient matrix of the most recent round.
  const Matrix& last_honest() const { return last_honest_; }

 private:
  SimConfig config_;
  const SimData& data_;
  RunOptions options_;
  Aggregator aggregator_;
  Vector params_;
  Matrix last_honest_;
  int round_ = 0;
};

struct ExperimentResult {
  std::vector<RoundRecord> rounds;
  Vector final_params;
  AccuracyReport final_accuracy;
  std::optional<AccuracyReport> reference_accuracy;
  double mrd = 0.0;
  Vector pca_ratios;  // honest-gradient variance fractions of the first round
};

/// Same task and seed, Average aggregation, no Byzantine clients.
SimConfig reference_config(const SimConfig& config);

ExperimentResult run_experiment(const SimConfig& config, const RunOptions& options = {});

inline constexpr const char* kRoundsCsvHeader =
    "round,agr,attack,seed,eta,train_loss,test_acc,grad_err,trsvd_calls,accepted_count";

void write_rounds_csv(std::ostream& out, const SimConfig& config, const ExperimentResult& result);
void write_summary(std::ostream& out, const SimConfig& config, const ExperimentResult& result);
void write_pca_csv(std::ostream& out, const ExperimentResult& result);
void write_loss_ratio_csv(std::ostream& out, const ExperimentResult& result);

/// Writes rounds.csv, summary.txt, pca.csv, config.ini (and loss_ratio.csv
/// when compare_es is on) into out_dir.
void write_outputs(const std::string& out_dir, const SimConfig& config, const ExperimentResult& result);

}  // namespace boba
