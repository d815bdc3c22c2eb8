#pragma once

#include <cstdint>
#include <string>

#include "boba/aggregation.hpp"
#include "boba/attacks.hpp"
#include "boba/datagen.hpp"
#include "boba/model.hpp"

namespace boba {

struct TaskConfig {
  int classes = 10;
  int dim = 20;
  int per_class = 200;
  double separation = 3.0;
  int test_per_class = 100;
  int server_per_class = 20;
  int oracle_per_class = 10'000;
  std::string csv;       // optional training data; replaces the synthetic task
  std::string test_csv;  // optional test data for csv mode
};

struct ModelConfig {
  ArchKind arch = ArchKind::kSoftmax;
  int hidden = 16;
  double init_scale = 0.0;
  LocalVariant local = LocalVariant::kFedSgd;
  int epochs = 5;
  double prox_mu = 0.01;
  int minibatch = 0;
  double grad_noise = 0.0;  // std of additive Gaussian noise on local gradients
};

struct ScheduleConfig {
  int rounds = 200;
  double eta = 0.5;
  int decay_start = 100;
  int decay_every = 10;
  double decay = 0.95;
  double participation = 1.0;
};

struct AggregatorConfig {
  AggregatorSpec spec;
  int f = 4;
  bool reference = true;    // also run Average without attack for MRD
  bool compare_es = false;  // record the exhaustive-search loss every round
};

struct AttackConfig {
  AttackSpec spec;
  int byzantine = 3;
};

struct SimConfig {
  TaskConfig task;
  PartitionSpec partition;
  ModelConfig model;
  ScheduleConfig schedule;
  AggregatorConfig aggregator;
  AttackConfig attack;
  std::uint64_t seed = 1;
};

/// INI text with sections [task] [partition] [model] [schedule] [aggregator]
/// [attack] [seeds]. Unknown sections or keys are kConfig errors.
SimConfig parse_config(const std::string& text);
SimConfig load_config(const std::string& path);

/// Field-level validation; throws kConfig naming the offending key.
void validate_config(const SimConfig& config);

/// Canonical INI rendering; parse_config(to_string(c)) reproduces c.
std::string config_to_string(const SimConfig& config);

/// eta for round t (0-based): eta for t < decay_start, then multiplied by
/// decay once every decay_every rounds starting at decay_start.
double learning_rate_at(const ScheduleConfig& schedule, int round);

}  // namespace boba
