#pragma once

#include <limits>
#include <string>
#include <vector>

#include "boba/dataset.hpp"
#include "boba/model.hpp"
#include "boba/rng.hpp"

namespace boba {

/// Class z ~ N(mean_z, noise_std^2 I). Means sit on a centred regular simplex
/// in the first c-1 coordinates with pairwise distance separation * sqrt(2).
struct GaussianMixtureTask {
  int num_classes = 0;
  int dim = 0;
  double noise_std = 1.0;
  Matrix class_means;  // dim x c

  LabeledDataset sample_class(int z, int count, Rng& rng) const;
  /// per_class samples of every class, rows shuffled.
  LabeledDataset sample(int per_class, Rng& rng) const;
  /// count samples with labels drawn from the distribution p.
  LabeledDataset sample_mixture(const Vector& p, int count, Rng& rng) const;
};

GaussianMixtureTask make_gaussian_mixture(int num_classes, int dim, double separation);

LabeledDataset make_gaussian_mixture_task(int num_classes, int dim, int per_class,
                                          double separation, Rng& rng);

/// Validates entries >= 0 and sum = 1 within 1e-12.
void validate_label_distribution(const Vector& p);

struct ClientPartition {
  std::vector<LabeledDataset> clients;
  std::vector<Vector> label_distributions;  // equals each client's empirical histogram
  std::vector<std::vector<int>> rows;       // source rows of each client
};

enum class PartitionScheme { kPathological, kStep, kDirichlet };

PartitionScheme parse_partition_scheme(const std::string& name);
std::string partition_scheme_name(PartitionScheme s);

inline constexpr double kInfiniteAlpha = std::numeric_limits<double>::infinity();

/// Sort by label, cut into shards_per_client * honest_count single-class
/// shards, deal shards_per_client random shards to each client.
ClientPartition partition_pathological(const LabeledDataset& data, int honest_count,
                                       int shards_per_client, Rng& rng);

/// Every client has two major classes weighted alpha against its minor
/// classes. alpha = 1 is IID; alpha = kInfiniteAlpha keeps only the majors.
ClientPartition partition_step(const LabeledDataset& data, int honest_count, double alpha, Rng& rng);

/// Client label proportions drawn from Dirichlet(alpha 1_c); every sample is
/// assigned and clients left empty trigger a redraw.
ClientPartition partition_dirichlet(const LabeledDataset& data, int honest_count, double alpha,
                                    Rng& rng);

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::kPathological;
  int shards_per_client = 2;
  double alpha = 1.0;
  int honest_count = 20;
};

ClientPartition make_partition(const LabeledDataset& data, const PartitionSpec& spec, Rng& rng);

/// Splits total into integer parts proportional to weights (largest
/// remainder, ties to the lower index). All-zero weights split evenly.
std::vector<int> proportional_counts(int total, const std::vector<double>& weights);

/// Per-class gradients on fixed per-class datasets, d x c.
Matrix class_gradients(const Architecture& arch, const Vector& params,
                       const std::vector<LabeledDataset>& per_class);

/// Large-sample estimate of E gamma_z for every class, d x c.
Matrix expected_class_gradients(const Architecture& arch, const Vector& params,
                                const GaussianMixtureTask& task, int per_class, Rng& rng);

}  // namespace boba
