#include "boba/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "boba/error.hpp"

namespace boba {
namespace {

std::vector<std::vector<int>> rows_by_class(const LabeledDataset& data) {
  std::vector<std::vector<int>> rows(static_cast<size_t>(data.num_classes));
  for (int i = 0; i < data.size(); ++i) rows[static_cast<size_t>(data.labels[i])].push_back(i);
  return rows;
}

void shuffle(std::vector<int>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(pick(rng))]);
  }
}

ClientPartition assemble(const LabeledDataset& data, std::vector<std::vector<int>> rows) {
  ClientPartition out;
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    out.clients.push_back(subset(data, r));
    out.label_distributions.push_back(label_histogram(out.clients.back()));
  }
  out.rows = std::move(rows);
  return out;
}

// Splits every class pool among clients according to per-client weights.
std::vector<std::vector<int>> deal_by_weights(const std::vector<std::vector<int>>& pools,
                                              const std::vector<std::vector<double>>& weights,
                                              int clients) {
  std::vector<std::vector<int>> rows(static_cast<size_t>(clients));
  for (size_t z = 0; z < pools.size(); ++z) {
    std::vector<double> w(static_cast<size_t>(clients));
    for (int i = 0; i < clients; ++i) w[static_cast<size_t>(i)] = weights[static_cast<size_t>(i)][z];
    const std::vector<int> counts = proportional_counts(static_cast<int>(pools[z].size()), w);
    size_t next = 0;
    for (int i = 0; i < clients; ++i) {
      for (int k = 0; k < counts[static_cast<size_t>(i)]; ++k) {
        rows[static_cast<size_t>(i)].push_back(pools[z][next++]);
      }
    }
  }
  return rows;
}

void require_partition_input(const LabeledDataset& data, int honest_count) {
  validate_dataset(data);
  require(honest_count >= 1, ErrorCode::kInvalidInput, "need at least one client");
  require(data.size() >= honest_count, ErrorCode::kInvalidInput,
          "fewer samples than clients");
}

}  // namespace

LabeledDataset GaussianMixtureTask::sample_class(int z, int count, Rng& rng) const {
  require(z >= 0 && z < num_classes, ErrorCode::kInvalidInput, "class index out of range");
  std::normal_distribution<double> normal(0.0, noise_std);
  LabeledDataset out;
  out.num_classes = num_classes;
  out.features.resize(count, dim);
  out.labels.assign(static_cast<size_t>(count), z);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < dim; ++j) out.features(i, j) = class_means(j, z) + normal(rng);
  }
  return out;
}

LabeledDataset GaussianMixtureTask::sample(int per_class, Rng& rng) const {
  std::vector<LabeledDataset> parts;
  for (int z = 0; z < num_classes; ++z) parts.push_back(sample_class(z, per_class, rng));
  LabeledDataset all = concatenate(parts, num_classes, dim);
  std::vector<int> order(static_cast<size_t>(all.size()));
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  return subset(all, order);
}

LabeledDataset GaussianMixtureTask::sample_mixture(const Vector& p, int count, Rng& rng) const {
  validate_label_distribution(p);
  std::discrete_distribution<int> label(p.data(), p.data() + p.size());
  std::normal_distribution<double> normal(0.0, noise_std);
  LabeledDataset out;
  out.num_classes = num_classes;
  out.features.resize(count, dim);
  out.labels.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int z = label(rng);
    out.labels[static_cast<size_t>(i)] = z;
    for (int j = 0; j < dim; ++j) out.features(i, j) = class_means(j, z) + normal(rng);
  }
  return out;
}

GaussianMixtureTask make_gaussian_mixture(int num_classes, int dim, double separation) {
  require(num_classes >= 2, ErrorCode::kInvalidInput, "need at least two classes");
  require(dim >= num_classes - 1, ErrorCode::kInvalidInput,
          "dim must be >= c - 1 to place class means on a simplex");
  require(separation >= 0.0, ErrorCode::kInvalidInput, "separation must be non-negative");
  GaussianMixtureTask task;
  task.num_classes = num_classes;
  task.dim = dim;
  task.class_means = Matrix::Zero(dim, num_classes);
  // Helmert coordinates of the standard basis vectors: a centred regular
  // simplex with unit-vector distances sqrt(2).
  for (int k = 1; k < num_classes; ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int z = 0; z < k; ++z) task.class_means(k - 1, z) = scale;
    task.class_means(k - 1, k) = -k * scale;
  }
  task.class_means *= separation;
  return task;
}

LabeledDataset make_gaussian_mixture_task(int num_classes, int dim, int per_class,
                                          double separation, Rng& rng) {
  require(per_class >= 1, ErrorCode::kInvalidInput, "per_class must be >= 1");
  return make_gaussian_mixture(num_classes, dim, separation).sample(per_class, rng);
}

void validate_label_distribution(const Vector& p) {
  require(p.size() >= 1 && p.allFinite(), ErrorCode::kInvalidInput, "bad label distribution");
  require(p.minCoeff() >= 0.0, ErrorCode::kInvalidInput, "negative label probability");
  require(std::abs(p.sum() - 1.0) <= 1e-12, ErrorCode::kInvalidInput,
          "label distribution does not sum to one");
}

PartitionScheme parse_partition_scheme(const std::string& name) {
  if (name == "pathological") return PartitionScheme::kPathological;
  if (name == "step") return PartitionScheme::kStep;
  if (name == "dirichlet") return PartitionScheme::kDirichlet;
  throw Error(ErrorCode::kConfig, "unknown partition scheme '" + name + "'");
}

std::string partition_scheme_name(PartitionScheme s) {
  switch (s) {
    case PartitionScheme::kPathological: return "pathological";
    case PartitionScheme::kStep: return "step";
    case PartitionScheme::kDirichlet: return "dirichlet";
  }
  return "pathological";
}

std::vector<int> proportional_counts(int total, const std::vector<double>& weights) {
  const size_t k = weights.size();
  std::vector<int> counts(k, 0);
  if (k == 0) return counts;
  double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> w = weights;
  if (!(sum > 0.0)) {
    std::fill(w.begin(), w.end(), 1.0);
    sum = static_cast<double>(k);
  }
  std::vector<double> remainder(k);
  int assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    const double exact = total * (w[i] / sum);
    counts[i] = static_cast<int>(std::floor(exact));
    remainder[i] = exact - counts[i];
    assigned += counts[i];
  }
  std::vector<size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return remainder[a] > remainder[b]; });
  for (size_t r = 0; assigned < total; r = (r + 1) % k) {
    ++counts[order[r]];
    ++assigned;
  }
  return counts;
}

ClientPartition partition_pathological(const LabeledDataset& data, int honest_count,
                                       int shards_per_client, Rng& rng) {
  require_partition_input(data, honest_count);
  require(shards_per_client >= 1, ErrorCode::kInvalidInput, "shards per client must be >= 1");
  const int shard_count = shards_per_client * honest_count;
  require(data.size() >= shard_count, ErrorCode::kInvalidInput,
          "too few samples for " + std::to_string(shard_count) + " shards");

  std::vector<std::vector<int>> pools = rows_by_class(data);
  std::vector<double> sizes;
  int nonempty = 0;
  for (auto& pool : pools) {
    shuffle(pool, rng);
    sizes.push_back(static_cast<double>(pool.size()));
    nonempty += pool.empty() ? 0 : 1;
  }
  require(shard_count >= nonempty, ErrorCode::kInvalidInput,
          "fewer shards than populated classes; shards cannot be single-class");

  // Shards per class proportional to class size, at least one per populated class.
  std::vector<int> per_class = proportional_counts(shard_count, sizes);
  for (size_t z = 0; z < pools.size(); ++z) {
    while (!pools[z].empty() && per_class[z] == 0) {
      const auto donor = std::max_element(per_class.begin(), per_class.end()) - per_class.begin();
      --per_class[static_cast<size_t>(donor)];
      ++per_class[z];
    }
    require(per_class[z] <= static_cast<int>(pools[z].size()), ErrorCode::kInvalidInput,
            "class " + std::to_string(z) + " too small for its shard allocation");
  }

  std::vector<std::vector<int>> shards;
  for (size_t z = 0; z < pools.size(); ++z) {
    if (per_class[z] == 0) continue;
    const std::vector<int> sizes_z =
        proportional_counts(static_cast<int>(pools[z].size()),
                            std::vector<double>(static_cast<size_t>(per_class[z]), 1.0));
    size_t next = 0;
    for (int s : sizes_z) {
      shards.emplace_back(pools[z].begin() + static_cast<long>(next),
                          pools[z].begin() + static_cast<long>(next + s));
      next += static_cast<size_t>(s);
    }
  }

  std::vector<int> order(shards.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  std::vector<std::vector<int>> rows(static_cast<size_t>(honest_count));
  for (int i = 0; i < honest_count; ++i) {
    for (int s = 0; s < shards_per_client; ++s) {
      const auto& shard = shards[static_cast<size_t>(order[static_cast<size_t>(i * shards_per_client + s)])];
      rows[static_cast<size_t>(i)].insert(rows[static_cast<size_t>(i)].end(), shard.begin(), shard.end());
    }
  }
  return assemble(data, std::move(rows));
}

ClientPartition partition_step(const LabeledDataset& data, int honest_count, double alpha, Rng& rng) {
  require_partition_input(data, honest_count);
  require(alpha >= 1.0, ErrorCode::kInvalidInput, "step partition needs alpha >= 1");
  const int c = data.num_classes;
  require(c >= 2, ErrorCode::kInvalidInput, "step partition needs at least two classes");

  std::vector<std::vector<int>> pools = rows_by_class(data);
  for (auto& pool : pools) shuffle(pool, rng);
  std::vector<int> classes(static_cast<size_t>(c));
  std::iota(classes.begin(), classes.end(), 0);
  shuffle(classes, rng);

  const bool infinite = std::isinf(alpha);
  const double major = infinite ? 1.0 : alpha;
  const double minor = infinite ? 0.0 : 1.0;
  std::vector<std::vector<double>> weights(static_cast<size_t>(honest_count),
                                           std::vector<double>(static_cast<size_t>(c), minor));
  for (int i = 0; i < honest_count; ++i) {
    weights[static_cast<size_t>(i)][static_cast<size_t>(classes[static_cast<size_t>((2 * i) % c)])] = major;
    weights[static_cast<size_t>(i)][static_cast<size_t>(classes[static_cast<size_t>((2 * i + 1) % c)])] = major;
  }
  return assemble(data, deal_by_weights(pools, weights, honest_count));
}

ClientPartition partition_dirichlet(const LabeledDataset& data, int honest_count, double alpha,
                                    Rng& rng) {
  require_partition_input(data, honest_count);
  require(alpha > 0.0, ErrorCode::kInvalidInput, "Dirichlet partition needs alpha > 0");
  const int c = data.num_classes;
  std::vector<std::vector<int>> pools = rows_by_class(data);
  for (auto& pool : pools) shuffle(pool, rng);

  // Gamma(alpha) draws in log space: log G(a) = log G(a + 1) + log(U) / a,
  // which keeps tiny alphas from underflowing to an all-zero vector.
  std::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::vector<double>> weights(static_cast<size_t>(honest_count));
    for (auto& w : weights) {
      std::vector<double> logs(static_cast<size_t>(c));
      for (auto& l : logs) {
        double u = unif(rng);
        while (u <= 0.0) u = unif(rng);
        l = std::log(gamma(rng)) + std::log(u) / alpha;
      }
      const double top = *std::max_element(logs.begin(), logs.end());
      double sum = 0.0;
      w.resize(static_cast<size_t>(c));
      for (int z = 0; z < c; ++z) sum += (w[static_cast<size_t>(z)] = std::exp(logs[static_cast<size_t>(z)] - top));
      for (auto& x : w) x /= sum;
    }
    auto rows = deal_by_weights(pools, weights, honest_count);
    const bool any_empty =
        std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.empty(); });
    if (!any_empty) return assemble(data, std::move(rows));
  }
  throw Error(ErrorCode::kInvalidInput,
              "Dirichlet partition left clients empty after repeated draws (sample exhaustion)");
}

ClientPartition make_partition(const LabeledDataset& data, const PartitionSpec& spec, Rng& rng) {
  switch (spec.scheme) {
    case PartitionScheme::kPathological:
      return partition_pathological(data, spec.honest_count, spec.shards_per_client, rng);
    case PartitionScheme::kStep: return partition_step(data, spec.honest_count, spec.alpha, rng);
    case PartitionScheme::kDirichlet:
      return partition_dirichlet(data, spec.honest_count, spec.alpha, rng);
  }
  throw Error(ErrorCode::kConfig, "unknown partition scheme");
}

Matrix class_gradients(const Architecture& arch, const Vector& params,
                       const std::vector<LabeledDataset>& per_class) {
  Matrix out(arch.num_params(), static_cast<Eigen::Index>(per_class.size()));
  for (size_t z = 0; z < per_class.size(); ++z) {
    out.col(static_cast<Eigen::Index>(z)) = loss_and_gradient(arch, params, per_class[z]).gradient;
  }
  return out;
}

Matrix expected_class_gradients(const Architecture& arch, const Vector& params,
                                const GaussianMixtureTask& task, int per_class, Rng& rng) {
  require(per_class >= 1, ErrorCode::kInvalidInput, "per_class must be >= 1");
  std::vector<LabeledDataset> sets;
  for (int z = 0; z < task.num_classes; ++z) sets.push_back(task.sample_class(z, per_class, rng));
  return class_gradients(arch, params, sets);
}

}  // namespace boba
