#include "boba/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "boba/attacks.hpp"
#include "boba/error.hpp"

namespace boba {
namespace {

// Stream identifiers for derive_seed paths.
enum Stream : std::uint64_t {
  kDataStream = 1,
  kPartitionStream,
  kServerDataStream,
  kTestStream,
  kOracleStream,
  kInitStream,
  kClientStream,
  kServerStream,
  kAttackStream,
  kAggregateStream,
  kParticipationStream,
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool is_reference_like(const SimConfig& c) {
  return c.aggregator.spec.name == "average" &&
         (c.attack.spec.kind == AttackKind::kNone || c.attack.byzantine == 0);
}

LocalUpdateOptions local_options(const ModelConfig& m, double eta) {
  LocalUpdateOptions o;
  o.variant = m.local;
  o.learning_rate = eta;
  o.epochs = m.local == LocalVariant::kFedSgd ? 1 : m.epochs;
  o.prox_mu = m.prox_mu;
  o.minibatch = m.minibatch;
  o.noise_std = m.grad_noise;
  return o;
}

}  // namespace

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
  auto run = [&](int w) {
    for (int i = w; i < count; i += workers) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SimData build_sim_data(const SimConfig& config) {
  SimData d;
  const int c = config.task.classes;
  const std::uint64_t seed = config.seed;
  LabeledDataset train;
  if (config.task.csv.empty()) {
    d.task = make_gaussian_mixture(c, config.task.dim, config.task.separation);
    Rng data_rng = make_rng(seed, {kDataStream});
    train = d.task->sample(config.task.per_class, data_rng);
    Rng test_rng = make_rng(seed, {kTestStream});
    d.test = d.task->sample(config.task.test_per_class, test_rng);
    Rng server_rng = make_rng(seed, {kServerDataStream});
    for (int z = 0; z < c; ++z) {
      d.server_per_class.push_back(d.task->sample_class(z, config.task.server_per_class, server_rng));
    }
    Rng oracle_rng = make_rng(seed, {kOracleStream});
    for (int z = 0; z < c; ++z) {
      d.oracle_per_class.push_back(d.task->sample_class(z, config.task.oracle_per_class, oracle_rng));
    }
  } else {
    // Server data is carved out of the training file so it is never client data.
    const LabeledDataset all = load_csv_dataset(config.task.csv, c);
    d.test = load_csv_dataset(config.task.test_csv, c);
    require(d.test.dim() == all.dim(), ErrorCode::kConfig, "task.test_csv: feature dimension differs");
    std::vector<int> server_rows;
    std::vector<int> client_rows;
    std::vector<int> taken(static_cast<size_t>(c), 0);
    for (int i = 0; i < all.size(); ++i) {
      const int y = all.labels[static_cast<size_t>(i)];
      if (taken[static_cast<size_t>(y)] < config.task.server_per_class) {
        ++taken[static_cast<size_t>(y)];
        server_rows.push_back(i);
      } else {
        client_rows.push_back(i);
      }
    }
    train = subset(all, client_rows);
    d.server_per_class = split_by_class(subset(all, server_rows));
    d.oracle_per_class = split_by_class(train);
    for (int z = 0; z < c; ++z) {
      require(!d.server_per_class[static_cast<size_t>(z)].empty(), ErrorCode::kConfig,
              "task.csv: class " + std::to_string(z) + " has no samples for the server");
    }
  }
  d.arch = Architecture{config.model.arch, train.dim(), c, config.model.hidden};
  d.server_pooled = concatenate(d.server_per_class, c, train.dim());
  Rng partition_rng = make_rng(seed, {kPartitionStream});
  d.partition = make_partition(train, config.partition, partition_rng);
  return d;
}

Simulation::Simulation(const SimConfig& config, const SimData& data, RunOptions options)
    : config_(config), data_(data), options_(std::move(options)) {
  aggregator_ = options_.aggregator ? *options_.aggregator : make_aggregator(config_.aggregator.spec);
  Rng init_rng = make_rng(config_.seed, {kInitStream});
  params_ = init_params(data_.arch, config_.model.init_scale, init_rng);
}

LossGradient Simulation::honest_objective(const Vector& params) const {
  const auto& clients = data_.partition.clients;
  LossGradient total;
  total.gradient = Vector::Zero(params.size());
  for (const auto& client : clients) {
    const LossGradient lg = loss_and_gradient(data_.arch, params, client);
    total.loss += lg.loss;
    total.gradient += lg.gradient;
  }
  const double inv = 1.0 / static_cast<double>(clients.size());
  total.loss *= inv;
  total.gradient *= inv;
  return total;
}

RoundRecord Simulation::step() {
  const int t = round_;
  const std::uint64_t seed = config_.seed;
  const Architecture& arch = data_.arch;
  const int c = arch.num_classes;
  const int h = static_cast<int>(data_.partition.clients.size());
  const Eigen::Index d = arch.num_params();
  const int threads = options_.threads;

  RoundRecord rec;
  rec.round = t;
  rec.eta = learning_rate_at(config_.schedule, t);
  const LocalUpdateOptions local = local_options(config_.model, rec.eta);

  // Participating honest clients, in index order.
  std::vector<int> participants(static_cast<size_t>(h));
  std::iota(participants.begin(), participants.end(), 0);
  if (config_.schedule.participation < 1.0) {
    const int m = std::max(1, static_cast<int>(std::lround(config_.schedule.participation * h)));
    Rng prng = make_rng(seed, {kParticipationStream, static_cast<std::uint64_t>(t)});
    for (int i = 0; i < m; ++i) {
      std::uniform_int_distribution<int> pick(i, h - 1);
      std::swap(participants[static_cast<size_t>(i)], participants[static_cast<size_t>(pick(prng))]);
    }
    participants.resize(static_cast<size_t>(m));
    std::sort(participants.begin(), participants.end());
  }
  const int m = static_cast<int>(participants.size());

  Matrix honest(d, m);
  parallel_for(m, threads, [&](int j) {
    const int i = participants[static_cast<size_t>(j)];
    Rng rng = make_rng(seed, {kClientStream, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)});
    try {
      honest.col(j) = local_update(arch, params_, data_.partition.clients[static_cast<size_t>(i)], local, rng);
    } catch (const Error& e) {
      throw Error(e.code(), "client " + std::to_string(i) + ": " + e.what());
    }
  });

  // Server virtual clients: one per class, on server-held data only.
  Matrix server(d, c);
  parallel_for(c, threads, [&](int z) {
    Rng rng = make_rng(seed, {kServerStream, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(z)});
    server.col(z) = local_update(arch, params_, data_.server_per_class[static_cast<size_t>(z)], local, rng);
  });

  AttackSpec attack = config_.attack.spec;
  if (attack.kind == AttackKind::kMimic) {
    const auto& dists = data_.partition.label_distributions;
    int target = -1;
    for (int j = 0; j < m; ++j) {
      if (participants[static_cast<size_t>(j)] == attack.mimic_target) target = j;
    }
    if (target < 0) {
      double best = -1.0;
      for (int j = 0; j < m; ++j) {
        const double top = dists[static_cast<size_t>(participants[static_cast<size_t>(j)])].maxCoeff();
        if (top > best) {
          best = top;
          target = j;
        }
      }
    }
    attack.mimic_target = target;
  }
  const int byz = attack.kind == AttackKind::kNone ? 0 : config_.attack.byzantine;
  Rng attack_rng = make_rng(seed, {kAttackStream, static_cast<std::uint64_t>(t)});
  const Matrix byzantine = apply_attack(attack, honest, m + byz, byz, attack_rng);

  Matrix gradients(d, m + byzantine.cols());
  gradients.leftCols(m) = honest;
  gradients.rightCols(byzantine.cols()) = byzantine;

  const ServerLossFn server_loss = [&](const Vector& w) { return loss_only(arch, w, data_.server_pooled); };
  const AggregationInput input{gradients,
                               &server,
                               config_.aggregator.f,
                               c,
                               derive_seed(seed, {kAggregateStream, static_cast<std::uint64_t>(t)}),
                               &server_loss,
                               &params_,
                               rec.eta};
  const AggregationResult result = aggregator_(input);
  require(all_finite(result.aggregate), ErrorCode::kNumeric,
          "round " + std::to_string(t) + ": non-finite aggregate");

  if (config_.aggregator.compare_es &&
      (config_.aggregator.spec.name == "boba" || config_.aggregator.spec.name == "boba-es")) {
    rec.trimmed_loss = fit_subspace_alternating(input, config_.aggregator.spec.boba).trimmed_loss;
    rec.es_loss = fit_subspace_exhaustive(input, config_.aggregator.spec.boba).trimmed_loss;
  } else {
    rec.trimmed_loss = result.diagnostics.trimmed_loss;
    rec.es_loss = std::numeric_limits<double>::quiet_NaN();
  }

  // Expected honest mean: sum_z pbar_z E gamma_z for raw gradients; the
  // honest mean for multi-step pseudo-gradients, which have no class oracle.
  const Vector honest_mean = column_mean(honest);
  Vector expected_mean;
  if (config_.model.local == LocalVariant::kFedSgd && !data_.oracle_per_class.empty()) {
    Matrix class_grads(d, c);
    parallel_for(c, threads, [&](int z) {
      class_grads.col(z) = loss_and_gradient(arch, params_, data_.oracle_per_class[static_cast<size_t>(z)]).gradient;
    });
    Vector pbar = Vector::Zero(c);
    for (int i : participants) pbar += data_.partition.label_distributions[static_cast<size_t>(i)];
    pbar /= static_cast<double>(m);
    expected_mean = class_grads * pbar;
  } else {
    expected_mean = honest_mean;
  }
  rec.grad_err = gradient_estimation_error(result.aggregate, expected_mean);
  rec.grad_sq_norm = honest_objective(params_).gradient.squaredNorm();
  rec.trsvd_calls = result.diagnostics.trsvd_calls;
  rec.accepted_count = result.accepted_count();
  rec.participants = participants;

  const double scale = config_.model.local == LocalVariant::kFedSgd ? rec.eta : 1.0;
  params_ -= scale * result.aggregate;
  require(all_finite(params_), ErrorCode::kNumeric,
          "round " + std::to_string(t) + ": model parameters became non-finite");

  double loss = 0.0;
  for (const auto& client : data_.partition.clients) loss += loss_only(arch, params_, client);
  rec.train_loss = loss / static_cast<double>(h);
  const AccuracyReport acc = accuracy_and_recall(arch, params_, data_.test);
  rec.test_acc = acc.accuracy;
  rec.recall = acc.recall;

  if (options_.keep_vectors) {
    rec.aggregate = result.aggregate;
    rec.honest_mean = honest_mean;
    rec.expected_mean = expected_mean;
  }
  if (options_.keep_honest) rec.honest_gradients = honest;
  last_honest_ = std::move(honest);
  ++round_;
  return rec;
}

SimConfig reference_config(const SimConfig& config) {
  SimConfig ref = config;
  ref.aggregator.spec.name = "average";
  ref.aggregator.reference = false;
  ref.aggregator.compare_es = false;
  ref.attack.spec.kind = AttackKind::kNone;
  ref.attack.byzantine = 0;
  return ref;
}

ExperimentResult run_experiment(const SimConfig& config, const RunOptions& options) {
  validate_config(config);
  const SimData data = build_sim_data(config);
  ExperimentResult out;
  {
    Simulation sim(config, data, options);
    out.rounds.reserve(static_cast<size_t>(config.schedule.rounds));
    for (int t = 0; t < config.schedule.rounds; ++t) {
      out.rounds.push_back(sim.step());
      // Honest gradients at the initial model, where the simplex is widest.
      if (t == 0 && sim.last_honest().cols() > 1) out.pca_ratios = explained_variance_ratios(sim.last_honest());
    }
    out.final_params = sim.params();
  }
  out.final_accuracy = accuracy_and_recall(data.arch, out.final_params, data.test);

  if (is_reference_like(config) && !options.aggregator) {
    out.reference_accuracy = out.final_accuracy;
  } else if (config.aggregator.reference) {
    const SimConfig ref = reference_config(config);
    RunOptions ref_options;
    ref_options.threads = options.threads;
    Simulation sim(ref, data, ref_options);
    for (int t = 0; t < ref.schedule.rounds; ++t) sim.step();
    out.reference_accuracy = accuracy_and_recall(data.arch, sim.params(), data.test);
  }
  if (out.reference_accuracy) {
    out.mrd = max_recall_drop(out.final_accuracy.recall, out.reference_accuracy->recall);
  } else {
    out.mrd = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void write_rounds_csv(std::ostream& out, const SimConfig& config, const ExperimentResult& result) {
  const std::string agr = config.aggregator.spec.name;
  const std::string attack = attack_kind_name(config.attack.spec.kind);
  out << kRoundsCsvHeader << '\n';
  for (const auto& r : result.rounds) {
    out << r.round << ',' << agr << ',' << attack << ',' << config.seed << ',' << fmt(r.eta) << ','
        << fmt(r.train_loss) << ',' << fmt(r.test_acc) << ',' << fmt(r.grad_err) << ',' << r.trsvd_calls
        << ',' << r.accepted_count << '\n';
  }
}

void write_summary(std::ostream& out, const SimConfig& config, const ExperimentResult& result) {
  const auto& rounds = result.rounds;
  double grad_err = 0.0;
  double sq_norm = 0.0;
  double trsvd = 0.0;
  double accepted = 0.0;
  for (const auto& r : rounds) {
    grad_err += r.grad_err;
    sq_norm += r.grad_sq_norm;
    trsvd += r.trsvd_calls;
    accepted += r.accepted_count;
  }
  const double t = static_cast<double>(std::max<size_t>(rounds.size(), 1));
  out << "agr=" << config.aggregator.spec.name << '\n'
      << "attack=" << attack_kind_name(config.attack.spec.kind) << '\n'
      << "seed=" << config.seed << '\n'
      << "rounds=" << rounds.size() << '\n'
      << "honest=" << config.partition.honest_count << '\n'
      << "byzantine=" << (config.attack.spec.kind == AttackKind::kNone ? 0 : config.attack.byzantine) << '\n'
      << "f=" << config.aggregator.f << '\n'
      << "classes=" << config.task.classes << '\n'
      << "chance_acc=" << fmt(1.0 / config.task.classes) << '\n'
      << "final_acc=" << fmt(result.final_accuracy.accuracy) << '\n'
      << "final_train_loss=" << fmt(rounds.empty() ? 0.0 : rounds.back().train_loss) << '\n'
      << "mean_grad_err=" << fmt(grad_err / t) << '\n'
      << "mean_sq_grad_norm=" << fmt(sq_norm / t) << '\n'
      << "mean_trsvd_calls=" << fmt(trsvd / t) << '\n'
      << "mean_accepted_count=" << fmt(accepted / t) << '\n'
      << "ref_final_acc="
      << fmt(result.reference_accuracy ? result.reference_accuracy->accuracy
                                       : std::numeric_limits<double>::quiet_NaN())
      << '\n'
      << "mrd=" << fmt(result.mrd) << '\n';
  for (Eigen::Index z = 0; z < result.final_accuracy.recall.size(); ++z) {
    out << "recall_" << z << '=' << fmt(result.final_accuracy.recall(z)) << '\n';
  }
  if (result.reference_accuracy) {
    for (Eigen::Index z = 0; z < result.reference_accuracy->recall.size(); ++z) {
      out << "ref_recall_" << z << '=' << fmt(result.reference_accuracy->recall(z)) << '\n';
    }
  }
}

void write_pca_csv(std::ostream& out, const ExperimentResult& result) {
  out << "component,variance_fraction\n";
  for (Eigen::Index j = 0; j < result.pca_ratios.size(); ++j) {
    out << j + 1 << ',' << fmt(result.pca_ratios(j)) << '\n';
  }
}

void write_loss_ratio_csv(std::ostream& out, const ExperimentResult& result) {
  out << "round,loss_alternating,loss_exhaustive\n";
  for (const auto& r : result.rounds) {
    out << r.round << ',' << fmt(r.trimmed_loss) << ',' << fmt(r.es_loss) << '\n';
  }
}

void write_outputs(const std::string& out_dir, const SimConfig& config, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create output directory '" + out_dir + "'");
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
    require(f.good(), ErrorCode::kIo, "cannot write '" + (fs::path(out_dir) / name).string() + "'");
    return f;
  };
  {
    auto f = open("rounds.csv");
    write_rounds_csv(f, config, result);
  }
  {
    auto f = open("summary.txt");
    write_summary(f, config, result);
  }
  {
    auto f = open("pca.csv");
    write_pca_csv(f, result);
  }
  {
    auto f = open("config.ini");
    f << config_to_string(config);
  }
  if (config.aggregator.compare_es) {
    auto f = open("loss_ratio.csv");
    write_loss_ratio_csv(f, result);
  }
}

}  // namespace boba
