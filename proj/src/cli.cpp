#include "boba/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "boba/aggregation.hpp"
#include "boba/attacks.hpp"
#include "boba/error.hpp"
#include "boba/fedsim.hpp"
#include "boba/gradient_file.hpp"
#include "boba/rng.hpp"
#include "boba/verify.hpp"

namespace boba {
namespace {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kNumeric:
    case ErrorCode::kDegenerateSimplex: return kExitNumeric;
    default: return kExitConfig;
  }
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, const std::string& seed_flag,
                 int threads, std::ostream& out) {
  SimConfig config = load_config(config_path);
  std::string seed_text = seed_flag;
  if (seed_text.empty()) {
    if (const char* env = std::getenv("BOBA_SIM_SEED")) seed_text = env;
  }
  if (!seed_text.empty()) {
    try {
      size_t used = 0;
      config.seed = std::stoull(seed_text, &used);
      require(used == seed_text.size(), ErrorCode::kConfig, "");
    } catch (...) {
      throw Error(ErrorCode::kConfig, "seed: expected a non-negative integer, got '" + seed_text + "'");
    }
  }
  RunOptions options;
  options.threads = threads;
  const ExperimentResult result = run_experiment(config, options);
  write_outputs(out_dir, config, result);
  out << "wrote " << result.rounds.size() << " rounds to " << out_dir << " (final_acc " << result.final_accuracy.accuracy
      << ")\n";
  return kExitOk;
}

int cmd_aggregate(const std::string& path, const std::string& agr, int f, double p_min, std::uint64_t seed,
                  std::ostream& out) {
  bool known = false;
  for (const auto& name : aggregator_names()) known = known || name == agr;
  require(known, ErrorCode::kConfig, "unknown aggregator '" + agr + "'");
  require(!needs_server_loss(agr), ErrorCode::kConfig,
          agr + " needs server data and a model, which a gradient file does not carry");
  const GradientFile file = read_gradient_file(path);
  require(!needs_server_gradients(agr) || file.server.has_value(), ErrorCode::kMissingServerGradients,
          agr + " needs server gradients; the file has none");
  AggregatorSpec spec;
  spec.name = agr;
  spec.boba.p_min = p_min;
  const AggregationInput input{file.clients, file.server ? &*file.server : nullptr, f, file.num_classes, seed};
  const AggregationResult result = make_aggregator(spec)(input);
  out << agr << ',' << fmt17(result.diagnostics.trimmed_loss) << ',' << result.accepted_count();
  for (Eigen::Index i = 0; i < result.aggregate.size(); ++i) out << ',' << fmt17(result.aggregate(i));
  out << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& suite, const std::string& corrupt, int threads, std::uint64_t seed,
               std::ostream& out) {
  VerifyOptions options;
  options.corrupt = corrupt;
  options.threads = threads;
  options.seed = seed;
  const auto results = run_verify_suite(suite, options);
  int failed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    failed += r.passed ? 0 : 1;
  }
  out << (failed == 0 ? "all " + std::to_string(results.size()) + " checks passed"
                      : std::to_string(failed) + " of " + std::to_string(results.size()) + " checks failed")
      << '\n';
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

int cmd_fixture(const std::string& kind, const std::string& path, bool text, std::uint64_t seed, double delta,
                double eps, int honest, int byzantine, std::ostream& out) {
  GradientFile file;
  if (kind == "lower-bound") {
    const LowerBoundInstance lb = make_lower_bound_instance(honest, byzantine, delta);
    file.clients = lb.gradients;
    file.server = Matrix(1, 2);
    (*file.server) << delta, -0.5 * delta;
    file.num_classes = 2;
    out << "beta=" << fmt17(lb.beta) << " expected_means=" << fmt17(lb.expected_mean_first) << ','
        << fmt17(lb.expected_mean_second) << " bound=" << fmt17(lb.beta * delta) << '\n';
  } else if (kind == "three-client") {
    const ThreeClientInstance inst = make_three_client_instance(delta, eps, seed);
    file.clients = inst.gradients;
    file.server = Matrix(2, 2);
    file.server->col(0) = inst.expected.col(0);
    file.server->col(1) = inst.expected.col(2);
    file.num_classes = 2;
    out << "z1=" << inst.z1 << " z2=" << inst.z2 << " krum_error=" << fmt17(eps * eps + delta * delta / 4) << '\n';
  } else if (kind == "simplex") {
    const BenchInstance b = make_bench_instance(honest + byzantine, 20, 4, seed);
    file.clients = b.gradients;
    file.server = b.server;
    file.num_classes = b.c;
    out << "f=" << b.f << '\n';
  } else {
    throw Error(ErrorCode::kConfig, "unknown fixture '" + kind + "' (lower-bound, three-client, simplex)");
  }
  if (text) {
    std::ofstream f(path);
    require(f.good(), ErrorCode::kIo, "cannot write '" + path + "'");
    write_gradient_text(f, file);
  } else {
    write_gradient_file(path, file);
  }
  return kExitOk;
}

}  // namespace

BenchInstance make_bench_instance(int n, Eigen::Index d, int c, std::uint64_t seed) {
  require(n >= 4 && d >= c && c >= 2, ErrorCode::kInvalidInput, "bench instance too small");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> gamma(0.5, 1.0);
  BenchInstance b;
  b.c = c;
  b.f = static_cast<int>(std::lround(0.13 * n));
  const int h = n - b.f;
  b.server.resize(d, c);
  for (Eigen::Index i = 0; i < b.server.size(); ++i) b.server.data()[i] = normal(rng);
  b.gradients.resize(d, n);
  for (int i = 0; i < h; ++i) {
    Vector p(c);
    for (int z = 0; z < c; ++z) p(z) = gamma(rng) + 1e-12;
    p /= p.sum();
    b.gradients.col(i) = b.server * p;
    for (Eigen::Index r = 0; r < d; ++r) b.gradients(r, i) += 0.01 * normal(rng);
  }
  if (b.f > 0) b.gradients.rightCols(b.f) = ipm_attack(b.gradients.leftCols(h), b.f);
  return b;
}

std::vector<BenchRow> run_bench(const std::vector<int>& n_list, const std::vector<Eigen::Index>& d_list,
                                const std::vector<std::string>& agrs, int c, int repeats, std::uint64_t seed) {
  std::vector<BenchRow> rows;
  for (int n : n_list) {
    for (Eigen::Index d : d_list) {
      const BenchInstance b = make_bench_instance(n, d, c, derive_seed(seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(d)}));
      for (const auto& agr : agrs) {
        AggregatorSpec spec;
        spec.name = agr;
        const Aggregator rule = make_aggregator(spec);
        const AggregationInput input{b.gradients, &b.server, b.f, b.c, seed};
        std::vector<double> times;
        int k = 0;
        for (int r = 0; r < std::max(1, repeats); ++r) {
          const auto t0 = std::chrono::steady_clock::now();
          const AggregationResult res = rule(input);
          const auto t1 = std::chrono::steady_clock::now();
          times.push_back(std::chrono::duration<double>(t1 - t0).count());
          k = res.diagnostics.trsvd_calls;
        }
        std::sort(times.begin(), times.end());
        rows.push_back({agr, n, d, times[times.size() / 2], k});
      }
    }
  }
  return rows;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Byzantine-robust federated learning workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seed_flag;
  int threads = 0;
  auto* simulate = app.add_subcommand("simulate", "Run an experiment from a config file");
  simulate->add_option("--config", config_path, "Experiment config (INI)")->required();
  simulate->add_option("--out", out_dir, "Output directory")->required();
  simulate->add_option("--seed", seed_flag, "Master seed (default: $BOBA_SIM_SEED, then the config)");
  simulate->add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  std::string file_path;
  std::string agr;
  int f = 0;
  double p_min = -0.5;
  std::uint64_t agg_seed = 0;
  auto* aggregate = app.add_subcommand("aggregate", "Aggregate the gradients in a gradient file");
  aggregate->add_option("--file", file_path, "Gradient file")->required();
  aggregate->add_option("--agr", agr, "Aggregation rule")->required();
  aggregate->add_option("--f", f, "Byzantine tolerance")->required()->check(CLI::NonNegativeNumber);
  aggregate->add_option("--pmin", p_min, "BOBA acceptance threshold");
  aggregate->add_option("--seed", agg_seed, "Seed for randomized rules (bucketing)");

  std::string suite = "all";
  std::string corrupt;
  std::uint64_t verify_seed = 7;
  auto* verify = app.add_subcommand("verify", "Run the invariant and fixture checks");
  verify->add_option("--suite", suite, "lemmas, fixtures, bounds or all");
  verify->add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  verify->add_option("--seed", verify_seed, "Seed of the randomized checks");
  verify->add_option("--corrupt", corrupt)->group("");

  std::vector<int> n_list;
  std::vector<long long> d_list;
  std::vector<std::string> bench_agrs = {"average", "coomed", "trmean", "krum", "mkrum", "geomed", "fltrust", "boba"};
  int bench_c = 10;
  int repeats = 3;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("bench", "Time aggregation rules on synthetic gradients");
  bench->add_option("--n", n_list, "Client counts, comma separated")->required()->delimiter(',');
  bench->add_option("--d", d_list, "Dimensions, comma separated")->required()->delimiter(',');
  bench->add_option("--agr", bench_agrs, "Rules to time, comma separated")->delimiter(',');
  bench->add_option("--c", bench_c, "Number of classes");
  bench->add_option("--repeats", repeats, "Timed repetitions (median is reported)");
  bench->add_option("--seed", bench_seed, "Instance seed");

  std::string fixture_kind;
  std::string fixture_out;
  bool text = false;
  std::uint64_t fixture_seed = 1;
  double delta = 1.0;
  double eps = 0.05;
  int honest = 3;
  int byzantine = 1;
  auto* fixture = app.add_subcommand("fixture", "Write a theory fixture as a gradient file");
  fixture->add_option("--kind", fixture_kind, "lower-bound, three-client or simplex")->required();
  fixture->add_option("--out", fixture_out, "Output path")->required();
  fixture->add_flag("--text", text, "Write CSV instead of the binary format");
  fixture->add_option("--seed", fixture_seed, "Seed (three-client draws, simplex)");
  fixture->add_option("--delta", delta, "Outer variation delta");
  fixture->add_option("--eps", eps, "Inner variation eps (three-client)");
  fixture->add_option("--honest", honest, "Honest clients");
  fixture->add_option("--byzantine", byzantine, "Byzantine clients");

  auto* dump = app.add_subcommand("dump", "Print a gradient file as CSV");
  dump->add_option("--file", file_path, "Gradient file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(config_path, out_dir, seed_flag, threads, out);
    if (*aggregate) return cmd_aggregate(file_path, agr, f, p_min, agg_seed, out);
    if (*verify) return cmd_verify(suite, corrupt, threads, verify_seed, out);
    if (*bench) {
      require(!n_list.empty() && !d_list.empty(), ErrorCode::kConfig, "--n and --d must be non-empty");
      std::vector<Eigen::Index> dims(d_list.begin(), d_list.end());
      out << "agr,n,d,seconds,k\n";
      for (const auto& row : run_bench(n_list, dims, bench_agrs, bench_c, repeats, bench_seed)) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.6g", row.seconds);
        out << row.agr << ',' << row.n << ',' << row.d << ',' << buf << ',' << row.k << '\n';
      }
      return kExitOk;
    }
    if (*fixture) {
      return cmd_fixture(fixture_kind, fixture_out, text, fixture_seed, delta, eps, honest, byzantine, out);
    }
    if (*dump) {
      write_gradient_text(out, read_gradient_file(file_path));
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace boba
