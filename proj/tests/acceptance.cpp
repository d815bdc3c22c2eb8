#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "boba/aggregation.hpp"
#include "boba/attacks.hpp"
#include "boba/cli.hpp"
#include "boba/config.hpp"
#include "boba/fedsim.hpp"
#include "boba/rng.hpp"
#include "boba/verify.hpp"

namespace {

using boba::AttackKind;
using boba::Matrix;
using boba::SimConfig;
using boba::Vector;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// Outcome of a check list from the verify module, with the first failure.
Outcome from_checks(const std::vector<boba::CheckResult>& checks) {
  Outcome out{true, std::to_string(checks.size()) + " checks"};
  for (const auto& c : checks) {
    if (!c.passed) {
      out.passed = false;
      out.detail = c.name + ": " + c.detail;
      break;
    }
  }
  return out;
}

// Desk task: c = 10, dim 20, 200 samples per class, |H| = 20, f = 4.
SimConfig desk_config(const std::string& agr, AttackKind attack, int byzantine) {
  SimConfig c;
  c.task.classes = 10;
  c.task.dim = 20;
  c.task.per_class = 200;
  c.task.separation = 3.0;
  c.partition.scheme = boba::PartitionScheme::kPathological;
  c.partition.shards_per_client = 2;
  c.partition.honest_count = 20;
  c.schedule.rounds = 200;
  c.schedule.eta = 0.5;
  c.aggregator.spec.name = agr;
  c.aggregator.f = 4;
  c.aggregator.reference = false;
  c.attack.spec.kind = attack;
  c.attack.byzantine = byzantine;
  c.seed = 1;
  return c;
}

double mean_trsvd_calls(const boba::ExperimentResult& r) {
  double k = 0.0;
  for (const auto& rec : r.rounds) k += rec.trsvd_calls;
  return k / static_cast<double>(r.rounds.size());
}

struct Context {
  int threads = 0;
  std::vector<double> desk_k;  // mean TrSVD calls of every BOBA desk run
};

Outcome criterion_lemmas(Context&) {
  boba::VerifyOptions opt;
  opt.lemma_instances = 10'000;
  opt.lemma_tol = 1e-8;
  return from_checks(boba::verify_lemmas(opt));
}

Outcome criterion_simplex(Context& ctx) {
  SimConfig c = desk_config("average", AttackKind::kNone, 0);
  c.schedule.rounds = 1;
  boba::RunOptions opt;
  opt.threads = ctx.threads;
  const auto r = boba::run_experiment(c, opt);
  const double share = r.pca_ratios.head(c.task.classes - 1).sum();
  return {share >= 0.95, "first c-1 components explain " + fmt(share) + " (need >= 0.95)"};
}

// Honest gradients exactly on a random simplex, exact server vertices.
Outcome unbiased_noiseless() {
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    boba::Rng rng(boba::derive_seed(2024, {static_cast<std::uint64_t>(t)}));
    const int c = std::uniform_int_distribution<int>(2, 6)(rng);
    const int d = std::uniform_int_distribution<int>(c + 1, 30)(rng);
    const int h = std::uniform_int_distribution<int>(2 * c + 2, 30)(rng);
    const int f = std::uniform_int_distribution<int>(0, h / 4)(rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::gamma_distribution<double> gamma(0.7, 1.0);
    Matrix server(d, c);
    for (Eigen::Index i = 0; i < server.size(); ++i) server.data()[i] = normal(rng);
    Matrix p(c, h);
    for (int i = 0; i < h; ++i) {
      for (int z = 0; z < c; ++z) p(z, i) = gamma(rng) + 1e-3;
      p.col(i) /= p.col(i).sum();
    }
    const Matrix honest = server * p;
    const boba::AggregationInput input{honest, &server, f, c};
    const Vector out = boba::boba_aggregate(input).aggregate;
    worst = std::max(worst, (out - honest.rowwise().mean()).norm());
  }
  return {worst <= 1e-8, "noiseless max |BOBA - mean| " + fmt(worst, 3)};
}

Outcome criterion_unbiased(Context& ctx) {
  const Outcome exact = unbiased_noiseless();
  // Small inner variation: every client mixes all classes and holds 1000
  // samples. The pathological split breaks the subset assumption at f = 4.
  SimConfig c = desk_config("boba", AttackKind::kNone, 0);
  c.task.per_class = 2000;
  c.partition.scheme = boba::PartitionScheme::kDirichlet;
  c.partition.alpha = 1.0;
  c.aggregator.reference = true;
  boba::RunOptions opt;
  opt.threads = ctx.threads;
  const auto r = boba::run_experiment(c, opt);
  ctx.desk_k.push_back(mean_trsvd_calls(r));
  const double gap = 100.0 * std::abs(r.final_accuracy.accuracy - r.reference_accuracy->accuracy);
  const double mrd = 100.0 * r.mrd;
  const bool ok = exact.passed && gap <= 1.0 && mrd <= 2.0;
  return {ok, exact.detail + "; accuracy " + fmt(100.0 * r.final_accuracy.accuracy) + " vs Average " +
                  fmt(100.0 * r.reference_accuracy->accuracy) + " (gap " + fmt(gap, 3) +
                  " <= 1), MRD " + fmt(mrd, 3) + " <= 2"};
}

Outcome criterion_robustness(Context& ctx) {
  boba::RunOptions opt;
  opt.threads = ctx.threads;
  auto run = [&](const std::string& agr, AttackKind attack, int byzantine) {
    const auto r = boba::run_experiment(desk_config(agr, attack, byzantine), opt);
    if (agr == "boba") ctx.desk_k.push_back(mean_trsvd_calls(r));
    return 100.0 * r.final_accuracy.accuracy;
  };
  const double clean = run("boba", AttackKind::kNone, 0);
  bool ok = true;
  std::string detail = "no attack " + fmt(clean);
  for (auto kind : {AttackKind::kGauss, AttackKind::kIpm, AttackKind::kLie, AttackKind::kMimic,
                    AttackKind::kMinMax, AttackKind::kMinSum}) {
    const double acc = run("boba", kind, 3);
    ok = ok && std::abs(acc - clean) <= 3.0;
    detail += ", " + boba::attack_kind_name(kind) + " " + fmt(acc);
  }
  const double collapsed = run("average", AttackKind::kIpm, 3);
  ok = ok && collapsed <= 2.0 * 10.0;
  detail += "; Average under IPM " + fmt(collapsed) + " (chance 10)";
  return {ok, detail};
}

Outcome criterion_bound(Context& ctx) {
  boba::VerifyOptions opt;
  opt.bound_instances = 500;
  opt.threads = ctx.threads;
  return from_checks(boba::verify_bounds(opt));
}

Outcome criterion_lower_bound(Context& ctx) {
  boba::VerifyOptions opt;
  opt.threads = ctx.threads;
  return from_checks(boba::verify_fixtures(opt));
}

// Label-skew instance with n <= 18 and one of the six attacks.
Outcome criterion_es_ratio(Context&) {
  const AttackKind kinds[] = {AttackKind::kGauss, AttackKind::kIpm,    AttackKind::kLie,
                              AttackKind::kMimic, AttackKind::kMinMax, AttackKind::kMinSum};
  constexpr int kInstances = 200;
  int within = 0;
  int exact_failures = 0;
  double worst = 1.0;
  for (int t = 0; t < kInstances; ++t) {
    boba::Rng rng(boba::derive_seed(77, {static_cast<std::uint64_t>(t)}));
    const int c = std::uniform_int_distribution<int>(2, 4)(rng);
    const int d = std::uniform_int_distribution<int>(c + 2, 20)(rng);
    const int h = std::uniform_int_distribution<int>(3 * c, 15)(rng);
    const int b = std::uniform_int_distribution<int>(1, std::min(3, 18 - h))(rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::gamma_distribution<double> gamma(0.5, 1.0);
    Matrix server(d, c);
    for (Eigen::Index i = 0; i < server.size(); ++i) server.data()[i] = normal(rng);
    Matrix honest(d, h);
    const double noise = 0.05 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < h; ++i) {
      Vector p(c);
      for (int z = 0; z < c; ++z) p(z) = gamma(rng) + 1e-12;
      honest.col(i) = server * (p / p.sum());
      for (int r = 0; r < d; ++r) honest(r, i) += noise * normal(rng);
    }
    boba::AttackSpec spec;
    spec.kind = kinds[t % 6];
    spec.mimic_target = 0;
    Matrix all(d, h + b);
    all.leftCols(h) = honest;
    all.rightCols(b) = boba::apply_attack(spec, honest, h + b, b, rng);

    const boba::AggregationInput input{all, &server, b, c};
    const double alt = boba::fit_subspace_alternating(input).trimmed_loss;
    const double es = boba::fit_subspace_exhaustive(input).trimmed_loss;
    const double ratio = es > 0.0 ? alt / es : 1.0;
    worst = std::max(worst, ratio);
    if (ratio <= 1.5) ++within;
    const bool must_match = spec.kind == AttackKind::kGauss || spec.kind == AttackKind::kIpm;
    if (must_match && std::abs(ratio - 1.0) > 1e-9) ++exact_failures;
  }
  const double share = static_cast<double>(within) / kInstances;
  return {share >= 0.95 && exact_failures == 0,
          "ratio <= 1.5 in " + fmt(100.0 * share) + "% (need >= 95), max " + fmt(worst) +
              ", Gauss/IPM mismatches " + std::to_string(exact_failures)};
}

Outcome criterion_efficiency(Context& ctx) {
  if (ctx.desk_k.empty()) {
    boba::RunOptions opt;
    opt.threads = ctx.threads;
    ctx.desk_k.push_back(mean_trsvd_calls(boba::run_experiment(desk_config("boba", AttackKind::kIpm, 3), opt)));
  }
  bool ok = true;
  double mean_k = 0.0;
  for (double k : ctx.desk_k) mean_k += k / static_cast<double>(ctx.desk_k.size());
  ok = ok && mean_k <= 10.0;

  // Interleaved repeats so that machine load affects both rules alike.
  const auto inst = boba::make_bench_instance(115, 100'000, 10, 3);
  const boba::AggregationInput input{inst.gradients, &inst.server, inst.f, inst.c};
  boba::AggregatorSpec avg_spec;
  avg_spec.name = "average";
  const auto average = boba::make_aggregator(avg_spec);
  boba::AggregatorSpec boba_spec;
  const auto boba_rule = boba::make_aggregator(boba_spec);
  std::vector<double> t_avg;
  std::vector<double> t_boba;
  for (int rep = 0; rep < 21; ++rep) {
    auto start = Clock::now();
    const auto a = average(input);
    t_avg.push_back(seconds_since(start));
    start = Clock::now();
    const auto b = boba_rule(input);
    t_boba.push_back(seconds_since(start));
    if (a.aggregate.size() != b.aggregate.size()) ok = false;
  }
  std::sort(t_avg.begin(), t_avg.end());
  std::sort(t_boba.begin(), t_boba.end());
  const double ratio = t_boba[t_boba.size() / 2] / t_avg[t_avg.size() / 2];
  ok = ok && ratio <= 5.0;
  const std::string runs = std::to_string(ctx.desk_k.size()) + " desk runs";
  return {ok, "mean k " + fmt(mean_k, 3) + " over " + runs + "; BOBA / Average median time at d = 1e5, n = 115: " +
                  fmt(ratio, 3) + " (need <= 5)"};
}

std::string experiment_bytes(const SimConfig& config, int threads) {
  boba::RunOptions opt;
  opt.threads = threads;
  const auto r = boba::run_experiment(config, opt);
  std::ostringstream out;
  boba::write_rounds_csv(out, config, r);
  boba::write_summary(out, config, r);
  boba::write_pca_csv(out, r);
  if (config.aggregator.compare_es) boba::write_loss_ratio_csv(out, r);
  return out.str();
}

Outcome criterion_determinism(Context&) {
  SimConfig c = desk_config("boba", AttackKind::kLie, 3);
  c.schedule.rounds = 60;
  c.schedule.participation = 0.75;
  c.model.minibatch = 16;
  c.aggregator.reference = true;
  const std::string one = experiment_bytes(c, 1);
  const std::string again = experiment_bytes(c, 1);
  const std::string four = experiment_bytes(c, 4);
  SimConfig es = desk_config("boba", AttackKind::kIpm, 2);
  es.partition.honest_count = 12;
  es.aggregator.f = 2;
  es.aggregator.compare_es = true;
  es.schedule.rounds = 20;
  const bool es_same = experiment_bytes(es, 1) == experiment_bytes(es, 3);
  const bool ok = one == again && one == four && es_same;
  return {ok, std::string("repeat ") + (one == again ? "identical" : "differs") + ", 1 vs 4 threads " +
                  (one == four ? "identical" : "differs") + ", ES run 1 vs 3 threads " +
                  (es_same ? "identical" : "differs") + " (" + std::to_string(one.size()) + " bytes)"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome(Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the BOBA workbench"};
  std::vector<int> only;
  Context ctx;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--threads", ctx.threads, "Worker threads (0 = all cores)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "lemma suite", 10.0, criterion_lemmas},
      {2, "simplex geometry", 30.0, criterion_simplex},
      {3, "unbiasedness", 120.0, criterion_unbiased},
      {4, "robustness", 600.0, criterion_robustness},
      {5, "error bound", 300.0, criterion_bound},
      {6, "lower-bound fixtures", 60.0, criterion_lower_bound},
      {7, "ES vs alternating", 300.0, criterion_es_ratio},
      {8, "efficiency", 120.0, criterion_efficiency},
      {9, "determinism", 300.0, criterion_determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double elapsed = seconds_since(start);
    const bool in_time = elapsed < c.limit_seconds;
    const bool passed = o.passed && in_time;
    if (!passed) ++failures;
    std::cout << "criterion " << c.id << " [" << c.name << "] " << (passed ? "PASS" : "FAIL") << ": " << o.detail
              << " | " << fmt(elapsed, 3) << " s (limit " << fmt(c.limit_seconds) << " s)"
              << (in_time ? "" : " TIME EXCEEDED") << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
