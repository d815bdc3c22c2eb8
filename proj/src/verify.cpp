#include "boba/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "boba/attacks.hpp"
#include "boba/error.hpp"
#include "boba/fedsim.hpp"
#include "boba/rng.hpp"

namespace boba {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double tolerance_for(const VerifyOptions& o, const std::string& name, double tol) {
  return o.corrupt == name ? kNegInf : tol;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

struct LemmaInstance {
  AffineSubspace subspace;
  double scale = 1.0;
};

LemmaInstance random_subspace(Rng& rng) {
  std::uniform_int_distribution<int> dim_pick(2, 12);
  const int d = dim_pick(rng);
  std::uniform_int_distribution<int> rank_pick(1, d - 1);
  const int k = rank_pick(rng);
  std::uniform_real_distribution<double> scale_pick(0.1, 10.0);
  LemmaInstance inst;
  inst.scale = scale_pick(rng);
  Matrix pts = random_matrix(d, k + 3, inst.scale, rng);
  pts.colwise() += random_matrix(d, 1, inst.scale, rng).col(0);
  inst.subspace = truncated_svd(pts, k).subspace;
  return inst;
}

CheckResult make_result(const std::string& name, int failures, int total, double worst,
                        const std::string& what) {
  CheckResult r;
  r.name = name;
  r.passed = failures == 0;
  r.detail = std::to_string(total - failures) + "/" + std::to_string(total) + " instances hold; worst " +
             what + " " + num(worst);
  return r;
}

// Vertices in R^1 with a non-zero mean so FLTrust has a direction.
Matrix lower_bound_server(double delta) {
  Matrix s(1, 2);
  s << delta, -0.5 * delta;
  return s;
}

}  // namespace

std::vector<CheckResult> verify_lemmas(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  const int count = o.lemma_instances;
  Rng rng(derive_seed(o.seed, {0x1E44A}));

  {
    const double tol = tolerance_for(o, "nearest_point", o.lemma_tol);
    int failures = 0;
    double worst = kNegInf;
    for (int t = 0; t < count; ++t) {
      const LemmaInstance inst = random_subspace(rng);
      const auto d = inst.subspace.ambient_dim();
      const Vector u = random_matrix(d, 1, inst.scale, rng).col(0);
      const Vector v = random_matrix(d, 1, inst.scale, rng).col(0);
      const double lhs = (project(inst.subspace, u) - u).norm();
      const double rhs = (project(inst.subspace, v) - u).norm();
      const double excess = (lhs - rhs) / (1.0 + rhs);
      worst = std::max(worst, excess);
      if (excess > tol) ++failures;
    }
    out.push_back(make_result("nearest_point", failures, count, worst, "relative excess"));
  }
  {
    const double tol = tolerance_for(o, "contraction", o.lemma_tol);
    int failures = 0;
    double worst = kNegInf;
    for (int t = 0; t < count; ++t) {
      const LemmaInstance inst = random_subspace(rng);
      const auto d = inst.subspace.ambient_dim();
      const Vector u = random_matrix(d, 1, inst.scale, rng).col(0);
      const Vector v = random_matrix(d, 1, inst.scale, rng).col(0);
      const double lhs = (project(inst.subspace, u) - project(inst.subspace, v)).norm();
      const double rhs = (u - v).norm();
      const double excess = (lhs - rhs) / (1.0 + rhs);
      worst = std::max(worst, excess);
      if (excess > tol) ++failures;
    }
    out.push_back(make_result("contraction", failures, count, worst, "relative excess"));
  }
  {
    const double tol = tolerance_for(o, "affine_commutation", o.lemma_tol);
    int failures = 0;
    double worst = kNegInf;
    std::uniform_int_distribution<int> m_pick(2, 6);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int t = 0; t < count; ++t) {
      const LemmaInstance inst = random_subspace(rng);
      const auto d = inst.subspace.ambient_dim();
      const int m = m_pick(rng);
      const Matrix pts = random_matrix(d, m, inst.scale, rng);
      Vector lambda(m);
      for (int i = 0; i < m - 1; ++i) lambda(i) = normal(rng);
      lambda(m - 1) = 1.0 - lambda.head(m - 1).sum();
      Vector projected_sum = Vector::Zero(d);
      double weight = 1.0;
      for (int i = 0; i < m; ++i) {
        projected_sum += lambda(i) * project(inst.subspace, pts.col(i));
        weight += std::abs(lambda(i)) * pts.col(i).norm();
      }
      const double gap = (project(inst.subspace, pts * lambda) - projected_sum).norm() / weight;
      worst = std::max(worst, gap);
      if (gap > tol) ++failures;
    }
    out.push_back(make_result("affine_commutation", failures, count, worst, "relative gap"));
  }
  {
    const double tol = tolerance_for(o, "projection_idempotence", 1e-9);
    int failures = 0;
    double worst = kNegInf;
    for (int t = 0; t < count; ++t) {
      const LemmaInstance inst = random_subspace(rng);
      const Vector u = random_matrix(inst.subspace.ambient_dim(), 1, inst.scale, rng).col(0);
      const Vector p = project(inst.subspace, u);
      const double gap = (project(inst.subspace, p) - p).norm() / (1.0 + p.norm());
      worst = std::max(worst, gap);
      if (gap > tol) ++failures;
    }
    out.push_back(make_result("projection_idempotence", failures, count, worst, "relative gap"));
  }
  return out;
}

std::vector<CheckResult> verify_fixtures(const VerifyOptions& o) {
  std::vector<CheckResult> out;

  {
    const double tol = tolerance_for(o, "lower_bound_construction", 1e-15);
    const LowerBoundInstance lb = make_lower_bound_instance(3, 1, 1.0);
    const double expect[4] = {0.75, 0.75, -0.75, -0.75};
    double gap = std::abs(lb.expected_mean_first - 0.25) + std::abs(lb.expected_mean_second + 0.25);
    for (int i = 0; i < 4; ++i) gap += std::abs(lb.gradients(0, i) - expect[i]);
    out.push_back({"lower_bound_construction", gap <= tol,
                   "values (0.75, 0.75, -0.75, -0.75), E mu = +-0.25; total deviation " + num(gap)});
  }

  struct LowerCase {
    int honest;
    int byzantine;
    double delta;
  };
  const LowerCase cases[] = {{12, 4, 2.0}, {14, 4, 1.0}};
  {
    const double tol = tolerance_for(o, "lower_bound_average_equality", 1e-12);
    double worst = 0.0;
    for (const auto& lc : cases) {
      const LowerBoundInstance lb = make_lower_bound_instance(lc.honest, lc.byzantine, lc.delta);
      const double mu = average(lb.gradients)(0);
      const double target = lb.beta * lb.beta * lc.delta * lc.delta;
      worst = std::max({worst, std::abs((mu - lb.expected_mean_first) * (mu - lb.expected_mean_first) - target),
                        std::abs((mu - lb.expected_mean_second) * (mu - lb.expected_mean_second) - target)});
    }
    out.push_back({"lower_bound_average_equality", worst <= tol,
                   "Average error equals beta^2 delta^2 on both sets; worst deviation " + num(worst)});
  }
  {
    const double tol = tolerance_for(o, "lower_bound_all_aggregators", 1e-12);
    bool ok = true;
    std::ostringstream detail;
    int checked = 0;
    for (const auto& lc : cases) {
      const LowerBoundInstance lb = make_lower_bound_instance(lc.honest, lc.byzantine, lc.delta);
      const Matrix server = lower_bound_server(lc.delta);
      const ServerLossFn loss = [](const Vector& w) { return 0.5 * (w(0) - 0.3) * (w(0) - 0.3); };
      const Vector params = Vector::Zero(1);
      const double floor = lb.beta * lb.beta * lc.delta * lc.delta;
      for (const auto& name : aggregator_names()) {
        AggregatorSpec spec;
        spec.name = name;
        const AggregationInput input{lb.gradients, &server, lc.byzantine, 2, o.seed, &loss, &params, 1.0};
        try {
          const double mu = make_aggregator(spec)(input).aggregate(0);
          const double err = std::max((mu - lb.expected_mean_first) * (mu - lb.expected_mean_first),
                                      (mu - lb.expected_mean_second) * (mu - lb.expected_mean_second));
          ++checked;
          if (err < floor - tol) {
            ok = false;
            detail << name << " error " << num(err) << " < " << num(floor) << "; ";
          }
        } catch (const Error& e) {
          ok = false;
          detail << name << " failed: " << e.what() << "; ";
        }
      }
    }
    const std::string msg = ok ? std::to_string(checked) + " aggregator runs reach max error >= beta^2 delta^2"
                               : detail.str();
    out.push_back({"lower_bound_all_aggregators", ok, msg});
  }

  const int draws = o.monte_carlo_draws;
  {
    const double tol = tolerance_for(o, "three_client_krum", 1e-10);
    Rng rng(derive_seed(o.seed, {0x3C1}));
    std::uniform_real_distribution<double> delta_pick(0.5, 3.0);
    std::uniform_real_distribution<double> frac_pick(0.0, 0.49);
    double worst = 0.0;
    for (int t = 0; t < draws; ++t) {
      const double delta = t == 0 ? 1.0 : delta_pick(rng);
      const double eps = t == 0 ? 0.05 : frac_pick(rng) * delta;
      const ThreeClientInstance inst = make_three_client_instance(delta, eps, derive_seed(o.seed, {0x3C2, static_cast<std::uint64_t>(t)}));
      const Vector mu = krum(inst.gradients, 0, 1).aggregate;
      worst = std::max(worst, std::abs(gradient_estimation_error(mu, inst.expected_mean) -
                                       (eps * eps + 0.25 * delta * delta)));
    }
    out.push_back({"three_client_krum", worst <= tol,
                   std::to_string(draws) + " draws; worst |error - (eps^2 + delta^2/4)| " + num(worst)});
  }
  {
    const double delta = 1.0;
    const double eps = 0.05;
    double coomed = 0.0;
    double boba_err = 0.0;
    Matrix server(2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    server.col(0) = 0.5 * delta * Eigen::Vector2d(-r, r);
    server.col(1) = -delta * Eigen::Vector2d(-r, r);
    for (int t = 0; t < draws; ++t) {
      const ThreeClientInstance inst = make_three_client_instance(delta, eps, derive_seed(o.seed, {0x3C3, static_cast<std::uint64_t>(t)}));
      coomed += gradient_estimation_error(coordinate_median(inst.gradients), inst.expected_mean);
      const AggregationInput input{inst.gradients, &server, 0, 2};
      boba_err += gradient_estimation_error(boba_aggregate(input).aggregate, inst.expected_mean);
    }
    coomed /= draws;
    boba_err /= draws;
    const double coomed_floor = delta * delta / 8.0 + eps * eps / 2.0;
    const double margin_c = o.corrupt == "three_client_coomed" ? std::numeric_limits<double>::infinity() : 0.0;
    out.push_back({"three_client_coomed", coomed > coomed_floor + margin_c,
                   "mean error " + num(coomed) + " > delta^2/8 + eps^2/2 = " + num(coomed_floor)});
    const double boba_cap = delta * delta / 8.0;
    const double margin_b = o.corrupt == "three_client_boba" ? kNegInf : 0.0;
    out.push_back({"three_client_boba", boba_err < boba_cap + margin_b,
                   "mean error " + num(boba_err) + " < delta^2/8 = " + num(boba_cap) + " (eps^2 = " +
                       num(eps * eps) + ")"});
  }
  return out;
}

BoundInstance make_bound_instance(std::uint64_t seed) {
  Rng rng(seed);
  BoundInstance inst;
  inst.c = std::uniform_int_distribution<int>(2, 5)(rng);
  const int d = std::uniform_int_distribution<int>(inst.c + 1, 12)(rng);
  const int h = std::uniform_int_distribution<int>(std::max(3 * inst.c, 8), 20)(rng);
  inst.byzantine = std::uniform_int_distribution<int>(0, h / 5)(rng);
  inst.f = inst.byzantine;
  const double scale = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
  const double alpha = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
  const double noise = std::uniform_real_distribution<double>(0.0, 0.2)(rng) * scale / std::sqrt(d);
  const double server_noise = std::uniform_real_distribution<double>(0.0, 0.2)(rng) * scale / std::sqrt(d);

  inst.server_expected = random_matrix(d, inst.c, scale, rng);
  Matrix p(inst.c, h);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (int i = 0; i < h; ++i) {
    for (int z = 0; z < inst.c; ++z) p(z, i) = gamma(rng) + 1e-12;
    p.col(i) /= p.col(i).sum();
  }
  inst.honest_expected = inst.server_expected * p;
  inst.honest = inst.honest_expected + random_matrix(d, h, noise, rng);
  inst.server = inst.server_expected + random_matrix(d, inst.c, server_noise, rng);
  return inst;
}

BoundEvaluation evaluate_bound_instance(const BoundInstance& inst, double p_min) {
  const int h = static_cast<int>(inst.honest.cols());
  const int n = h + inst.byzantine;
  const Vector expected_mean = column_mean(inst.honest_expected);

  BoundEvaluation ev;
  VariationSamples samples;
  for (int i = 0; i < h; ++i) samples.client_samples.push_back(inst.honest.col(i));
  samples.client_expected = inst.honest_expected;
  for (int z = 0; z < inst.c; ++z) samples.server_samples.push_back(inst.server.col(z));
  samples.server_expected = inst.server_expected;
  ev.variations = measure_variations(samples);
  ev.assumption = assumption_report(inst.honest_expected, n, inst.f, inst.c, inst.server_expected);

  // The mimicked client is the one with the largest outer variation.
  Eigen::Index extreme = 0;
  ev.variations.client_outer.maxCoeff(&extreme);

  const AttackKind kinds[] = {AttackKind::kGauss, AttackKind::kIpm,    AttackKind::kLie,
                              AttackKind::kMimic, AttackKind::kMinMax, AttackKind::kMinSum};
  BobaParams params;
  params.p_min = p_min;
  ev.worst_error = -1.0;
  for (AttackKind kind : kinds) {
    AttackSpec spec;
    spec.kind = kind;
    spec.mimic_target = static_cast<int>(extreme);
    Rng rng(derive_seed(static_cast<std::uint64_t>(kind), {static_cast<std::uint64_t>(n)}));
    const Matrix byz = apply_attack(spec, inst.honest, n, inst.byzantine, rng);
    Matrix g(inst.honest.rows(), n);
    g.leftCols(h) = inst.honest;
    g.rightCols(inst.byzantine) = byz;
    const AggregationInput input{g, &inst.server, inst.f, inst.c};
    const double err = gradient_estimation_error(boba_aggregate(input, params).aggregate, expected_mean);
    if (err > ev.worst_error) {
      ev.worst_error = err;
      ev.worst_attack = attack_kind_name(kind);
    }
    if (inst.byzantine == 0) {
      ev.worst_attack = "none";
      break;
    }
  }

  BoundInputs in;
  in.eps = std::sqrt(ev.variations.eps2);
  in.eps_server = std::sqrt(ev.variations.eps2_server);
  in.delta = std::sqrt(ev.variations.delta2);
  in.delta_server = std::sqrt(ev.variations.delta2_server);
  in.sigma = ev.assumption.sigma;
  in.n = n;
  in.f = inst.f;
  in.c = inst.c;
  in.p_min = p_min;
  in.beta = static_cast<double>(inst.byzantine) / n;
  in.honest_count = h;
  if (in.sigma > 0.0) {
    ev.bound = compute_boba_error_bound(in);
  } else {
    ev.bound.value = std::numeric_limits<double>::infinity();
  }
  return ev;
}

std::vector<CheckResult> verify_bounds(const VerifyOptions& o) {
  const int count = o.bound_instances;
  std::vector<BoundEvaluation> evals(static_cast<size_t>(count));
  std::vector<std::string> errors(static_cast<size_t>(count));
  parallel_for(count, o.threads, [&](int t) {
    try {
      evals[static_cast<size_t>(t)] =
          evaluate_bound_instance(make_bound_instance(derive_seed(o.seed, {0xB0D, static_cast<std::uint64_t>(t)})));
    } catch (const Error& e) {
      errors[static_cast<size_t>(t)] = e.what();
    }
  });

  const bool corrupt = o.corrupt == "error_bound";
  int holds = 0;
  int vacuous = 0;
  double tightest = 0.0;
  std::string first_failure;
  for (int t = 0; t < count; ++t) {
    const auto& ev = evals[static_cast<size_t>(t)];
    if (!errors[static_cast<size_t>(t)].empty()) {
      if (first_failure.empty()) first_failure = "instance " + std::to_string(t) + ": " + errors[static_cast<size_t>(t)];
      continue;
    }
    if (std::isinf(ev.bound.value)) ++vacuous;
    const double limit = corrupt ? 0.0 : ev.bound.value;
    if (ev.worst_error <= limit) {
      ++holds;
      if (std::isfinite(ev.bound.value) && ev.bound.value > 0) {
        tightest = std::max(tightest, ev.worst_error / ev.bound.value);
      }
    } else if (first_failure.empty()) {
      first_failure = "instance " + std::to_string(t) + " (" + ev.worst_attack + "): error " +
                      num(ev.worst_error) + " > bound " + num(limit);
    }
  }
  CheckResult r;
  r.name = "error_bound";
  r.passed = holds == count;
  r.detail = std::to_string(holds) + "/" + std::to_string(count) + " instances within the bound; " +
             "largest error/bound ratio " + num(tightest) + "; vacuous (sigma = 0) " + std::to_string(vacuous);
  if (!first_failure.empty()) r.detail += "; first failure: " + first_failure;
  return {r};
}

std::vector<CheckResult> run_verify_suite(const std::string& suite, const VerifyOptions& options) {
  if (suite == "lemmas") return verify_lemmas(options);
  if (suite == "fixtures") return verify_fixtures(options);
  if (suite == "bounds") return verify_bounds(options);
  if (suite == "all") {
    std::vector<CheckResult> all = verify_lemmas(options);
    for (auto& r : verify_fixtures(options)) all.push_back(std::move(r));
    for (auto& r : verify_bounds(options)) all.push_back(std::move(r));
    return all;
  }
  throw Error(ErrorCode::kConfig, "unknown verify suite '" + suite + "' (lemmas, fixtures, bounds, all)");
}

}  // namespace boba
