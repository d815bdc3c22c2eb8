#include "boba/config.hpp"
#include "boba/fedsim.hpp"
#include "test_util.hpp"

using boba::AttackKind;
using boba::SimConfig;

namespace {

SimConfig desk(const std::string& agr, AttackKind attack, int byzantine, int rounds) {
  SimConfig c;
  c.schedule.rounds = rounds;
  c.aggregator.spec.name = agr;
  c.aggregator.reference = false;
  c.attack.spec.kind = attack;
  c.attack.byzantine = byzantine;
  c.seed = 1;
  return c;
}

double mean_sq_grad_norm(const boba::ExperimentResult& r) {
  double s = 0.0;
  for (const auto& rec : r.rounds) s += rec.grad_sq_norm / static_cast<double>(r.rounds.size());
  return s;
}

}  // namespace

TEST_SUITE("convergence") {
  TEST_CASE("desk training loss under Average strictly decreases over the first 20 rounds") {
    const auto r = boba::run_experiment(desk("average", AttackKind::kNone, 0, 20));
    REQUIRE(r.rounds.size() == 20);
    for (size_t t = 1; t < r.rounds.size(); ++t) {
      CHECK_MESSAGE(r.rounds[t].train_loss < r.rounds[t - 1].train_loss, "round " << t);
    }
  }

  TEST_CASE("BOBA keeps the honest gradient norm near the clean run under every attack") {
    const double clean = mean_sq_grad_norm(boba::run_experiment(desk("average", AttackKind::kNone, 0, 200)));
    REQUIRE(clean > 0.0);
    for (auto kind : {AttackKind::kGauss, AttackKind::kIpm, AttackKind::kLie, AttackKind::kMimic,
                      AttackKind::kMinMax, AttackKind::kMinSum}) {
      const double attacked = mean_sq_grad_norm(boba::run_experiment(desk("boba", kind, 3, 200)));
      CHECK_MESSAGE(attacked <= 5.0 * clean, boba::attack_kind_name(kind) << ": " << attacked << " vs " << clean);
    }
    const auto broken = boba::run_experiment(desk("average", AttackKind::kIpm, 3, 200));
    const bool diverged = mean_sq_grad_norm(broken) >= 10.0 * clean;
    const bool collapsed = broken.final_accuracy.accuracy <= 2.0 / 10.0;
    CHECK_MESSAGE((diverged || collapsed), "Average under IPM neither diverged nor collapsed");
  }
}
