#include "doctest.h"

#include <cmath>
#include <random>

#include "lope/engine.hpp"

using namespace lope;

namespace {

Rollout make_rollout(double reward, Provenance prov, int token = 0) {
  Rollout r;
  r.tokens = {token};
  r.reward = reward;
  r.old_logprobs = {-1.0};
  r.provenance = prov;
  r.perturbed_context = prov == Provenance::resampled;
  r.delta_id = prov == Provenance::resampled ? 99 : 0;
  return r;
}

Group all_fail_group(int G, int question_id = 0) {
  Group g;
  g.question_id = question_id;
  g.prompt = "q";
  for (int i = 0; i < G; ++i)
    g.rollouts.push_back(make_rollout(0.0, Provenance::original, i));
  return g;
}

ResamplePool pool_with_correct(int G_prime, int c, int question_id = 0) {
  ResamplePool p;
  p.question_id = question_id;
  p.delta.text = "filler";
  p.delta.seed_used = 99;
  for (int j = 0; j < G_prime; ++j)
    p.rollouts.push_back(
        make_rollout(j < c ? 1.0 : 0.0, Provenance::resampled, j));
  return p;
}

}  // namespace

TEST_CASE("resample pool counts and validates") {
  const auto p = pool_with_correct(24, 5);
  CHECK(p.correct_count() == 5);
  CHECK_NOTHROW(p.check(24));
  CHECK_THROWS_AS(p.check(23), StructuralError);

  auto bad = p;
  bad.rollouts[0].provenance = Provenance::original;
  bad.rollouts[0].perturbed_context = false;
  CHECK_THROWS_AS(bad.check(24), StructuralError);
}

TEST_CASE("resampling triggers only on the all-fail group") {
  CHECK(trigger_resample(all_fail_group(8)));
  Group g = all_fail_group(8);
  g.rollouts[3].reward = 1.0;
  CHECK_FALSE(trigger_resample(g));
  for (auto& r : g.rollouts) r.reward = 1.0;
  CHECK_FALSE(trigger_resample(g));
}

TEST_CASE("regroup keeps group size and puts resampled entries first") {
  Rng rng(17);
  const Group g = all_fail_group(8);
  const auto p = pool_with_correct(24, 3);
  const auto rg = regroup(g, p, rng);
  REQUIRE(rg.has_value());
  CHECK(rg->N_s == 3);
  CHECK(rg->selected.size() == 8);
  for (int i = 0; i < 3; ++i) {
    CHECK(rg->selected[i].provenance == Provenance::resampled);
    CHECK(rg->selected[i].reward == 1.0);
    CHECK(rg->selected[i].perturbed_context);
  }
  for (int i = 3; i < 8; ++i) {
    CHECK(rg->selected[i].provenance == Provenance::original);
    CHECK(rg->selected[i].reward == 0.0);
  }
  CHECK(rg->delta_id == 99);
  // r_all: original rewards first, then the full resample pool
  REQUIRE(rg->r_all.size() == 32);
  for (int i = 0; i < 8; ++i) CHECK(rg->r_all[i] == 0.0);
  double pool_sum = 0.0;
  for (int i = 8; i < 32; ++i) pool_sum += rg->r_all[i];
  CHECK(pool_sum == 3.0);
}

TEST_CASE("regroup caps replacements to retain at least one failure") {
  Rng rng(2);
  const auto rg = regroup(all_fail_group(8), pool_with_correct(24, 10), rng);
  REQUIRE(rg.has_value());
  CHECK(rg->N_s == 7);
  int failures = 0;
  for (const auto& r : rg->selected) failures += r.reward == 0.0 ? 1 : 0;
  CHECK(failures == 1);
}

TEST_CASE("regroup skips when the resample also fully fails") {
  Rng rng(3);
  CHECK_FALSE(regroup(all_fail_group(8), pool_with_correct(24, 0), rng)
                  .has_value());
}

TEST_CASE("regroup rejects structural mistakes") {
  Rng rng(4);
  Group g = all_fail_group(8);
  g.rollouts[0].reward = 1.0;  // not a trigger
  CHECK_THROWS_AS(regroup(g, pool_with_correct(24, 3), rng), StructuralError);
  CHECK_THROWS_AS(regroup(all_fail_group(8, 1), pool_with_correct(24, 3, 2),
                          rng),
                  StructuralError);
}

TEST_CASE("regroup invariants hold over random shapes") {
  std::mt19937_64 seeds(99);
  for (int trial = 0; trial < 1000; ++trial) {
    std::uniform_int_distribution<int> ug(2, 12), ugp(1, 30);
    const int G = ug(seeds), Gp = ugp(seeds);
    std::uniform_int_distribution<int> uc(0, Gp);
    const int c = uc(seeds);
    Rng rng(seeds());
    const auto rg = regroup(all_fail_group(G), pool_with_correct(Gp, c), rng);
    if (c == 0) {
      CHECK_FALSE(rg.has_value());
      continue;
    }
    REQUIRE(rg.has_value());
    CHECK(rg->N_s == std::min(c, G - 1));
    CHECK(static_cast<int>(rg->selected.size()) == G);
    CHECK(static_cast<int>(rg->r_all.size()) == G + Gp);
    int kept_failures = 0, correct = 0;
    for (const auto& r : rg->selected) {
      if (r.reward == 0.0) ++kept_failures;
      if (r.reward == 1.0) {
        ++correct;
        CHECK(r.provenance == Provenance::resampled);
      }
    }
    CHECK(kept_failures >= 1);
    CHECK(correct == rg->N_s);
  }
}

TEST_CASE("pseudo rollout re-pairs without touching the payload") {
  Rollout o = make_rollout(1.0, Provenance::resampled, 5);
  o.old_logprobs = {-0.25};
  const Rollout ps = pseudo_rollout(o, "naive prompt");
  CHECK(ps.tokens == o.tokens);
  CHECK(ps.reward == o.reward);
  CHECK(ps.old_logprobs == o.old_logprobs);
  CHECK(ps.perturbed_context);
  CHECK(ps.provenance == Provenance::resampled);
  CHECK_THROWS_AS(pseudo_rollout(make_rollout(1.0, Provenance::original), "p"),
                  StructuralError);
}

TEST_CASE("policy shaping matches the closed form") {
  CHECK(policy_shape(1.0, 0.1) == doctest::Approx(1.0 / 1.1).epsilon(1e-12));
  CHECK(policy_shape(1.0, 0.1) == doctest::Approx(0.909091).epsilon(1e-6));
  CHECK(policy_shape(0.0, 0.1) == 0.0);
  // monotone and bounded in [0, 1)
  double prev = -1.0;
  for (double rho = 0.0; rho <= 50.0; rho += 0.25) {
    const double f = policy_shape(rho, 0.1);
    CHECK(f > prev);
    CHECK(f >= 0.0);
    CHECK(f < 1.0);
    prev = f;
  }
}

TEST_CASE("shaping derivative agrees with finite differences") {
  const double h = 1e-6;
  for (double rho : {0.05, 0.3, 1.0, 2.5, 8.0}) {
    const double fd =
        (policy_shape(rho + h, 0.1) - policy_shape(rho - h, 0.1)) / (2 * h);
    CHECK(policy_shape_deriv(rho, 0.1) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("shaped advantage reproduces the closed-form magnitudes") {
  // all-fail G=8 plus c correct among G'=24: A_hat+ = sqrt((32-c)/c)
  for (int c : {1, 3, 7, 24}) {
    std::vector<double> r_all(32, 0.0);
    for (int i = 8; i < 8 + c; ++i) r_all[i] = 1.0;
    const auto plus = shaped_advantage(r_all, 1.0);
    const auto minus = shaped_advantage(r_all, 0.0);
    REQUIRE(plus.has_value());
    REQUIRE(minus.has_value());
    CHECK(*plus == doctest::Approx(std::sqrt((32.0 - c) / c)).epsilon(1e-12));
    CHECK(*minus ==
          doctest::Approx(-std::sqrt(c / (32.0 - c))).epsilon(1e-12));
  }
  // c = 1 gives sqrt(31)
  std::vector<double> r1(32, 0.0);
  r1[8] = 1.0;
  CHECK(*shaped_advantage(r1, 1.0) ==
        doctest::Approx(std::sqrt(31.0)).epsilon(1e-12));
  CHECK_FALSE(shaped_advantage(std::vector<double>(32, 0.0), 0.0).has_value());
  CHECK_FALSE(shaped_advantage(std::vector<double>(32, 1.0), 1.0).has_value());
}

TEST_CASE("lope objective with no resampled entries equals grpo exactly") {
  // mixed-reward selection, r_all restricted to the selected rewards
  Group g;
  g.prompt = "q";
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> lp(-2.0, -0.1);
  std::vector<std::vector<double>> new_lp;
  for (int i = 0; i < 8; ++i) {
    Rollout r;
    r.tokens = {i % 3, (i + 1) % 3};
    r.reward = i < 3 ? 1.0 : 0.0;
    r.old_logprobs = {lp(rng), lp(rng)};
    g.rollouts.push_back(r);
    new_lp.push_back({lp(rng), lp(rng)});
  }
  const auto adv = group_advantage(g.rewards());
  g.advantages = adv.advantages;

  RegroupedGroup rg;
  rg.prompt = g.prompt;
  rg.selected = g.rollouts;
  rg.N_s = 0;
  rg.r_all = g.rewards();

  ShapingConfig cfg;
  const auto a = grpo_objective(g, new_lp, cfg);
  const auto b = lope_objective(rg, new_lp, cfg);
  CHECK(a.value == b.value);  // bit-for-bit, not approximately
  REQUIRE(a.token_weights.size() == b.token_weights.size());
  for (std::size_t i = 0; i < a.token_weights.size(); ++i)
    for (std::size_t t = 0; t < a.token_weights[i].size(); ++t)
      CHECK(a.token_weights[i][t] == b.token_weights[i][t]);
}

TEST_CASE("lope objective matches a hand-computed mixed case") {
  // G = 2 originals both failed, G' = 1 resample succeeded: N_s = 1,
  // r_all = {0, 0, 1}, A_hat+ = sqrt(2), A_hat- = -1/sqrt(2).
  RegroupedGroup rg;
  rg.prompt = "q";
  rg.N_s = 1;
  rg.r_all = {0.0, 0.0, 1.0};
  rg.selected = {make_rollout(1.0, Provenance::resampled),
                 make_rollout(0.0, Provenance::original)};
  const std::vector<std::vector<double>> new_lp{{-1.0}, {-1.0}};  // rho = 1

  ShapingConfig cfg;
  cfg.G = 2;
  const auto res = lope_objective(rg, new_lp, cfg);
  const double a_plus = std::sqrt(2.0);
  const double a_minus = -1.0 / std::sqrt(2.0);
  const double expect =
      0.5 * (policy_shape(1.0, cfg.gamma) * a_plus + a_minus);
  CHECK(res.value == doctest::Approx(expect).epsilon(1e-12));
  // resampled weight: f'(1) * 1 * A_hat+ / (G * |o|)
  CHECK(res.token_weights[0][0] ==
        doctest::Approx(policy_shape_deriv(1.0, cfg.gamma) * a_plus / 2.0)
            .epsilon(1e-12));
  // retained failure at rho = 1 is inside the band: A_hat- / (G * |o|)
  CHECK(res.token_weights[1][0] ==
        doctest::Approx(a_minus / 2.0).epsilon(1e-12));
}

TEST_CASE("lope objective validates alignment") {
  RegroupedGroup rg;
  rg.N_s = 0;
  rg.r_all = {0.0, 1.0};
  rg.selected = {make_rollout(0.0, Provenance::original),
                 make_rollout(1.0, Provenance::original)};
  ShapingConfig cfg;
  CHECK_THROWS_AS(lope_objective(rg, {{-1.0}}, cfg), StructuralError);
  CHECK_THROWS_AS(lope_objective(rg, {{-1.0, -2.0}, {-1.0}}, cfg),
                  StructuralError);
}

TEST_CASE("regrouped json round-trips") {
  Rng rng(9);
  const auto rg =
      regroup(all_fail_group(8, 4), pool_with_correct(24, 5, 4), rng);
  REQUIRE(rg.has_value());
  const RegroupedGroup back = regrouped_from_json(regrouped_to_json(*rg));
  CHECK(back.question_id == rg->question_id);
  CHECK(back.prompt == rg->prompt);
  CHECK(back.N_s == rg->N_s);
  CHECK(back.r_all == rg->r_all);
  CHECK(back.delta_id == rg->delta_id);
  REQUIRE(back.selected.size() == rg->selected.size());
  for (std::size_t i = 0; i < back.selected.size(); ++i) {
    CHECK(back.selected[i].tokens == rg->selected[i].tokens);
    CHECK(back.selected[i].old_logprobs == rg->selected[i].old_logprobs);
    CHECK(back.selected[i].provenance == rg->selected[i].provenance);
  }
  CHECK_THROWS_AS(regrouped_from_json("{"), ConfigError);
}
