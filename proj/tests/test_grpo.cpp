#include "doctest.h"

#include <cmath>
#include <random>

#include "lope/grpo.hpp"

using namespace lope;

namespace {

Rollout make_rollout(std::vector<int> tokens, double reward,
                     std::vector<double> old_lp) {
  Rollout r;
  r.tokens = std::move(tokens);
  r.reward = reward;
  r.old_logprobs = std::move(old_lp);
  return r;
}

}  // namespace

TEST_CASE("group advantage matches hand-normalized values") {
  // rewards [1,0,0,0]: mean 0.25, pop std sqrt(3)/4
  const auto res = group_advantage(std::vector<double>{1, 0, 0, 0});
  CHECK_FALSE(res.zero_variance);
  CHECK(res.advantages[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  for (int i = 1; i < 4; ++i)
    CHECK(res.advantages[i] ==
          doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(res.advantages[0] == doctest::Approx(1.732051).epsilon(1e-6));
  CHECK(res.advantages[1] == doctest::Approx(-0.577350).epsilon(1e-6));

  // advantages of any group are zero-mean with unit population variance
  const auto res2 = group_advantage(std::vector<double>{1, 1, 0, 1, 0, 0, 0, 1});
  double mean = 0.0, var = 0.0;
  for (double a : res2.advantages) mean += a;
  mean /= 8.0;
  for (double a : res2.advantages) var += (a - mean) * (a - mean);
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(var / 8.0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("degenerate reward groups flag zero variance") {
  for (const auto rewards :
       {std::vector<double>{0, 0, 0, 0}, std::vector<double>{1, 1, 1}}) {
    const auto res = group_advantage(rewards);
    CHECK(res.zero_variance);
    for (double a : res.advantages) CHECK(a == 0.0);
  }
}

TEST_CASE("only the all-fail group triggers the zero-advantage path") {
  CHECK(is_zero_advantage(std::vector<double>{0, 0, 0, 0}));
  CHECK_FALSE(is_zero_advantage(std::vector<double>{1, 1, 1, 1}));
  CHECK_FALSE(is_zero_advantage(std::vector<double>{0, 0, 1, 0}));
}

TEST_CASE("importance ratio exponentiates the logprob gap") {
  const auto rho = importance_ratio(std::vector<double>{-1.0, -2.0, -0.5},
                                    std::vector<double>{-1.0, -1.0, -1.5});
  CHECK(rho[0] == doctest::Approx(1.0));
  CHECK(rho[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(rho[2] == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(importance_ratio(std::vector<double>{-1.0},
                                   std::vector<double>{-1.0, -2.0}),
                  StructuralError);
}

TEST_CASE("clipped term takes the pessimistic branch") {
  // positive advantage, ratio above the band: clip to 1+eps
  CHECK(clipped_token_term(1.4, 1.0, 0.2) == doctest::Approx(1.2));
  // negative advantage, ratio below the band: clip to 1-eps
  CHECK(clipped_token_term(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  // interior ratios pass through
  CHECK(clipped_token_term(1.1, 2.0, 0.2) == doctest::Approx(2.2));
  CHECK(clipped_token_term(0.9, -2.0, 0.2) == doctest::Approx(-1.8));
  // the favorable side is never clipped: min picks the unclipped branch
  CHECK(clipped_token_term(1.4, -1.0, 0.2) == doctest::Approx(-1.4));
  CHECK(clipped_token_term(0.5, 1.0, 0.2) == doctest::Approx(0.5));
}

TEST_CASE("clip gate closes exactly where the term saturates") {
  CHECK_FALSE(clip_gate_open(1.3, 1.0, 0.2));
  CHECK_FALSE(clip_gate_open(0.7, -1.0, 0.2));
  CHECK(clip_gate_open(1.3, -1.0, 0.2));
  CHECK(clip_gate_open(0.7, 1.0, 0.2));
  CHECK(clip_gate_open(1.0, 1.0, 0.2));
  CHECK(clip_gate_open(1.0, -1.0, 0.2));
}

TEST_CASE("clipped term is bounded by the unclipped surrogate") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u_rho(0.05, 3.0);
  std::uniform_real_distribution<double> u_adv(-2.0, 2.0);
  for (int i = 0; i < 10000; ++i) {
    const double rho = u_rho(rng);
    const double adv = u_adv(rng);
    const double term = clipped_token_term(rho, adv, 0.2);
    CHECK(term <= rho * adv + 1e-12);
    // term equals the unclipped surrogate whenever the gate is open
    if (clip_gate_open(rho, adv, 0.2))
      CHECK(term == doctest::Approx(rho * adv).epsilon(1e-12));
  }
}

TEST_CASE("kl penalty uses the k3 estimator") {
  // ref - pol = 0.5: exp(0.5) - 0.5 - 1 = 0.148721...
  CHECK(kl_penalty(-1.5, -1.0, 1.0) ==
        doctest::Approx(std::exp(0.5) - 1.5).epsilon(1e-12));
  // ref - pol = -0.5: exp(-0.5) + 0.5 - 1 = 0.106531
  CHECK(kl_penalty(-1.0, -1.5, 1.0) ==
        doctest::Approx(std::exp(-0.5) - 0.5).epsilon(1e-12));
  // k3 is nonnegative and zero only at agreement
  CHECK(kl_penalty(-1.0, -1.0, 1.0) == 0.0);
  CHECK(kl_penalty(-3.0, -1.0, 1.0) > 0.0);
  // beta = 0 disables the term entirely
  CHECK(kl_penalty(-3.0, -1.0, 0.0) == 0.0);
  // beta scales linearly
  CHECK(kl_penalty(-1.5, -1.0, 2.0) ==
        doctest::Approx(2.0 * kl_penalty(-1.5, -1.0, 1.0)).epsilon(1e-15));
}

TEST_CASE("on-policy objective collapses to the mean advantage") {
  // new == old means rho = 1 everywhere, so J = (1/G) sum A_i
  Group g;
  g.rollouts = {make_rollout({0, 1}, 1.0, {-0.3, -0.7}),
                make_rollout({1}, 0.0, {-0.2}),
                make_rollout({0, 0, 1}, 0.0, {-0.1, -0.4, -0.9}),
                make_rollout({2}, 1.0, {-1.1})};
  const auto adv = group_advantage(g.rewards());
  g.advantages = adv.advantages;

  std::vector<std::vector<double>> new_lp;
  for (const auto& r : g.rollouts) new_lp.push_back(r.old_logprobs);

  ShapingConfig cfg;
  cfg.G = 4;
  const auto res = grpo_objective(g, new_lp, cfg);
  double mean_adv = 0.0;
  for (double a : g.advantages) mean_adv += a;
  mean_adv /= 4.0;
  CHECK(res.value == doctest::Approx(mean_adv).epsilon(1e-12));

  // on-policy token weight is A_i / (G |o_i|)
  for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
    for (double w : res.token_weights[i])
      CHECK(w == doctest::Approx(g.advantages[i] /
                                 (4.0 * g.rollouts[i].tokens.size()))
                     .epsilon(1e-12));
  }
}

TEST_CASE("objective matches a hand-computed off-policy case") {
  Group g;
  g.rollouts = {make_rollout({0}, 1.0, {-1.0}),
                make_rollout({1}, 0.0, {-1.0})};
  g.advantages = {1.0, -1.0};
  // rho = e^{0.5} ~ 1.6487, A > 0: clipped to 1.2 * 1.
  // rho = e^{-0.5} ~ 0.6065, A < 0: min(-0.6065, -0.8) = -0.8, also clipped.
  const std::vector<std::vector<double>> new_lp{{-0.5}, {-1.5}};
  ShapingConfig cfg;
  cfg.G = 2;
  const auto res = grpo_objective(g, new_lp, cfg);
  CHECK(res.value == doctest::Approx(0.5 * (1.2 - 0.8)).epsilon(1e-12));
  // both rollouts saturated: gradient gates closed on each side of the band
  CHECK(res.token_weights[0][0] == 0.0);
  CHECK(res.token_weights[1][0] == 0.0);
}

TEST_CASE("zero advantages yield an exactly zero objective and weights") {
  Group g;
  for (int i = 0; i < 4; ++i)
    g.rollouts.push_back(make_rollout({i, i}, 0.0, {-0.5, -0.5}));
  const auto adv = group_advantage(g.rewards());
  CHECK(adv.zero_variance);
  g.advantages = adv.advantages;
  std::vector<std::vector<double>> new_lp(4, std::vector<double>{-0.4, -0.6});
  ShapingConfig cfg;
  cfg.G = 4;
  const auto res = grpo_objective(g, new_lp, cfg);
  CHECK(res.value == 0.0);
  for (const auto& row : res.token_weights)
    for (double w : row) CHECK(w == 0.0);
}

TEST_CASE("kl penalty subtracts from the objective when beta is positive") {
  Group g;
  g.rollouts = {make_rollout({0}, 1.0, {-1.0}),
                make_rollout({1}, 0.0, {-1.0})};
  g.advantages = group_advantage(g.rewards()).advantages;
  std::vector<std::vector<double>> new_lp{{-1.0}, {-1.0}};
  std::vector<std::vector<double>> ref_lp{{-1.3}, {-0.8}};

  ShapingConfig cfg;
  cfg.G = 2;
  const auto base = grpo_objective(g, new_lp, cfg);
  cfg.beta = 0.04;
  const auto pen = grpo_objective(g, new_lp, cfg, &ref_lp);
  const double kl = 0.5 * (kl_penalty(-1.0, -1.3, 0.04) +
                           kl_penalty(-1.0, -0.8, 0.04));
  CHECK(pen.value == doctest::Approx(base.value - kl).epsilon(1e-12));
  CHECK(base.value > pen.value);
}

TEST_CASE("rollout structural checks reject malformed inputs") {
  Rollout r = make_rollout({0, 1}, 1.0, {-0.1, -0.2});
  CHECK_NOTHROW(r.check());
  r.reward = 0.5;
  CHECK_THROWS_AS(r.check(), StructuralError);
  r.reward = 1.0;
  r.old_logprobs.pop_back();
  CHECK_THROWS_AS(r.check(), StructuralError);
  r.old_logprobs = {-0.1, -0.2};
  r.provenance = Provenance::resampled;
  r.perturbed_context = false;
  CHECK_THROWS_AS(r.check(), StructuralError);
  r.perturbed_context = true;
  CHECK_NOTHROW(r.check());
}

TEST_CASE("config validation enforces parameter ranges") {
  ShapingConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.G = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ShapingConfig{};
  cfg.epsilon = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ShapingConfig{};
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ShapingConfig{};
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("group json round-trips every field") {
  Group g;
  g.question_id = 7;
  g.prompt = "2+2=";
  Rollout a = make_rollout({3, 1, 4}, 1.0, {-0.25, -1.5, -0.125});
  Rollout b = make_rollout({2, 7}, 0.0, {-0.5, -0.75});
  b.provenance = Provenance::resampled;
  b.perturbed_context = true;
  b.delta_id = 12345;
  g.rollouts = {a, b};
  g.advantages = {1.0, -1.0};
  g.zero_variance = false;

  const Group back = group_from_json(group_to_json(g));
  CHECK(back.question_id == g.question_id);
  CHECK(back.prompt == g.prompt);
  REQUIRE(back.rollouts.size() == 2);
  CHECK(back.rollouts[0].tokens == a.tokens);
  CHECK(back.rollouts[0].old_logprobs == a.old_logprobs);
  CHECK(back.rollouts[1].provenance == Provenance::resampled);
  CHECK(back.rollouts[1].perturbed_context);
  CHECK(back.rollouts[1].delta_id == 12345);
  CHECK(back.advantages == g.advantages);
  CHECK_THROWS_AS(group_from_json("not json"), ConfigError);
}
