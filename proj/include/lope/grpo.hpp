#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lope/common.hpp"

namespace lope {

enum class Provenance { original, resampled };

// One sampled response with the log-probabilities it was sampled under.
struct Rollout {
  std::vector<int> tokens;
  double reward = 0.0;  // binary verifiable reward, {0,1}
  std::vector<double> old_logprobs;  // per token, sampling policy
  Provenance provenance = Provenance::original;
  bool perturbed_context = false;  // sampled under delta ⊕ p
  std::uint64_t delta_id = 0;      // identifies the perturbation, if any

  std::size_t length() const { return tokens.size(); }
  void check() const;  // structural invariants
};

struct Group {
  int question_id = 0;
  std::string prompt;
  std::vector<Rollout> rollouts;
  std::vector<double> advantages;  // empty until computed
  bool zero_variance = false;

  std::vector<double> rewards() const;
};

struct ShapingConfig {
  int G = 8;
  int G_prime = 24;
  double epsilon = 0.2;
  double beta = 0.0;  // KL weight; LoPE removes the term
  double gamma = 0.1;
  double temperature = 1.0;

  void validate() const;
};

struct AdvantageResult {
  std::vector<double> advantages;
  bool zero_variance = false;  // std(r) = 0; advantages forced to zero
};

// Group-mean normalization with population std. Zero variance yields an
// all-zero vector plus the flag instead of NaNs.
AdvantageResult group_advantage(std::span<const double> rewards);

// True iff every reward is exactly 0 — the resample trigger. All-correct
// groups also have vanishing advantages but do not trigger.
bool is_zero_advantage(std::span<const double> rewards);

// rho_t = exp(new_t - old_t), per token.
std::vector<double> importance_ratio(std::span<const double> new_logprobs,
                                     std::span<const double> old_logprobs);

// min(rho*A, clip(rho, 1-eps, 1+eps)*A)
double clipped_token_term(double rho, double advantage, double epsilon);

// Derivative gate of the clipped term w.r.t. the new log-probability:
// d(term)/d(new_lp) = gate * rho * A.
bool clip_gate_open(double rho, double advantage, double epsilon);

// beta * k3 estimator: beta * (exp(ref-pol) - (ref-pol) - 1). Returns 0
// when beta = 0.
double kl_penalty(double policy_logprob, double ref_logprob, double beta);

struct ObjectiveResult {
  double value = 0.0;
  // token_weights[i][t] is w such that grad J = sum w * grad log pi(o_t);
  // the 1/G and 1/|o_i| factors are folded in.
  std::vector<std::vector<double>> token_weights;
};

// Clipped surrogate: (1/G) sum_i (1/|o_i|) sum_t [clipped term - beta*KL].
// advantages must be set on the group. ref_logprobs may be null when
// beta = 0.
ObjectiveResult grpo_objective(
    const Group& group,
    const std::vector<std::vector<double>>& new_logprobs,
    const ShapingConfig& config,
    const std::vector<std::vector<double>>* ref_logprobs = nullptr);

// JSON-lines (de)serialization for harness replay and golden tests.
std::string group_to_json(const Group& group);
Group group_from_json(const std::string& line);

namespace detail {
struct RolloutTerm {
  double value = 0.0;               // (1/|o|) sum_t term_t
  std::vector<double> weights;      // d value / d new_lp_t, pre 1/G
};
RolloutTerm clipped_rollout_term(std::span<const double> new_logprobs,
                                 std::span<const double> old_logprobs,
                                 double advantage, double epsilon);
}  // namespace detail

}  // namespace lope
