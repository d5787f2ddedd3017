#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lope/grpo.hpp"
#include "lope/perturb.hpp"

namespace lope {

// G' responses resampled under a perturbed prompt for one question.
struct ResamplePool {
  int question_id = 0;
  Perturbation delta;
  std::vector<Rollout> rollouts;

  int correct_count() const;
  void check(int G_prime) const;
};

// The mixed batch used for the policy update: N_s resampled-correct entries
// first, then G - N_s original failures. r_all keeps every reward (original
// first, then resampled, stable order) for advantage shaping.
struct RegroupedGroup {
  int question_id = 0;
  std::string prompt;  // naive prompt
  std::vector<Rollout> selected;
  int N_s = 0;
  std::vector<double> r_all;
  std::uint64_t delta_id = 0;
};

// True iff all G rewards are 0. All-correct groups are skipped upstream by
// the zero-variance flag, not resampled.
bool trigger_resample(const Group& group);

// Replaces N_s = min(c, G-1) uniformly chosen original failures with
// uniformly chosen correct resampled rollouts. Returns nullopt (skip) when
// the resample also fully failed (c = 0).
std::optional<RegroupedGroup> regroup(const Group& group,
                                      const ResamplePool& pool, Rng& rng);

// Re-pairs a resampled response with the naive prompt. Tokens and sampling
// log-probabilities are untouched; only the training context changes, which
// is what makes the importance ratios off-policy.
Rollout pseudo_rollout(const Rollout& o_prime, const std::string& naive_prompt);

// Same arithmetic as importance_ratio; the asymmetry lives in which
// contexts the two logprob vectors were evaluated under.
std::vector<double> lope_is_ratio(
    std::span<const double> new_logprob_naive_ctx,
    std::span<const double> old_logprob_perturbed_ctx);

// f(rho) = rho / (rho + gamma), monotone, range [0, 1).
double policy_shape(double rho, double gamma);

// f'(rho) = gamma / (rho + gamma)^2
double policy_shape_deriv(double rho, double gamma);

// A_hat_i = (r_i - mean(r_all)) / std(r_all), population std over all
// G + G' rewards. nullopt signals skip (zero variance).
std::optional<double> shaped_advantage(std::span<const double> r_all,
                                       double reward_i);

// Mixed objective: clipped surrogate for retained originals, unclipped
// f(rho) * A_hat for resampled entries, no KL anywhere. new_logprobs align
// with rg.selected and are evaluated under the naive training context.
ObjectiveResult lope_objective(
    const RegroupedGroup& rg,
    const std::vector<std::vector<double>>& new_logprobs,
    const ShapingConfig& config);

// Per-selected-entry shaped advantages; entries beyond N_s (the retained
// failures) use the same r_all statistics.
std::vector<double> shaped_advantages_for(const RegroupedGroup& rg);

std::string regrouped_to_json(const RegroupedGroup& rg);
RegroupedGroup regrouped_from_json(const std::string& line);

}  // namespace lope
