#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lope/engine.hpp"
#include "lope/grpo.hpp"

namespace lope {

// First-order Markov softmax sequence policy. Context = previous token (or
// a start slot); the perturbed context adds context_shift to every logit
// row, the toy analogue of prepending task-irrelevant text. Sequences have
// fixed length max_len so exact enumeration is a plain V^L sum.
struct PolicyParams {
  int vocab = 2;
  int max_len = 1;
  std::vector<std::vector<double>> logits;  // (vocab+1) x vocab; last row = start
  std::vector<double> context_shift;        // vocab entries

  static PolicyParams zeros(int vocab, int max_len);
  void validate() const;

  int param_count() const { return (vocab + 2) * vocab; }
  std::vector<double> to_flat() const;
  void from_flat(std::span<const double> flat);

  std::string to_json() const;
  static PolicyParams from_json(const std::string& text);
};

// Synthetic verifiable reward: 1 iff some accepting member is a prefix of
// the rollout (full-length members are exact matches).
struct QuestionSpec {
  int id = 0;
  std::vector<std::vector<int>> accepting;

  double reward(std::span<const int> tokens) const;
  std::string to_json() const;
  static QuestionSpec from_json(const std::string& text);
};

// Distribution over the next token given the previous one (prev = -1 for
// the start position). Temperature divides the stored logits before the
// context shift is added.
std::vector<double> next_token_probs(const PolicyParams& params, int prev,
                                     bool perturbed, double temperature = 1.0);

// Per-token log-probabilities of seq; sums to the sequence log-probability.
std::vector<double> logprob_seq(const PolicyParams& params,
                                std::span<const int> seq, bool perturbed,
                                double temperature = 1.0);

double total_logprob(const PolicyParams& params, std::span<const int> seq,
                     bool perturbed, double temperature = 1.0);

struct SampledSeq {
  std::vector<int> tokens;
  std::vector<double> logprobs;  // of the sampling distribution
};

// Ancestral sample of exactly max_len tokens.
SampledSeq sample_seq(const PolicyParams& params, Rng& rng, double temperature,
                      bool perturbed);

// Adds sum_t weights[t] * grad log pi(o_t | ctx_t) to grad (flat layout).
void accumulate_weighted_grad(const PolicyParams& params,
                              std::span<const int> seq,
                              std::span<const double> weights, bool perturbed,
                              std::span<double> grad,
                              double temperature = 1.0);

// Gradient of the whole-sequence log-probability (all weights 1).
std::vector<double> grad_logprob(const PolicyParams& params,
                                 std::span<const int> seq, bool perturbed,
                                 double temperature = 1.0);

struct ObjectiveGrad {
  double value = 0.0;
  std::vector<double> grad;  // flat, aligned with PolicyParams::to_flat
};

// Analytic gradient of the clipped surrogate on the toy policy. new logprobs
// are evaluated under the naive context at temperature 1.
ObjectiveGrad grpo_objective_grad(
    const Group& group, const PolicyParams& params, const ShapingConfig& config,
    const PolicyParams* ref_params = nullptr);

// Analytic gradient of the mixed objective; includes the f'(rho)*rho chain
// factor on shaped terms and the clip gating on original terms.
ObjectiveGrad lope_objective_grad(const RegroupedGroup& rg,
                                  const PolicyParams& params,
                                  const ShapingConfig& config);

// Evaluates the objective alone at the given parameters (used by the
// finite-difference oracles).
double grpo_objective_value(const Group& group, const PolicyParams& params,
                            const ShapingConfig& config,
                            const PolicyParams* ref_params = nullptr);
double lope_objective_value(const RegroupedGroup& rg,
                            const PolicyParams& params,
                            const ShapingConfig& config);

// Visits every length-max_len sequence.
void for_each_sequence(int vocab, int len,
                       const std::function<void(std::span<const int>)>& fn);

// Exact expectation of a vector-valued functional under the policy's
// sequence distribution (naive or perturbed context). Throws when V^L
// exceeds the budget.
std::vector<double> enumerate_expectation(
    const PolicyParams& params, bool perturbed_sampling, double temperature,
    std::size_t value_dim,
    const std::function<void(std::span<const int>, std::span<double>)>& fn,
    std::size_t budget = 1000000);

// Probability mass of the accepting set under the policy.
double enumerate_success_probability(const PolicyParams& params,
                                     const QuestionSpec& question,
                                     bool perturbed, double temperature = 1.0);

// Deterministic context shift derived from perturbation text; the toy
// stand-in for how a prompt prefix moves the output distribution.
std::vector<double> context_shift_for(const std::string& delta_text, int vocab,
                                      double magnitude);

}  // namespace lope
