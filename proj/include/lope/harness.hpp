#pragma once

#include <string>
#include <vector>

#include "lope/engine.hpp"
#include "lope/grpo.hpp"
#include "lope/perturb.hpp"
#include "lope/toy_policy.hpp"
#include "lope/word_pool.hpp"

namespace lope {

enum class Strategy {
  grpo,
  naive_resample,
  naive_resample_hot,
  lope,
  lope_shaped
};

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct ExperimentConfig {
  ShapingConfig shaping;
  PerturbationSpec perturbation;  // seed field unused; fresh seed per draw
  std::vector<QuestionSpec> bank;
  PolicyParams init_params;
  int steps = 100;
  double learning_rate = 0.1;
  int batch = 4;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::grpo;
  double shift_magnitude = 3.0;   // perturbation -> context shift strength
  double hot_temperature = 1.2;   // naive_resample_hot resampling only
  double eval_temperature = 1.0;

  void validate() const;
  std::string to_json() const;
  // Strict parse: unknown keys are rejected.
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
};

struct MetricsRecord {
  int step = 0;
  double question_pass_rate = 0.0;  // pass@G' over triggered questions
  double response_accuracy = 0.0;   // mean@G' over triggered questions
  double zero_advantage_fraction = 0.0;
  double skipped_fraction = 0.0;  // c = 0 after resampling
  double objective = 0.0;
  double grad_norm = 0.0;
  int triggered = 0;
  int retriggered = 0;

  std::string to_json() const;
  static MetricsRecord from_json(const std::string& line);
  static std::string csv_header();
  std::string to_csv() const;
};

struct SimState {
  PolicyParams params;
  int step = 0;
  std::vector<int> last_triggered;  // question ids, for re-trigger counts
  // every sampled token in order; rollout-stream identity checks read this
  std::vector<int> token_log;
  long long rollouts_sampled = 0;
};

SimState init_state(const ExperimentConfig& config);

// One full pipeline step: rollout, trigger, (perturbed) resample, regroup,
// objective, single gradient-ascent update.
MetricsRecord run_step(SimState& state, const ExperimentConfig& config,
                       Rng& rng);

struct EvalQuestion {
  int question_id = 0;
  bool pass = false;
  double mean = 0.0;
};

struct EvalResult {
  std::vector<EvalQuestion> per_question;
  double pass_rate = 0.0;
  double mean_accuracy = 0.0;
};

EvalResult evaluate(const PolicyParams& params,
                    const std::vector<QuestionSpec>& bank, int G_eval,
                    double temperature, Rng& rng);

struct CompareTrial {
  int trial = 0;
  double a_pass = 0.0, b_pass = 0.0;
  double a_accuracy = 0.0, b_accuracy = 0.0;
};

struct CompareReport {
  std::vector<CompareTrial> trials;
  std::vector<MetricsRecord> a_steps, b_steps;  // steps x trials rows
  int a_wins = 0, b_wins = 0, ties = 0;
  double sign_test_p = 1.0;  // one-sided, A > B on question pass rate
};

// Seed-matched paired runs; configs must share bank, budgets, and steps.
CompareReport compare_strategies(const ExperimentConfig& a,
                                 const ExperimentConfig& b, int trials);

// One-sided exact sign test: P(Bin(n, 1/2) >= wins), ties dropped.
double sign_test_p_value(int wins, int losses);

// The documented synthetic bank: accepting sequences avoid the dominant
// token of the collapsed policy, so they sit in a low-probability region
// the naive policy rarely reaches while random context shifts can.
std::vector<QuestionSpec> make_exploration_bank(int questions, int vocab,
                                                int max_len,
                                                std::uint64_t seed);

// Every context strongly prefers token 0; the "local reasoning basin".
PolicyParams make_collapsed_policy(int vocab, int max_len, double bias);

}  // namespace lope
