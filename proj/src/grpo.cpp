#include "lope/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace lope {

void Rollout::check() const {
  if (old_logprobs.size() != tokens.size())
    throw StructuralError("rollout: |old_logprobs| != |tokens|");
  if (reward != 0.0 && reward != 1.0)
    throw StructuralError("rollout: reward must be binary");
  if (provenance == Provenance::resampled && !perturbed_context)
    throw StructuralError("rollout: resampled implies perturbed context");
}

std::vector<double> Group::rewards() const {
  std::vector<double> r;
  r.reserve(rollouts.size());
  for (const auto& ro : rollouts) r.push_back(ro.reward);
  return r;
}

void ShapingConfig::validate() const {
  if (G < 2) throw ConfigError("config: G must be >= 2");
  if (G_prime < 1) throw ConfigError("config: G' must be >= 1");
  if (epsilon <= 0.0) throw ConfigError("config: epsilon must be > 0");
  if (gamma <= 0.0) throw ConfigError("config: gamma must be > 0");
  if (beta < 0.0) throw ConfigError("config: beta must be >= 0");
  if (temperature <= 0.0) throw ConfigError("config: temperature must be > 0");
}

AdvantageResult group_advantage(std::span<const double> rewards) {
  if (rewards.size() < 2)
    throw StructuralError("group_advantage: need at least 2 rewards");
  const MeanStd ms = mean_and_pop_std(rewards);
  AdvantageResult out;
  out.advantages.resize(rewards.size(), 0.0);
  if (ms.std == 0.0) {
    out.zero_variance = true;
    return out;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i)
    out.advantages[i] = (rewards[i] - ms.mean) / ms.std;
  return out;
}

bool is_zero_advantage(std::span<const double> rewards) {
  return std::all_of(rewards.begin(), rewards.end(),
                     [](double r) { return r == 0.0; });
}

std::vector<double> importance_ratio(std::span<const double> new_logprobs,
                                     std::span<const double> old_logprobs) {
  if (new_logprobs.size() != old_logprobs.size())
    throw StructuralError("importance_ratio: length mismatch");
  std::vector<double> rho(new_logprobs.size());
  for (std::size_t t = 0; t < rho.size(); ++t)
    rho[t] = std::exp(new_logprobs[t] - old_logprobs[t]);
  return rho;
}

double clipped_token_term(double rho, double advantage, double epsilon) {
  const double clipped = std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(rho * advantage, clipped * advantage);
}

bool clip_gate_open(double rho, double advantage, double epsilon) {
  if (advantage > 0.0) return rho <= 1.0 + epsilon;
  if (advantage < 0.0) return rho >= 1.0 - epsilon;
  return true;  // zero advantage: gradient is zero either way
}

double kl_penalty(double policy_logprob, double ref_logprob, double beta) {
  if (beta == 0.0) return 0.0;
  const double x = ref_logprob - policy_logprob;
  return beta * (std::exp(x) - x - 1.0);
}

namespace detail {

RolloutTerm clipped_rollout_term(std::span<const double> new_logprobs,
                                 std::span<const double> old_logprobs,
                                 double advantage, double epsilon) {
  if (new_logprobs.size() != old_logprobs.size())
    throw StructuralError("objective: logprob length mismatch");
  const std::size_t len = new_logprobs.size();
  if (len == 0) throw StructuralError("objective: empty rollout");
  RolloutTerm out;
  out.weights.resize(len, 0.0);
  const double inv_len = 1.0 / static_cast<double>(len);
  double sum = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    const double rho = std::exp(new_logprobs[t] - old_logprobs[t]);
    sum += clipped_token_term(rho, advantage, epsilon);
    if (clip_gate_open(rho, advantage, epsilon))
      out.weights[t] = inv_len * rho * advantage;
  }
  out.value = inv_len * sum;
  return out;
}

}  // namespace detail

ObjectiveResult grpo_objective(
    const Group& group, const std::vector<std::vector<double>>& new_logprobs,
    const ShapingConfig& config,
    const std::vector<std::vector<double>>* ref_logprobs) {
  config.validate();
  const std::size_t G = group.rollouts.size();
  if (group.advantages.size() != G)
    throw StructuralError("grpo_objective: advantages not computed");
  if (new_logprobs.size() != G)
    throw StructuralError("grpo_objective: new_logprobs size mismatch");
  if (config.beta > 0.0 && (!ref_logprobs || ref_logprobs->size() != G))
    throw StructuralError("grpo_objective: beta > 0 needs ref_logprobs");

  ObjectiveResult out;
  out.token_weights.resize(G);
  const double inv_G = 1.0 / static_cast<double>(G);
  double sum = 0.0;
  for (std::size_t i = 0; i < G; ++i) {
    const auto& ro = group.rollouts[i];
    auto term = detail::clipped_rollout_term(new_logprobs[i], ro.old_logprobs,
                                             group.advantages[i],
                                             config.epsilon);
    if (config.beta > 0.0) {
      const auto& ref = (*ref_logprobs)[i];
      if (ref.size() != ro.length())
        throw StructuralError("grpo_objective: ref_logprobs length mismatch");
      const double inv_len = 1.0 / static_cast<double>(ro.length());
      for (std::size_t t = 0; t < ro.length(); ++t) {
        const double x = ref[t] - new_logprobs[i][t];
        term.value -= inv_len * config.beta * (std::exp(x) - x - 1.0);
        term.weights[t] += inv_len * config.beta * (std::exp(x) - 1.0);
      }
    }
    sum += term.value;
    out.token_weights[i] = std::move(term.weights);
    for (double& w : out.token_weights[i]) w *= inv_G;
  }
  out.value = sum * inv_G;
  return out;
}

namespace {

nlohmann::json rollout_to_json(const Rollout& ro) {
  return {{"tokens", ro.tokens},
          {"reward", ro.reward},
          {"old_logprobs", ro.old_logprobs},
          {"provenance",
           ro.provenance == Provenance::original ? "original" : "resampled"},
          {"perturbed_context", ro.perturbed_context},
          {"delta_id", ro.delta_id}};
}

Rollout rollout_from_json(const nlohmann::json& j) {
  Rollout ro;
  ro.tokens = j.at("tokens").get<std::vector<int>>();
  ro.reward = j.at("reward").get<double>();
  ro.old_logprobs = j.at("old_logprobs").get<std::vector<double>>();
  ro.provenance = j.at("provenance").get<std::string>() == "resampled"
                      ? Provenance::resampled
                      : Provenance::original;
  ro.perturbed_context = j.at("perturbed_context").get<bool>();
  ro.delta_id = j.at("delta_id").get<std::uint64_t>();
  ro.check();
  return ro;
}

}  // namespace

std::string group_to_json(const Group& group) {
  nlohmann::json j;
  j["question_id"] = group.question_id;
  j["prompt"] = group.prompt;
  j["zero_variance"] = group.zero_variance;
  j["advantages"] = group.advantages;
  nlohmann::json rollouts = nlohmann::json::array();
  for (const auto& ro : group.rollouts) rollouts.push_back(rollout_to_json(ro));
  j["rollouts"] = rollouts;
  return j.dump();
}

Group group_from_json(const std::string& line) {
  try {
    nlohmann::json j = nlohmann::json::parse(line);
    Group g;
    g.question_id = j.at("question_id").get<int>();
    g.prompt = j.at("prompt").get<std::string>();
    g.zero_variance = j.at("zero_variance").get<bool>();
    g.advantages = j.at("advantages").get<std::vector<double>>();
    for (const auto& rj : j.at("rollouts"))
      g.rollouts.push_back(rollout_from_json(rj));
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed group record: ") + e.what());
  }
}

}  // namespace lope
