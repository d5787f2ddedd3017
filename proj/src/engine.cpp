#include "lope/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace lope {

int ResamplePool::correct_count() const {
  int c = 0;
  for (const auto& ro : rollouts) c += ro.reward == 1.0 ? 1 : 0;
  return c;
}

void ResamplePool::check(int G_prime) const {
  if (static_cast<int>(rollouts.size()) != G_prime)
    throw StructuralError("resample pool: |rollouts| != G'");
  for (const auto& ro : rollouts) {
    ro.check();
    if (ro.provenance != Provenance::resampled)
      throw StructuralError("resample pool: rollout not marked resampled");
  }
}

bool trigger_resample(const Group& group) {
  return is_zero_advantage(group.rewards());
}

namespace {

// k uniform indices without replacement, order-stable given the seed.
std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                    std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

std::optional<RegroupedGroup> regroup(const Group& group,
                                      const ResamplePool& pool, Rng& rng) {
  if (!trigger_resample(group))
    throw StructuralError("regroup: group did not trigger resampling");
  if (pool.question_id != group.question_id)
    throw StructuralError("regroup: pool/group question_id mismatch");

  const int G = static_cast<int>(group.rollouts.size());
  const int c = pool.correct_count();
  if (c == 0) return std::nullopt;  // no signal this step
  const int N_s = std::min(c, G - 1);

  std::vector<std::size_t> correct_idx;
  for (std::size_t j = 0; j < pool.rollouts.size(); ++j)
    if (pool.rollouts[j].reward == 1.0) correct_idx.push_back(j);

  const auto chosen_correct = sample_without_replacement(
      correct_idx.size(), static_cast<std::size_t>(N_s), rng);
  // which original failures survive: drop N_s of them, uniformly
  auto dropped = sample_without_replacement(static_cast<std::size_t>(G),
                                            static_cast<std::size_t>(N_s), rng);
  std::vector<bool> drop(static_cast<std::size_t>(G), false);
  for (auto d : dropped) drop[d] = true;

  RegroupedGroup rg;
  rg.question_id = group.question_id;
  rg.prompt = group.prompt;
  rg.N_s = N_s;
  rg.delta_id = pool.delta.seed_used;
  for (auto j : chosen_correct)
    rg.selected.push_back(
        pseudo_rollout(pool.rollouts[correct_idx[j]], group.prompt));
  for (int i = 0; i < G; ++i)
    if (!drop[static_cast<std::size_t>(i)])
      rg.selected.push_back(group.rollouts[static_cast<std::size_t>(i)]);

  rg.r_all.reserve(group.rollouts.size() + pool.rollouts.size());
  for (const auto& ro : group.rollouts) rg.r_all.push_back(ro.reward);
  for (const auto& ro : pool.rollouts) rg.r_all.push_back(ro.reward);
  return rg;
}

Rollout pseudo_rollout(const Rollout& o_prime,
                       const std::string& /*naive_prompt*/) {
  if (o_prime.provenance != Provenance::resampled)
    throw StructuralError("pseudo_rollout: input is not a resampled rollout");
  // tokens, reward and old_logprobs carry over untouched; the perturbed
  // sampling context stays on record while training pairs the response with
  // the naive prompt.
  return o_prime;
}

std::vector<double> lope_is_ratio(
    std::span<const double> new_logprob_naive_ctx,
    std::span<const double> old_logprob_perturbed_ctx) {
  return importance_ratio(new_logprob_naive_ctx, old_logprob_perturbed_ctx);
}

double policy_shape(double rho, double gamma) {
  return rho / (rho + gamma);
}

double policy_shape_deriv(double rho, double gamma) {
  const double d = rho + gamma;
  return gamma / (d * d);
}

std::optional<double> shaped_advantage(std::span<const double> r_all,
                                       double reward_i) {
  const MeanStd ms = mean_and_pop_std(r_all);
  if (ms.std == 0.0) return std::nullopt;
  return (reward_i - ms.mean) / ms.std;
}

std::vector<double> shaped_advantages_for(const RegroupedGroup& rg) {
  std::vector<double> advantages;
  advantages.reserve(rg.selected.size());
  for (const auto& ro : rg.selected) {
    auto a = shaped_advantage(rg.r_all, ro.reward);
    if (!a)
      throw StructuralError("shaped advantage: zero variance over r_all");
    advantages.push_back(*a);
  }
  return advantages;
}

ObjectiveResult lope_objective(
    const RegroupedGroup& rg,
    const std::vector<std::vector<double>>& new_logprobs,
    const ShapingConfig& config) {
  config.validate();
  const std::size_t G = rg.selected.size();
  if (new_logprobs.size() != G)
    throw StructuralError("lope_objective: new_logprobs size mismatch");
  if (rg.N_s < 0 || static_cast<std::size_t>(rg.N_s) > G)
    throw StructuralError("lope_objective: bad N_s");

  const auto advantages = shaped_advantages_for(rg);

  ObjectiveResult out;
  out.token_weights.resize(G);
  const double inv_G = 1.0 / static_cast<double>(G);
  double sum = 0.0;
  for (std::size_t i = 0; i < G; ++i) {
    const auto& ro = rg.selected[i];
    if (ro.old_logprobs.size() != new_logprobs[i].size())
      throw StructuralError("lope_objective: logprob length mismatch");
    if (static_cast<int>(i) < rg.N_s) {
      // resampled entry: unclipped f(rho) * A_hat, exactly as displayed
      const std::size_t len = ro.length();
      if (len == 0) throw StructuralError("lope_objective: empty rollout");
      const double inv_len = 1.0 / static_cast<double>(len);
      std::vector<double> weights(len, 0.0);
      double term = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        const double rho =
            std::exp(new_logprobs[i][t] - ro.old_logprobs[t]);
        term += policy_shape(rho, config.gamma) * advantages[i];
        weights[t] = inv_len * policy_shape_deriv(rho, config.gamma) * rho *
                     advantages[i];
      }
      sum += inv_len * term;
      out.token_weights[i] = std::move(weights);
    } else {
      auto term = detail::clipped_rollout_term(
          new_logprobs[i], ro.old_logprobs, advantages[i], config.epsilon);
      sum += term.value;
      out.token_weights[i] = std::move(term.weights);
    }
    for (double& w : out.token_weights[i]) w *= inv_G;
  }
  out.value = sum * inv_G;
  return out;
}

std::string regrouped_to_json(const RegroupedGroup& rg) {
  nlohmann::json j;
  j["question_id"] = rg.question_id;
  j["prompt"] = rg.prompt;
  j["N_s"] = rg.N_s;
  j["r_all"] = rg.r_all;
  j["delta_id"] = rg.delta_id;
  nlohmann::json sel = nlohmann::json::array();
  for (const auto& ro : rg.selected) {
    Group tmp;  // reuse the rollout codec via a one-entry group
    tmp.rollouts.push_back(ro);
    sel.push_back(nlohmann::json::parse(group_to_json(tmp)).at("rollouts")[0]);
  }
  j["selected"] = sel;
  return j.dump();
}

RegroupedGroup regrouped_from_json(const std::string& line) {
  nlohmann::json j = [&] {
    try {
      return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed regrouped record: ") + e.what());
    }
  }();
  RegroupedGroup rg;
  rg.question_id = j.at("question_id").get<int>();
  rg.prompt = j.at("prompt").get<std::string>();
  rg.N_s = j.at("N_s").get<int>();
  rg.r_all = j.at("r_all").get<std::vector<double>>();
  rg.delta_id = j.at("delta_id").get<std::uint64_t>();
  Group tmp;
  nlohmann::json gj;
  gj["question_id"] = 0;
  gj["prompt"] = "";
  gj["zero_variance"] = false;
  gj["advantages"] = nlohmann::json::array();
  gj["rollouts"] = j.at("selected");
  tmp = group_from_json(gj.dump());
  rg.selected = std::move(tmp.rollouts);
  return rg;
}

}  // namespace lope
