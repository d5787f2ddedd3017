#include "lope/toy_policy.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace lope {

PolicyParams PolicyParams::zeros(int vocab, int max_len) {
  PolicyParams p;
  p.vocab = vocab;
  p.max_len = max_len;
  p.logits.assign(static_cast<std::size_t>(vocab) + 1,
                  std::vector<double>(static_cast<std::size_t>(vocab), 0.0));
  p.context_shift.assign(static_cast<std::size_t>(vocab), 0.0);
  return p;
}

void PolicyParams::validate() const {
  if (vocab < 2) throw ConfigError("policy: vocab must be >= 2");
  if (max_len < 1) throw ConfigError("policy: max_len must be >= 1");
  if (logits.size() != static_cast<std::size_t>(vocab) + 1)
    throw ConfigError("policy: logits must have vocab+1 rows");
  for (const auto& row : logits) {
    if (row.size() != static_cast<std::size_t>(vocab))
      throw ConfigError("policy: logits row width mismatch");
    for (double x : row)
      if (!std::isfinite(x)) throw ConfigError("policy: non-finite logit");
  }
  if (context_shift.size() != static_cast<std::size_t>(vocab))
    throw ConfigError("policy: context_shift size mismatch");
  for (double x : context_shift)
    if (!std::isfinite(x)) throw ConfigError("policy: non-finite shift");
}

std::vector<double> PolicyParams::to_flat() const {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(param_count()));
  for (const auto& row : logits) flat.insert(flat.end(), row.begin(), row.end());
  flat.insert(flat.end(), context_shift.begin(), context_shift.end());
  return flat;
}

void PolicyParams::from_flat(std::span<const double> flat) {
  if (flat.size() != static_cast<std::size_t>(param_count()))
    throw StructuralError("policy: flat parameter size mismatch");
  std::size_t k = 0;
  for (auto& row : logits)
    for (auto& x : row) x = flat[k++];
  for (auto& x : context_shift) x = flat[k++];
}

std::string PolicyParams::to_json() const {
  nlohmann::json j;
  j["format"] = "lope-policy";
  j["version"] = 1;
  j["vocab"] = vocab;
  j["max_len"] = max_len;
  j["logits"] = logits;
  j["context_shift"] = context_shift;
  return j.dump();
}

PolicyParams PolicyParams::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "lope-policy")
    throw ConfigError("policy load: unrecognized format");
  if (j.value("version", 0) != 1)
    throw ConfigError("policy load: unsupported version");
  PolicyParams p;
  p.vocab = j.at("vocab").get<int>();
  p.max_len = j.at("max_len").get<int>();
  p.logits = j.at("logits").get<std::vector<std::vector<double>>>();
  p.context_shift = j.at("context_shift").get<std::vector<double>>();
  p.validate();
  return p;
}

double QuestionSpec::reward(std::span<const int> tokens) const {
  for (const auto& member : accepting) {
    if (member.size() > tokens.size()) continue;
    if (std::equal(member.begin(), member.end(), tokens.begin())) return 1.0;
  }
  return 0.0;
}

std::string QuestionSpec::to_json() const {
  nlohmann::json j;
  j["id"] = id;
  j["accepting"] = accepting;
  return j.dump();
}

QuestionSpec QuestionSpec::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  QuestionSpec q;
  q.id = j.at("id").get<int>();
  q.accepting = j.at("accepting").get<std::vector<std::vector<int>>>();
  if (q.accepting.empty())
    throw ConfigError("question: accepting set must be non-empty");
  return q;
}

std::vector<double> next_token_probs(const PolicyParams& params, int prev,
                                     bool perturbed, double temperature) {
  const std::size_t V = static_cast<std::size_t>(params.vocab);
  const std::size_t row =
      prev < 0 ? V : static_cast<std::size_t>(prev);
  std::vector<double> z(V);
  double zmax = -1e300;
  for (std::size_t t = 0; t < V; ++t) {
    z[t] = params.logits[row][t] / temperature +
           (perturbed ? params.context_shift[t] : 0.0);
    zmax = std::max(zmax, z[t]);
  }
  double denom = 0.0;
  for (std::size_t t = 0; t < V; ++t) {
    z[t] = std::exp(z[t] - zmax);
    denom += z[t];
  }
  for (std::size_t t = 0; t < V; ++t) z[t] /= denom;
  return z;
}

std::vector<double> logprob_seq(const PolicyParams& params,
                                std::span<const int> seq, bool perturbed,
                                double temperature) {
  if (static_cast<int>(seq.size()) > params.max_len)
    throw StructuralError("logprob_seq: sequence longer than max_len");
  std::vector<double> out;
  out.reserve(seq.size());
  int prev = -1;
  for (int tok : seq) {
    if (tok < 0 || tok >= params.vocab)
      throw StructuralError("logprob_seq: token out of vocabulary");
    const auto p = next_token_probs(params, prev, perturbed, temperature);
    out.push_back(std::log(p[static_cast<std::size_t>(tok)]));
    prev = tok;
  }
  return out;
}

double total_logprob(const PolicyParams& params, std::span<const int> seq,
                     bool perturbed, double temperature) {
  double sum = 0.0;
  for (double lp : logprob_seq(params, seq, perturbed, temperature)) sum += lp;
  return sum;
}

SampledSeq sample_seq(const PolicyParams& params, Rng& rng, double temperature,
                      bool perturbed) {
  if (temperature <= 0.0) throw ConfigError("sample_seq: temperature must be > 0");
  SampledSeq out;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int prev = -1;
  for (int pos = 0; pos < params.max_len; ++pos) {
    const auto p = next_token_probs(params, prev, perturbed, temperature);
    const double u = unif(rng);
    double acc = 0.0;
    int chosen = params.vocab - 1;
    for (int t = 0; t < params.vocab; ++t) {
      acc += p[static_cast<std::size_t>(t)];
      if (u < acc) {
        chosen = t;
        break;
      }
    }
    out.tokens.push_back(chosen);
    out.logprobs.push_back(std::log(p[static_cast<std::size_t>(chosen)]));
    prev = chosen;
  }
  return out;
}

void accumulate_weighted_grad(const PolicyParams& params,
                              std::span<const int> seq,
                              std::span<const double> weights, bool perturbed,
                              std::span<double> grad, double temperature) {
  if (weights.size() != seq.size())
    throw StructuralError("accumulate_weighted_grad: weight length mismatch");
  if (grad.size() != static_cast<std::size_t>(params.param_count()))
    throw StructuralError("accumulate_weighted_grad: grad size mismatch");
  const std::size_t V = static_cast<std::size_t>(params.vocab);
  const std::size_t shift_base = (V + 1) * V;
  int prev = -1;
  for (std::size_t pos = 0; pos < seq.size(); ++pos) {
    const int tok = seq[pos];
    const auto p = next_token_probs(params, prev, perturbed, temperature);
    const std::size_t row = prev < 0 ? V : static_cast<std::size_t>(prev);
    const double w = weights[pos];
    for (std::size_t tau = 0; tau < V; ++tau) {
      const double jac =
          (static_cast<int>(tau) == tok ? 1.0 : 0.0) - p[tau];
      grad[row * V + tau] += w * jac / temperature;
      if (perturbed) grad[shift_base + tau] += w * jac;
    }
    prev = tok;
  }
}

std::vector<double> grad_logprob(const PolicyParams& params,
                                 std::span<const int> seq, bool perturbed,
                                 double temperature) {
  std::vector<double> grad(static_cast<std::size_t>(params.param_count()), 0.0);
  std::vector<double> ones(seq.size(), 1.0);
  accumulate_weighted_grad(params, seq, ones, perturbed, grad, temperature);
  return grad;
}

namespace {

std::vector<std::vector<double>> naive_new_logprobs(
    const PolicyParams& params, const std::vector<Rollout>& rollouts) {
  std::vector<std::vector<double>> out;
  out.reserve(rollouts.size());
  for (const auto& ro : rollouts)
    out.push_back(logprob_seq(params, ro.tokens, /*perturbed=*/false));
  return out;
}

ObjectiveGrad weights_to_grad(const PolicyParams& params,
                              const std::vector<Rollout>& rollouts,
                              const ObjectiveResult& obj) {
  ObjectiveGrad out;
  out.value = obj.value;
  out.grad.assign(static_cast<std::size_t>(params.param_count()), 0.0);
  for (std::size_t i = 0; i < rollouts.size(); ++i)
    accumulate_weighted_grad(params, rollouts[i].tokens, obj.token_weights[i],
                             /*perturbed=*/false, out.grad);
  return out;
}

}  // namespace

ObjectiveGrad grpo_objective_grad(const Group& group,
                                  const PolicyParams& params,
                                  const ShapingConfig& config,
                                  const PolicyParams* ref_params) {
  const auto new_lp = naive_new_logprobs(params, group.rollouts);
  std::vector<std::vector<double>> ref_lp;
  const std::vector<std::vector<double>>* ref_ptr = nullptr;
  if (config.beta > 0.0) {
    if (!ref_params)
      throw StructuralError("grpo_objective_grad: beta > 0 needs ref params");
    for (const auto& ro : group.rollouts)
      ref_lp.push_back(logprob_seq(*ref_params, ro.tokens, false));
    ref_ptr = &ref_lp;
  }
  const auto obj = grpo_objective(group, new_lp, config, ref_ptr);
  return weights_to_grad(params, group.rollouts, obj);
}

ObjectiveGrad lope_objective_grad(const RegroupedGroup& rg,
                                  const PolicyParams& params,
                                  const ShapingConfig& config) {
  const auto new_lp = naive_new_logprobs(params, rg.selected);
  const auto obj = lope_objective(rg, new_lp, config);
  return weights_to_grad(params, rg.selected, obj);
}

double grpo_objective_value(const Group& group, const PolicyParams& params,
                            const ShapingConfig& config,
                            const PolicyParams* ref_params) {
  return grpo_objective_grad(group, params, config, ref_params).value;
}

double lope_objective_value(const RegroupedGroup& rg,
                            const PolicyParams& params,
                            const ShapingConfig& config) {
  return lope_objective_grad(rg, params, config).value;
}

void for_each_sequence(int vocab, int len,
                       const std::function<void(std::span<const int>)>& fn) {
  std::vector<int> seq(static_cast<std::size_t>(len), 0);
  while (true) {
    fn(seq);
    int pos = len - 1;
    while (pos >= 0) {
      if (++seq[static_cast<std::size_t>(pos)] < vocab) break;
      seq[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) return;
  }
}

std::vector<double> enumerate_expectation(
    const PolicyParams& params, bool perturbed_sampling, double temperature,
    std::size_t value_dim,
    const std::function<void(std::span<const int>, std::span<double>)>& fn,
    std::size_t budget) {
  double count = std::pow(static_cast<double>(params.vocab),
                          static_cast<double>(params.max_len));
  if (count > static_cast<double>(budget))
    throw ConfigError("enumerate_expectation: V^L exceeds the budget");
  std::vector<double> acc(value_dim, 0.0);
  std::vector<double> value(value_dim, 0.0);
  for_each_sequence(params.vocab, params.max_len, [&](std::span<const int> seq) {
    const double p = std::exp(
        total_logprob(params, seq, perturbed_sampling, temperature));
    std::fill(value.begin(), value.end(), 0.0);
    fn(seq, value);
    for (std::size_t k = 0; k < value_dim; ++k) acc[k] += p * value[k];
  });
  return acc;
}

double enumerate_success_probability(const PolicyParams& params,
                                     const QuestionSpec& question,
                                     bool perturbed, double temperature) {
  const auto r = enumerate_expectation(
      params, perturbed, temperature, 1,
      [&](std::span<const int> seq, std::span<double> out) {
        out[0] = question.reward(seq);
      });
  return r[0];
}

std::vector<double> context_shift_for(const std::string& delta_text, int vocab,
                                      double magnitude) {
  Rng rng(fnv1a(delta_text));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> shift(static_cast<std::size_t>(vocab));
  for (auto& s : shift) s = magnitude * unif(rng);
  return shift;
}

}  // namespace lope
