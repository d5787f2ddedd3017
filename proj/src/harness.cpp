#include "lope/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace lope {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::grpo: return "grpo";
    case Strategy::naive_resample: return "naive_resample";
    case Strategy::naive_resample_hot: return "naive_resample_hot";
    case Strategy::lope: return "lope";
    case Strategy::lope_shaped: return "lope_shaped";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  for (auto s : {Strategy::grpo, Strategy::naive_resample,
                 Strategy::naive_resample_hot, Strategy::lope,
                 Strategy::lope_shaped})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown strategy: " + name);
}

void ExperimentConfig::validate() const {
  shaping.validate();
  perturbation.validate();
  init_params.validate();
  if (bank.empty()) throw ConfigError("config: empty question bank");
  if (batch < 1 || batch > static_cast<int>(bank.size()))
    throw ConfigError("config: need 1 <= batch <= |bank|");
  if (steps < 1) throw ConfigError("config: steps must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("config: learning_rate must be > 0");
  if (hot_temperature <= 0.0) throw ConfigError("config: hot_temperature must be > 0");
}

namespace {

void reject_unknown_keys(const nlohmann::json& j,
                         std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["strategy"] = lope::to_string(strategy);
  j["steps"] = steps;
  j["batch"] = batch;
  j["learning_rate"] = learning_rate;
  j["seed"] = seed;
  j["shift_magnitude"] = shift_magnitude;
  j["hot_temperature"] = hot_temperature;
  j["eval_temperature"] = eval_temperature;
  j["shaping"] = {{"G", shaping.G},
                  {"G_prime", shaping.G_prime},
                  {"epsilon", shaping.epsilon},
                  {"beta", shaping.beta},
                  {"gamma", shaping.gamma},
                  {"temperature", shaping.temperature}};
  j["perturbation"] = {{"kind", lope::to_string(perturbation.kind)},
                       {"min_len", perturbation.min_len},
                       {"max_len", perturbation.max_len},
                       {"append_boundary", perturbation.append_boundary},
                       {"ascii_chunk_width", perturbation.ascii_chunk_width}};
  j["policy"] = nlohmann::json::parse(init_params.to_json());
  nlohmann::json bank_json = nlohmann::json::array();
  for (const auto& q : bank) bank_json.push_back(nlohmann::json::parse(q.to_json()));
  j["bank"] = bank_json;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  nlohmann::json j = [&] {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
  }();
  reject_unknown_keys(j,
                      {"version", "strategy", "steps", "batch", "learning_rate",
                       "seed", "shift_magnitude", "hot_temperature",
                       "eval_temperature", "shaping", "perturbation", "policy",
                       "bank", "bank_preset"},
                      "top level");
  if (j.value("version", 0) != 1)
    throw ConfigError("config: unsupported version");
  ExperimentConfig cfg;
  cfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  cfg.steps = j.at("steps").get<int>();
  cfg.batch = j.at("batch").get<int>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("shift_magnitude"))
    cfg.shift_magnitude = j.at("shift_magnitude").get<double>();
  if (j.contains("hot_temperature"))
    cfg.hot_temperature = j.at("hot_temperature").get<double>();
  if (j.contains("eval_temperature"))
    cfg.eval_temperature = j.at("eval_temperature").get<double>();

  const auto& sj = j.at("shaping");
  reject_unknown_keys(sj, {"G", "G_prime", "epsilon", "beta", "gamma", "temperature"},
                      "shaping");
  cfg.shaping.G = sj.at("G").get<int>();
  cfg.shaping.G_prime = sj.at("G_prime").get<int>();
  cfg.shaping.epsilon = sj.at("epsilon").get<double>();
  cfg.shaping.beta = sj.at("beta").get<double>();
  cfg.shaping.gamma = sj.at("gamma").get<double>();
  cfg.shaping.temperature = sj.at("temperature").get<double>();

  const auto& pj = j.at("perturbation");
  reject_unknown_keys(
      pj, {"kind", "min_len", "max_len", "append_boundary", "ascii_chunk_width"},
      "perturbation");
  cfg.perturbation.kind = perturb_kind_from_string(pj.at("kind").get<std::string>());
  cfg.perturbation.min_len = pj.at("min_len").get<int>();
  cfg.perturbation.max_len = pj.at("max_len").get<int>();
  cfg.perturbation.append_boundary = pj.value("append_boundary", false);
  cfg.perturbation.ascii_chunk_width = pj.value("ascii_chunk_width", 5);

  cfg.init_params = PolicyParams::from_json(j.at("policy").dump());

  if (j.contains("bank_preset")) {
    const auto& bp = j.at("bank_preset");
    reject_unknown_keys(bp, {"type", "questions", "seed"}, "bank_preset");
    if (bp.at("type").get<std::string>() != "exploration")
      throw ConfigError("config: unknown bank_preset type");
    cfg.bank = make_exploration_bank(bp.at("questions").get<int>(),
                                     cfg.init_params.vocab,
                                     cfg.init_params.max_len,
                                     bp.at("seed").get<std::uint64_t>());
  } else {
    for (const auto& qj : j.at("bank"))
      cfg.bank.push_back(QuestionSpec::from_json(qj.dump()));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string MetricsRecord::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["question_pass_rate"] = question_pass_rate;
  j["response_accuracy"] = response_accuracy;
  j["zero_advantage_fraction"] = zero_advantage_fraction;
  j["skipped_fraction"] = skipped_fraction;
  j["objective"] = objective;
  j["grad_norm"] = grad_norm;
  j["triggered"] = triggered;
  j["retriggered"] = retriggered;
  return j.dump();
}

MetricsRecord MetricsRecord::from_json(const std::string& line) {
  nlohmann::json j = [&] {
    try {
      return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed metrics record: ") + e.what());
    }
  }();
  MetricsRecord m;
  m.step = j.at("step").get<int>();
  m.question_pass_rate = j.at("question_pass_rate").get<double>();
  m.response_accuracy = j.at("response_accuracy").get<double>();
  m.zero_advantage_fraction = j.at("zero_advantage_fraction").get<double>();
  m.skipped_fraction = j.at("skipped_fraction").get<double>();
  m.objective = j.at("objective").get<double>();
  m.grad_norm = j.at("grad_norm").get<double>();
  m.triggered = j.at("triggered").get<int>();
  m.retriggered = j.at("retriggered").get<int>();
  return m;
}

std::string MetricsRecord::csv_header() {
  return "step,question_pass_rate,response_accuracy,zero_advantage_fraction,"
         "skipped_fraction,objective,grad_norm,triggered,retriggered";
}

std::string MetricsRecord::to_csv() const {
  std::ostringstream out;
  out << step << ',' << question_pass_rate << ',' << response_accuracy << ','
      << zero_advantage_fraction << ',' << skipped_fraction << ',' << objective
      << ',' << grad_norm << ',' << triggered << ',' << retriggered;
  return out.str();
}

SimState init_state(const ExperimentConfig& config) {
  config.validate();
  SimState state;
  state.params = config.init_params;
  return state;
}

namespace {

Rollout make_rollout(const SampledSeq& s, double reward, Provenance prov,
                     bool perturbed, std::uint64_t delta_id) {
  Rollout ro;
  ro.tokens = s.tokens;
  ro.old_logprobs = s.logprobs;
  ro.reward = reward;
  ro.provenance = prov;
  ro.perturbed_context = perturbed;
  ro.delta_id = delta_id;
  return ro;
}

const WordPool& harness_pool(PerturbKind kind) {
  static const WordPool lorem = default_lorem_pool();
  static const WordPool latin = default_latin50_pool();
  switch (kind) {
    case PerturbKind::lorem: return lorem;
    case PerturbKind::unigram:
    case PerturbKind::fake_english:
    case PerturbKind::random_token: return latin;
    default:
      throw ConfigError(
          "harness: only pool-backed and random_ascii perturbation kinds are "
          "supported in the simulator");
  }
}

Perturbation draw_perturbation(const ExperimentConfig& config, Rng& rng) {
  PerturbationSpec spec = config.perturbation;
  spec.seed = rng();
  if (spec.kind == PerturbKind::random_ascii) {
    PerturbResources res;
    return generate_perturbation(spec, res);
  }
  PerturbResources res;
  res.pool = &harness_pool(spec.kind);
  return generate_perturbation(spec, res);
}

}  // namespace

MetricsRecord run_step(SimState& state, const ExperimentConfig& config,
                       Rng& rng) {
  const auto& sc = config.shaping;
  const int V = state.params.vocab;

  // batch selection: uniform without replacement over the bank
  std::vector<std::size_t> order(config.bank.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < config.batch; ++i) {
    std::uniform_int_distribution<std::size_t> pick(
        static_cast<std::size_t>(i), order.size() - 1);
    std::swap(order[static_cast<std::size_t>(i)], order[pick(rng)]);
  }

  std::vector<double> grad(static_cast<std::size_t>(state.params.param_count()),
                           0.0);
  double objective_sum = 0.0;
  int zero_adv = 0, triggered = 0, skipped = 0, resample_pass = 0;
  double accuracy_sum = 0.0;
  std::vector<int> triggered_ids;

  auto sample_into_log = [&](const PolicyParams& params, double temperature,
                             bool perturbed) {
    SampledSeq s = sample_seq(params, rng, temperature, perturbed);
    state.token_log.insert(state.token_log.end(), s.tokens.begin(),
                           s.tokens.end());
    ++state.rollouts_sampled;
    return s;
  };

  for (int b = 0; b < config.batch; ++b) {
    const QuestionSpec& question = config.bank[order[static_cast<std::size_t>(b)]];
    Group group;
    group.question_id = question.id;
    group.prompt = "q" + std::to_string(question.id);
    for (int i = 0; i < sc.G; ++i) {
      auto s = sample_into_log(state.params, sc.temperature, false);
      const double r = question.reward(s.tokens);
      group.rollouts.push_back(
          make_rollout(s, r, Provenance::original, false, 0));
    }
    const auto rewards = group.rewards();

    if (is_zero_advantage(rewards)) {
      ++zero_adv;
      if (config.strategy == Strategy::grpo) continue;
      ++triggered;
      triggered_ids.push_back(question.id);

      // resample G' responses under the strategy's exploration context
      PolicyParams sampler = state.params;
      double resample_temp = sc.temperature;
      bool perturbed = false;
      std::uint64_t delta_id = 0;
      if (config.strategy == Strategy::lope ||
          config.strategy == Strategy::lope_shaped) {
        const Perturbation delta = draw_perturbation(config, rng);
        sampler.context_shift =
            context_shift_for(delta.text, V, config.shift_magnitude);
        perturbed = true;
        delta_id = delta.seed_used;
      } else if (config.strategy == Strategy::naive_resample_hot) {
        resample_temp = config.hot_temperature;
      }

      ResamplePool pool;
      pool.question_id = question.id;
      pool.delta.seed_used = delta_id;
      for (int j = 0; j < sc.G_prime; ++j) {
        auto s = sample_into_log(sampler, resample_temp, perturbed);
        const double r = question.reward(s.tokens);
        // naive baselines resample under an identity perturbation; the
        // record still marks the rollout as coming from the resample phase
        pool.rollouts.push_back(
            make_rollout(s, r, Provenance::resampled, true, delta_id));
      }
      const int c = pool.correct_count();
      accuracy_sum += static_cast<double>(c) / sc.G_prime;
      if (c > 0) ++resample_pass;

      auto rg = regroup(group, pool, rng);
      if (!rg) {
        ++skipped;
        continue;
      }

      if (config.strategy == Strategy::lope_shaped) {
        auto og = lope_objective_grad(*rg, state.params, sc);
        objective_sum += og.value;
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += og.grad[k];
      } else {
        // unshaped update: group-normalized advantages over the selected G, clipped
        // surrogate everywhere; the off-policy ratio enters through
        // the recorded perturbed-context old_logprobs
        Group sel;
        sel.question_id = rg->question_id;
        sel.prompt = rg->prompt;
        sel.rollouts = rg->selected;
        auto adv = group_advantage(sel.rewards());
        sel.advantages = adv.advantages;
        sel.zero_variance = adv.zero_variance;
        auto og = grpo_objective_grad(sel, state.params, sc);
        objective_sum += og.value;
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += og.grad[k];
      }
    } else {
      auto adv = group_advantage(rewards);
      group.advantages = adv.advantages;
      group.zero_variance = adv.zero_variance;
      if (adv.zero_variance) {
        ++zero_adv;  // all-correct: no resample, vanishing advantages
        continue;
      }
      auto og = grpo_objective_grad(group, state.params, sc);
      objective_sum += og.value;
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += og.grad[k];
    }
  }

  double norm_sq = 0.0;
  auto flat = state.params.to_flat();
  for (std::size_t k = 0; k < grad.size(); ++k) {
    const double g = grad[k] / config.batch;
    norm_sq += g * g;
    flat[k] += config.learning_rate * g;
  }
  state.params.from_flat(flat);

  int retriggered = 0;
  for (int id : triggered_ids)
    if (std::find(state.last_triggered.begin(), state.last_triggered.end(),
                  id) != state.last_triggered.end())
      ++retriggered;
  state.last_triggered = triggered_ids;

  MetricsRecord m;
  m.step = state.step++;
  m.triggered = triggered;
  m.retriggered = retriggered;
  m.question_pass_rate =
      triggered > 0 ? static_cast<double>(resample_pass) / triggered : 0.0;
  m.response_accuracy = triggered > 0 ? accuracy_sum / triggered : 0.0;
  m.zero_advantage_fraction = static_cast<double>(zero_adv) / config.batch;
  m.skipped_fraction = static_cast<double>(skipped) / config.batch;
  m.objective = objective_sum / config.batch;
  m.grad_norm = std::sqrt(norm_sq);
  return m;
}

EvalResult evaluate(const PolicyParams& params,
                    const std::vector<QuestionSpec>& bank, int G_eval,
                    double temperature, Rng& rng) {
  EvalResult out;
  for (const auto& q : bank) {
    int correct = 0;
    for (int i = 0; i < G_eval; ++i) {
      auto s = sample_seq(params, rng, temperature, false);
      correct += q.reward(s.tokens) == 1.0 ? 1 : 0;
    }
    EvalQuestion eq;
    eq.question_id = q.id;
    eq.pass = correct > 0;
    eq.mean = static_cast<double>(correct) / G_eval;
    out.pass_rate += eq.pass ? 1.0 : 0.0;
    out.mean_accuracy += eq.mean;
    out.per_question.push_back(eq);
  }
  out.pass_rate /= static_cast<double>(bank.size());
  out.mean_accuracy /= static_cast<double>(bank.size());
  return out;
}

double sign_test_p_value(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  // P(Bin(n, 1/2) >= wins), exact
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0);
    p += std::exp(logc - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

CompareReport compare_strategies(const ExperimentConfig& a,
                                 const ExperimentConfig& b, int trials) {
  if (a.steps != b.steps || a.batch != b.batch ||
      a.bank.size() != b.bank.size() || a.shaping.G != b.shaping.G ||
      a.shaping.G_prime != b.shaping.G_prime)
    throw ConfigError("compare: configs must share bank and budgets");

  CompareReport report;
  auto run_one = [&](const ExperimentConfig& cfg, std::uint64_t seed,
                     std::vector<MetricsRecord>& sink, double& pass,
                     double& acc) {
    ExperimentConfig c = cfg;
    c.seed = seed;
    SimState state = init_state(c);
    Rng rng(c.seed);
    double pass_sum = 0.0, acc_sum = 0.0;
    int with_trigger = 0;
    for (int s = 0; s < c.steps; ++s) {
      MetricsRecord m = run_step(state, c, rng);
      sink.push_back(m);
      if (m.triggered > 0) {
        pass_sum += m.question_pass_rate;
        acc_sum += m.response_accuracy;
        ++with_trigger;
      }
    }
    pass = with_trigger > 0 ? pass_sum / with_trigger : 0.0;
    acc = with_trigger > 0 ? acc_sum / with_trigger : 0.0;
  };

  for (int t = 0; t < trials; ++t) {
    const std::uint64_t seed = mix_seed(a.seed, static_cast<std::uint64_t>(t));
    CompareTrial row;
    row.trial = t;
    run_one(a, seed, report.a_steps, row.a_pass, row.a_accuracy);
    run_one(b, seed, report.b_steps, row.b_pass, row.b_accuracy);
    if (row.a_pass > row.b_pass)
      ++report.a_wins;
    else if (row.b_pass > row.a_pass)
      ++report.b_wins;
    else
      ++report.ties;
    report.trials.push_back(row);
  }
  report.sign_test_p = sign_test_p_value(report.a_wins, report.b_wins);
  return report;
}

std::vector<QuestionSpec> make_exploration_bank(int questions, int vocab,
                                                int max_len,
                                                std::uint64_t seed) {
  if (vocab < 3) throw ConfigError("exploration bank: vocab must be >= 3");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(1, vocab - 1);  // avoid token 0
  std::vector<QuestionSpec> bank;
  for (int qid = 0; qid < questions; ++qid) {
    QuestionSpec q;
    q.id = qid;
    std::vector<int> member(static_cast<std::size_t>(max_len));
    for (auto& t : member) t = pick(rng);
    q.accepting.push_back(member);
    bank.push_back(q);
  }
  return bank;
}

PolicyParams make_collapsed_policy(int vocab, int max_len, double bias) {
  PolicyParams p = PolicyParams::zeros(vocab, max_len);
  for (auto& row : p.logits) row[0] = bias;
  return p;
}

}  // namespace lope
