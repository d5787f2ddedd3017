// Command-line front end: perturbation generation, n-gram utilities,
// analysis curve export, simulator training, evaluation, and paired
// strategy comparison.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lope/engine.hpp"
#include "lope/harness.hpp"
#include "lope/ngram.hpp"
#include "lope/perturb.hpp"
#include "lope/shaping.hpp"
#include "lope/toy_policy.hpp"
#include "lope/word_pool.hpp"

namespace fs = std::filesystem;
using namespace lope;

namespace {

// LOPE_SEED overrides every seed the invocation would otherwise use; this
// makes reruns reproducible without editing configs.
std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("LOPE_SEED");
  if (raw == nullptr) return std::nullopt;
  return std::stoull(raw);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
  if (!out) throw ConfigError("write failure: " + path);
}

std::vector<std::vector<std::string>> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus: " + path);
  std::vector<std::vector<std::string>> corpus;
  std::string line;
  while (std::getline(in, line)) {
    auto units = split_units(line);
    if (!units.empty()) corpus.push_back(std::move(units));
  }
  return corpus;
}

std::vector<QuestionSpec> read_bank(const std::string& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  std::vector<QuestionSpec> bank;
  for (const auto& qj : j) bank.push_back(QuestionSpec::from_json(qj.dump()));
  if (bank.empty()) throw ConfigError("empty question bank: " + path);
  return bank;
}

int cmd_gen_perturb(const std::string& kind_name, int min_len, int max_len,
                    std::uint64_t seed, bool boundary,
                    const std::string& pool_path, const std::string& prompt) {
  PerturbationSpec spec;
  spec.kind = perturb_kind_from_string(kind_name);
  spec.min_len = min_len;
  spec.max_len = max_len;
  spec.seed = env_seed().value_or(seed);
  spec.append_boundary = boundary;

  const WordPool pool = pool_path.empty()
                            ? (spec.kind == PerturbKind::lorem
                                   ? default_lorem_pool()
                                   : default_latin50_pool())
                            : load_word_pool(pool_path);
  PerturbResources res;
  res.pool = &pool;
  const Perturbation delta = generate_perturbation(spec, res);
  if (prompt.empty())
    std::cout << delta.text << '\n';
  else
    std::cout << perturb_prompt(delta, prompt) << '\n';
  return 0;
}

int cmd_ngram_train(const std::string& corpus_path, int order, double alpha,
                    const std::string& out_path) {
  const NGramModel model = NGramModel::train(read_corpus(corpus_path), order, alpha);
  model.save(out_path);
  std::cout << "trained order-" << order << " model on "
            << read_corpus(corpus_path).size() << " sequences -> " << out_path
            << '\n';
  return 0;
}

int cmd_ngram_score(const std::string& model_path, const std::string& text,
                    const std::string& text_path) {
  const NGramModel model = NGramModel::load(model_path);
  std::string payload = text;
  if (!text_path.empty()) payload = read_file(text_path);
  const auto units = split_units(payload);
  if (units.empty()) throw ConfigError("nothing to score");
  std::cout << model.perplexity(units) << '\t' << model.logprob(units) << '\n';
  return 0;
}

int cmd_curves(double gamma, double epsilon, int grid_points, int G,
               int G_prime, const std::string& out_dir) {
  fs::create_directories(out_dir);
  CurveSpec spec;
  spec.gamma = gamma;
  spec.epsilon = epsilon;
  spec.grid = CurveSpec::uniform_grid(grid_points);

  std::ofstream curves(fs::path(out_dir) / "gradient_curves.csv");
  const int rows = emit_gradient_curves(spec, curves);
  std::ofstream amp(fs::path(out_dir) / "amplification.csv");
  const int amp_rows = emit_amplification_table(G, G_prime, amp);
  std::cout << "wrote " << rows << " curve rows and " << amp_rows
            << " amplification rows to " << out_dir << '\n';
  return 0;
}

int cmd_bank(int questions, int vocab, int max_len, std::uint64_t seed,
             const std::string& out_path) {
  const auto bank =
      make_exploration_bank(questions, vocab, max_len, env_seed().value_or(seed));
  nlohmann::json j = nlohmann::json::array();
  for (const auto& q : bank) j.push_back(nlohmann::json::parse(q.to_json()));
  write_file(out_path, j.dump(2) + "\n");
  std::cout << "wrote " << bank.size() << " questions -> " << out_path << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig cfg = ExperimentConfig::load(config_path);
  if (const auto s = env_seed()) cfg.seed = *s;
  fs::create_directories(out_dir);

  SimState state = init_state(cfg);
  Rng rng(cfg.seed);
  std::ofstream metrics_jsonl(fs::path(out_dir) / "metrics.jsonl");
  std::ofstream metrics_csv(fs::path(out_dir) / "metrics.csv");
  metrics_csv << MetricsRecord::csv_header() << '\n';
  for (int s = 0; s < cfg.steps; ++s) {
    const MetricsRecord m = run_step(state, cfg, rng);
    metrics_jsonl << m.to_json() << '\n';
    metrics_csv << m.to_csv() << '\n';
  }
  write_file((fs::path(out_dir) / "params.json").string(),
             state.params.to_json() + "\n");

  Rng eval_rng(mix_seed(cfg.seed, 0xe7a1));
  const EvalResult ev = evaluate(state.params, cfg.bank, cfg.shaping.G,
                                 cfg.eval_temperature, eval_rng);
  nlohmann::json summary;
  summary["strategy"] = to_string(cfg.strategy);
  summary["seed"] = cfg.seed;
  summary["steps"] = cfg.steps;
  summary["rollouts_sampled"] = state.rollouts_sampled;
  summary["final_pass_rate"] = ev.pass_rate;
  summary["final_mean_accuracy"] = ev.mean_accuracy;
  write_file((fs::path(out_dir) / "summary.json").string(),
             summary.dump(2) + "\n");
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const std::string& params_path, const std::string& bank_path,
             int G_eval, double temperature, std::uint64_t seed) {
  const PolicyParams params = PolicyParams::from_json(read_file(params_path));
  const auto bank = read_bank(bank_path);
  Rng rng(env_seed().value_or(seed));
  const EvalResult ev = evaluate(params, bank, G_eval, temperature, rng);
  nlohmann::json j;
  j["pass_rate"] = ev.pass_rate;
  j["mean_accuracy"] = ev.mean_accuracy;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& q : ev.per_question)
    per.push_back({{"question_id", q.question_id},
                   {"pass", q.pass},
                   {"mean", q.mean}});
  j["per_question"] = per;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path,
                int trials, const std::string& out_dir) {
  ExperimentConfig a = ExperimentConfig::load(a_path);
  ExperimentConfig b = ExperimentConfig::load(b_path);
  if (const auto s = env_seed()) a.seed = *s;
  const CompareReport rep = compare_strategies(a, b, trials);

  nlohmann::json j;
  j["a_strategy"] = to_string(a.strategy);
  j["b_strategy"] = to_string(b.strategy);
  j["trials"] = trials;
  j["a_wins"] = rep.a_wins;
  j["b_wins"] = rep.b_wins;
  j["ties"] = rep.ties;
  j["sign_test_p"] = rep.sign_test_p;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : rep.trials)
    rows.push_back({{"trial", t.trial},
                    {"a_pass", t.a_pass},
                    {"b_pass", t.b_pass},
                    {"a_accuracy", t.a_accuracy},
                    {"b_accuracy", t.b_accuracy}});
  j["per_trial"] = rows;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "report.json").string(), j.dump(2) + "\n");
    std::ofstream a_csv(fs::path(out_dir) / "a_steps.csv");
    std::ofstream b_csv(fs::path(out_dir) / "b_steps.csv");
    a_csv << MetricsRecord::csv_header() << '\n';
    b_csv << MetricsRecord::csv_header() << '\n';
    for (const auto& m : rep.a_steps) a_csv << m.to_csv() << '\n';
    for (const auto& m : rep.b_steps) b_csv << m.to_csv() << '\n';
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resample-regroup-reshape training simulator and analysis tools"};
  app.require_subcommand(1);

  // gen-perturb
  std::string gp_kind = "lorem", gp_pool, gp_prompt;
  int gp_min = 100, gp_max = 300;
  std::uint64_t gp_seed = 0;
  bool gp_boundary = false;
  auto* gen = app.add_subcommand("gen-perturb", "Generate perturbation text");
  gen->add_option("--kind", gp_kind,
                  "lorem|fake_english|random_ascii|random_token|unigram");
  gen->add_option("--min-len", gp_min, "Minimum token length");
  gen->add_option("--max-len", gp_max, "Maximum token length");
  gen->add_option("--seed", gp_seed, "RNG seed");
  gen->add_flag("--boundary", gp_boundary, "Append the boundary instruction");
  gen->add_option("--pool", gp_pool, "Word pool file (default: built-in)");
  gen->add_option("--prompt", gp_prompt, "Prepend to this prompt and print");

  // ngram-train
  std::string nt_corpus, nt_out = "model.json";
  int nt_order = 2;
  double nt_alpha = 0.01;
  auto* ntrain = app.add_subcommand("ngram-train", "Train an n-gram model");
  ntrain->add_option("--corpus", nt_corpus, "One sequence per line")->required();
  ntrain->add_option("--order", nt_order, "Model order (n)");
  ntrain->add_option("--alpha", nt_alpha, "Additive smoothing");
  ntrain->add_option("--out", nt_out, "Output model path");

  // ngram-score
  std::string ns_model, ns_text, ns_file;
  auto* nscore =
      app.add_subcommand("ngram-score", "Print 'perplexity<TAB>logprob'");
  nscore->add_option("--model", ns_model, "Model path")->required();
  nscore->add_option("--text", ns_text, "Text to score");
  nscore->add_option("--file", ns_file, "File to score instead of --text");

  // curves
  double cv_gamma = 0.1, cv_eps = 0.2;
  int cv_grid = 1000, cv_g = 8, cv_gp = 24;
  std::string cv_out = "curves";
  auto* curves = app.add_subcommand(
      "curves", "Export gradient-bound curves and the amplification table");
  curves->add_option("--gamma", cv_gamma, "Shaping gamma");
  curves->add_option("--eps", cv_eps, "Clip epsilon");
  curves->add_option("--grid", cv_grid, "Grid points in (0,1)");
  curves->add_option("--g", cv_g, "Group size G");
  curves->add_option("--g-prime", cv_gp, "Resample size G'");
  curves->add_option("--out", cv_out, "Output directory");

  // bank
  int bk_questions = 8, bk_vocab = 6, bk_len = 3;
  std::uint64_t bk_seed = 0;
  std::string bk_out = "bank.json";
  auto* bank = app.add_subcommand("bank", "Generate an exploration question bank");
  bank->add_option("--questions", bk_questions, "Bank size");
  bank->add_option("--vocab", bk_vocab, "Vocabulary size");
  bank->add_option("--len", bk_len, "Sequence length");
  bank->add_option("--seed", bk_seed, "RNG seed");
  bank->add_option("--out", bk_out, "Output path");

  // train
  std::string tr_config, tr_out = "run";
  auto* train = app.add_subcommand("train", "Run the training simulator");
  train->add_option("--config", tr_config, "Experiment config JSON")->required();
  train->add_option("--out", tr_out, "Output directory");

  // eval
  std::string ev_params, ev_bank;
  int ev_g = 8;
  double ev_temp = 1.0;
  std::uint64_t ev_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate saved parameters");
  eval_cmd->add_option("--params", ev_params, "Policy params JSON")->required();
  eval_cmd->add_option("--bank", ev_bank, "Question bank JSON")->required();
  eval_cmd->add_option("--g", ev_g, "Samples per question");
  eval_cmd->add_option("--temperature", ev_temp, "Sampling temperature");
  eval_cmd->add_option("--seed", ev_seed, "RNG seed");

  // compare
  std::string cp_a, cp_b, cp_out;
  int cp_trials = 20;
  auto* compare =
      app.add_subcommand("compare", "Seed-matched paired strategy comparison");
  compare->add_option("--a", cp_a, "Config for strategy A")->required();
  compare->add_option("--b", cp_b, "Config for strategy B")->required();
  compare->add_option("--trials", cp_trials, "Paired trials");
  compare->add_option("--out", cp_out, "Optional report directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_perturb(gp_kind, gp_min, gp_max, gp_seed, gp_boundary,
                             gp_pool, gp_prompt);
    if (ntrain->parsed())
      return cmd_ngram_train(nt_corpus, nt_order, nt_alpha, nt_out);
    if (nscore->parsed()) return cmd_ngram_score(ns_model, ns_text, ns_file);
    if (curves->parsed())
      return cmd_curves(cv_gamma, cv_eps, cv_grid, cv_g, cv_gp, cv_out);
    if (bank->parsed())
      return cmd_bank(bk_questions, bk_vocab, bk_len, bk_seed, bk_out);
    if (train->parsed()) return cmd_train(tr_config, tr_out);
    if (eval_cmd->parsed())
      return cmd_eval(ev_params, ev_bank, ev_g, ev_temp, ev_seed);
    if (compare->parsed()) return cmd_compare(cp_a, cp_b, cp_trials, cp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
