#include "lope/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace lope {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::vector<std::string> split_units(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> units;
  std::string u;
  while (in >> u) units.push_back(u);
  return units;
}

int NGramModel::unit_id(const std::string& unit) const {
  auto it = vocab_index_.find(unit);
  return it == vocab_index_.end() ? -3 : it->second;
}

int NGramModel::num_outcomes() const {
  return static_cast<int>(vocab_.size()) + (use_end_marker_ ? 1 : 0);
}

std::vector<int> NGramModel::start_context() const {
  return std::vector<int>(static_cast<std::size_t>(order_ - 1), kStart);
}

void NGramModel::push_context(std::vector<int>& ctx, int unit) const {
  if (ctx.empty()) return;
  ctx.erase(ctx.begin());
  ctx.push_back(unit);
}

NGramModel NGramModel::train(
    const std::vector<std::vector<std::string>>& corpus, int order,
    double alpha) {
  if (corpus.empty()) throw ConfigError("ngram train: empty corpus");
  if (order < 1) throw ConfigError("ngram train: order must be >= 1");
  if (alpha < 0.0) throw ConfigError("ngram train: alpha must be >= 0");

  NGramModel m;
  m.order_ = order;
  m.alpha_ = alpha;
  m.use_end_marker_ = true;
  for (const auto& seq : corpus)
    for (const auto& u : seq)
      if (m.vocab_index_.emplace(u, 0).second) m.vocab_.push_back(u);
  std::sort(m.vocab_.begin(), m.vocab_.end());
  for (std::size_t i = 0; i < m.vocab_.size(); ++i)
    m.vocab_index_[m.vocab_[i]] = static_cast<int>(i);

  for (const auto& seq : corpus) {
    std::vector<int> ctx = m.start_context();
    for (const auto& u : seq) {
      const int id = m.unit_id(u);
      m.counts_[ctx][id] += 1.0;
      m.totals_[ctx] += 1.0;
      m.push_context(ctx, id);
    }
    m.counts_[ctx][kEnd] += 1.0;
    m.totals_[ctx] += 1.0;
  }
  return m;
}

NGramModel NGramModel::uniform_unigram(const WordPool& pool) {
  validate_pool(pool);
  NGramModel m;
  m.order_ = 1;
  m.alpha_ = 0.0;
  m.use_end_marker_ = false;
  m.vocab_ = pool.words;
  std::sort(m.vocab_.begin(), m.vocab_.end());
  for (std::size_t i = 0; i < m.vocab_.size(); ++i)
    m.vocab_index_[m.vocab_[i]] = static_cast<int>(i);
  std::vector<int> ctx;  // unigram context is empty
  for (std::size_t i = 0; i < m.vocab_.size(); ++i) {
    m.counts_[ctx][static_cast<int>(i)] = 1.0;
  }
  m.totals_[ctx] = static_cast<double>(m.vocab_.size());
  return m;
}

double NGramModel::cond_prob(const std::vector<int>& context, int unit) const {
  const int outcomes = num_outcomes();
  auto tot = totals_.find(context);
  if (tot == totals_.end()) {
    // unseen context: purely the smoothing distribution
    return alpha_ > 0.0 ? 1.0 / outcomes : 0.0;
  }
  double count = 0.0;
  auto row = counts_.find(context);
  if (row != counts_.end()) {
    auto it = row->second.find(unit);
    if (it != row->second.end()) count = it->second;
  }
  return (count + alpha_) / (tot->second + alpha_ * outcomes);
}

double NGramModel::logprob(const std::vector<std::string>& seq) const {
  if (!trained()) throw ConfigError("ngram logprob: model not trained");
  double lp = 0.0;
  std::vector<int> ctx = start_context();
  for (const auto& u : seq) {
    const int id = unit_id(u);
    const double p = id == -3 ? 0.0 : cond_prob(ctx, id);
    lp += p > 0.0 ? std::log(p) : kNegInf;
    push_context(ctx, id);
  }
  if (use_end_marker_) {
    const double p = cond_prob(ctx, kEnd);
    lp += p > 0.0 ? std::log(p) : kNegInf;
  }
  return lp;
}

double NGramModel::perplexity(const std::vector<std::string>& seq) const {
  const double lp = logprob(seq);
  const double len =
      static_cast<double>(seq.size()) + (use_end_marker_ ? 1.0 : 0.0);
  return std::exp(-lp / len);
}

std::vector<std::string> NGramModel::sample(Rng& rng, int max_len) const {
  if (!trained()) throw ConfigError("ngram sample: model not trained");
  std::vector<std::string> out;
  std::vector<int> ctx = start_context();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (static_cast<int>(out.size()) < max_len) {
    const double u = unif(rng);
    double acc = 0.0;
    int chosen = static_cast<int>(vocab_.size()) - 1;
    for (int id = 0; id < static_cast<int>(vocab_.size()); ++id) {
      acc += cond_prob(ctx, id);
      if (u < acc) {
        chosen = id;
        break;
      }
    }
    if (use_end_marker_ && u >= acc) chosen = kEnd;
    if (chosen == kEnd) break;
    out.push_back(vocab_[static_cast<std::size_t>(chosen)]);
    push_context(ctx, chosen);
  }
  return out;
}

std::string NGramModel::to_json() const {
  nlohmann::json j;
  j["format"] = "lope-ngram";
  j["version"] = 1;
  j["order"] = order_;
  j["alpha"] = alpha_;
  j["use_end_marker"] = use_end_marker_;
  j["vocab"] = vocab_;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [ctx, row] : counts_) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [id, count] : row)
      entries.push_back({id, count});
    rows.push_back({{"ctx", ctx}, {"counts", entries}});
  }
  j["rows"] = rows;
  return j.dump();
}

NGramModel NGramModel::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "lope-ngram")
    throw ConfigError("ngram load: unrecognized model format");
  if (j.value("version", 0) != 1)
    throw ConfigError("ngram load: unsupported model version");
  NGramModel m;
  m.order_ = j.at("order").get<int>();
  m.alpha_ = j.at("alpha").get<double>();
  m.use_end_marker_ = j.at("use_end_marker").get<bool>();
  m.vocab_ = j.at("vocab").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < m.vocab_.size(); ++i)
    m.vocab_index_[m.vocab_[i]] = static_cast<int>(i);
  for (const auto& row : j.at("rows")) {
    const auto ctx = row.at("ctx").get<std::vector<int>>();
    double total = 0.0;
    for (const auto& entry : row.at("counts")) {
      const int id = entry.at(0).get<int>();
      const double count = entry.at(1).get<double>();
      m.counts_[ctx][id] = count;
      total += count;
    }
    m.totals_[ctx] = total;
  }
  return m;
}

void NGramModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file: " + path);
  out << to_json() << "\n";
}

NGramModel NGramModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace lope
