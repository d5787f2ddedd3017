#include "lope/perturb.hpp"

#include <algorithm>
#include <cctype>

namespace lope {

std::string to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::lorem: return "lorem";
    case PerturbKind::fake_english: return "fake_english";
    case PerturbKind::random_ascii: return "random_ascii";
    case PerturbKind::random_token: return "random_token";
    case PerturbKind::unigram: return "unigram";
    case PerturbKind::ngram: return "ngram";
    case PerturbKind::corpus_filtered: return "corpus_filtered";
  }
  return "unknown";
}

PerturbKind perturb_kind_from_string(const std::string& name) {
  for (auto kind :
       {PerturbKind::lorem, PerturbKind::fake_english, PerturbKind::random_ascii,
        PerturbKind::random_token, PerturbKind::unigram, PerturbKind::ngram,
        PerturbKind::corpus_filtered}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown perturbation kind: " + name);
}

void PerturbationSpec::validate() const {
  if (min_len < 1 || min_len > max_len)
    throw ConfigError("perturbation spec: need 1 <= min_len <= max_len");
  if (ascii_chunk_width < 1)
    throw ConfigError("perturbation spec: ascii_chunk_width must be >= 1");
}

int sample_length(const PerturbationSpec& spec, Rng& rng) {
  spec.validate();
  std::uniform_int_distribution<int> dist(spec.min_len, spec.max_len);
  return dist(rng);
}

Perturbation gen_pool_sequence(const PerturbationSpec& spec,
                               const WordPool& pool, Rng& rng) {
  validate_pool(pool);
  const int len = sample_length(spec, rng);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::string text;
  for (int i = 0; i < len; ++i) {
    if (i) text += ' ';
    text += pool.words[pick(rng)];
  }
  return {text, len, spec.kind, spec.seed};
}

Perturbation gen_fake_english(const PerturbationSpec& spec,
                              const WordPool& pool, Rng& rng) {
  validate_pool(pool);
  const int len = sample_length(spec, rng);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> sentence_len(4, 12);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const char terminals[] = {'.', '?', '!'};
  std::uniform_int_distribution<int> pick_terminal(0, 2);

  std::string text;
  int emitted = 0;
  while (emitted < len) {
    const int target = std::min(sentence_len(rng), len - emitted);
    for (int i = 0; i < target; ++i) {
      std::string word = pool.words[pick(rng)];
      if (i == 0) word[0] = static_cast<char>(std::toupper(
                      static_cast<unsigned char>(word[0])));
      if (!text.empty()) text += ' ';
      text += word;
      const bool last = i + 1 == target;
      if (last)
        text += terminals[pick_terminal(rng)];
      else if (unif(rng) < 0.1)
        text += ',';
    }
    emitted += target;
  }
  return {text, len, spec.kind, spec.seed};
}

Perturbation gen_random_ascii(const PerturbationSpec& spec, Rng& rng) {
  const int len = sample_length(spec, rng);
  std::uniform_int_distribution<int> pick(0x20, 0x7E);
  std::string text;
  text.reserve(static_cast<std::size_t>(len) * spec.ascii_chunk_width);
  for (int i = 0; i < len * spec.ascii_chunk_width; ++i)
    text += static_cast<char>(pick(rng));
  return {text, len, spec.kind, spec.seed};
}

Perturbation gen_random_token(const PerturbationSpec& spec,
                              const WordPool& vocab,
                              const std::unordered_set<std::string>& special,
                              Rng& rng) {
  validate_pool(vocab);
  std::vector<std::string> usable;
  for (const auto& w : vocab.words)
    if (!special.count(w)) usable.push_back(w);
  if (usable.empty())
    throw ConfigError("random_token: every vocabulary entry is excluded");
  const int len = sample_length(spec, rng);
  std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
  std::string text;
  for (int i = 0; i < len; ++i) {
    if (i) text += ' ';
    text += usable[pick(rng)];
  }
  return {text, len, spec.kind, spec.seed};
}

Perturbation gen_ngram_sequence(const PerturbationSpec& spec,
                                const NGramModel& model, Rng& rng) {
  if (!model.trained())
    throw ConfigError("ngram perturbation: model not trained");
  const int len = sample_length(spec, rng);
  std::vector<std::string> units;
  while (static_cast<int>(units.size()) < len) {
    auto chunk = model.sample(rng, len - static_cast<int>(units.size()));
    if (chunk.empty()) {
      // chain immediately terminated; restart to honor the length budget
      continue;
    }
    units.insert(units.end(), chunk.begin(), chunk.end());
  }
  std::string text;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (i) text += ' ';
    text += units[i];
  }
  return {text, len, spec.kind, spec.seed};
}

Perturbation gen_corpus_filtered(const PerturbationSpec& spec,
                                 const std::vector<std::string>& corpus,
                                 const NGramModel& scorer, double ppl_low,
                                 double ppl_high, Rng& rng) {
  spec.validate();
  if (!(ppl_low < ppl_high))
    throw ConfigError("corpus_filtered: need ppl_low < ppl_high");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto units = split_units(corpus[i]);
    const int len = static_cast<int>(units.size());
    if (len < spec.min_len || len > spec.max_len) continue;
    const double ppl = scorer.perplexity(units);
    if (ppl >= ppl_low && ppl <= ppl_high) eligible.push_back(i);
  }
  if (eligible.empty())
    throw ConfigError("corpus_filtered: no corpus entry matches the "
                      "perplexity and length bands");
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  const std::size_t idx = eligible[pick(rng)];
  const int len = static_cast<int>(split_units(corpus[idx]).size());
  return {corpus[idx], len, spec.kind, spec.seed};
}

Perturbation apply_boundary_instruction(Perturbation p) {
  p.text += kBoundaryInstruction;
  return p;
}

std::string perturb_prompt(const Perturbation& delta,
                           const std::string& prompt) {
  return delta.text + "\n" + prompt;
}

Perturbation generate_perturbation(const PerturbationSpec& spec,
                                   const PerturbResources& res) {
  spec.validate();
  Rng rng(spec.seed);
  Perturbation p;
  switch (spec.kind) {
    case PerturbKind::lorem:
    case PerturbKind::unigram:
      if (!res.pool) throw ConfigError("generator needs a word pool");
      p = gen_pool_sequence(spec, *res.pool, rng);
      break;
    case PerturbKind::fake_english:
      if (!res.pool) throw ConfigError("generator needs a word pool");
      p = gen_fake_english(spec, *res.pool, rng);
      break;
    case PerturbKind::random_ascii:
      p = gen_random_ascii(spec, rng);
      break;
    case PerturbKind::random_token:
      if (!res.pool) throw ConfigError("generator needs a vocabulary");
      p = gen_random_token(spec, *res.pool, res.special, rng);
      break;
    case PerturbKind::ngram:
      if (!res.model) throw ConfigError("generator needs an ngram model");
      p = gen_ngram_sequence(spec, *res.model, rng);
      break;
    case PerturbKind::corpus_filtered:
      if (!res.corpus || !res.scorer)
        throw ConfigError("generator needs a corpus and a scorer");
      p = gen_corpus_filtered(spec, *res.corpus, *res.scorer, res.ppl_low,
                              res.ppl_high, rng);
      break;
  }
  if (spec.append_boundary) p = apply_boundary_instruction(std::move(p));
  return p;
}

}  // namespace lope
