#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "lope/common.hpp"
#include "lope/ngram.hpp"
#include "lope/word_pool.hpp"

namespace lope {

enum class PerturbKind {
  lorem,
  fake_english,
  random_ascii,
  random_token,
  unigram,
  ngram,
  corpus_filtered
};

std::string to_string(PerturbKind kind);
PerturbKind perturb_kind_from_string(const std::string& name);

// Appended verbatim when append_boundary is set.
inline constexpr std::string_view kBoundaryInstruction =
    "\nPlease reason step by step, and put your final answer within "
    "\\boxed{}.";

struct PerturbationSpec {
  PerturbKind kind = PerturbKind::lorem;
  int min_len = 100;
  int max_len = 300;
  std::uint64_t seed = 0;
  bool append_boundary = false;
  int ascii_chunk_width = 5;  // characters per length unit, random_ascii only

  void validate() const;  // throws ConfigError on a degenerate range
};

struct Perturbation {
  std::string text;
  int token_len = 0;
  PerturbKind kind = PerturbKind::lorem;
  std::uint64_t seed_used = 0;
};

// Uniform integer in [min_len, max_len].
int sample_length(const PerturbationSpec& spec, Rng& rng);

// lorem / unigram: space-joined uniform draws from the pool.
Perturbation gen_pool_sequence(const PerturbationSpec& spec,
                               const WordPool& pool, Rng& rng);

// Sentence-structured pool draws: first word capitalized, terminal
// punctuation from {., ?, !}, occasional internal commas.
Perturbation gen_fake_english(const PerturbationSpec& spec,
                              const WordPool& pool, Rng& rng);

// Uniform printable ASCII (0x20-0x7E). One length unit covers
// ascii_chunk_width consecutive characters.
Perturbation gen_random_ascii(const PerturbationSpec& spec, Rng& rng);

// Uniform draw over vocab minus the excluded set.
Perturbation gen_random_token(const PerturbationSpec& spec,
                              const WordPool& vocab,
                              const std::unordered_set<std::string>& special,
                              Rng& rng);

// Markov-chain sampling, restarted on early termination and truncated to
// the drawn length.
Perturbation gen_ngram_sequence(const PerturbationSpec& spec,
                                const NGramModel& model, Rng& rng);

// Uniform draw from corpus entries whose scorer perplexity lies in
// [ppl_low, ppl_high] and whose unit length lies in [min_len, max_len].
// An empty filtered subset is a ConfigError, never a silent fallback.
Perturbation gen_corpus_filtered(const PerturbationSpec& spec,
                                 const std::vector<std::string>& corpus,
                                 const NGramModel& scorer, double ppl_low,
                                 double ppl_high, Rng& rng);

// Appends kBoundaryInstruction. Not idempotent; callers invoke it once.
Perturbation apply_boundary_instruction(Perturbation p);

// delta ⊕ prompt with a single separator newline.
std::string perturb_prompt(const Perturbation& delta,
                           const std::string& prompt);

// Everything a generator dispatch may need; only the members matching
// spec.kind are touched.
struct PerturbResources {
  const WordPool* pool = nullptr;
  const NGramModel* model = nullptr;
  const std::vector<std::string>* corpus = nullptr;
  const NGramModel* scorer = nullptr;
  std::unordered_set<std::string> special;
  double ppl_low = 0.0;
  double ppl_high = 0.0;
};

// Seeds an RNG from spec.seed, runs the generator for spec.kind, and
// applies the boundary instruction when requested.
Perturbation generate_perturbation(const PerturbationSpec& spec,
                                   const PerturbResources& res);

}  // namespace lope
