#pragma once

#include <map>
#include <string>
#include <vector>

#include "lope/common.hpp"
#include "lope/word_pool.hpp"

namespace lope {

// Additive-smoothed n-gram model over whitespace units (or characters when
// the caller tokenizes that way). Sequences are padded with start markers
// and, unless use_end_marker is false, terminated by an end event that
// carries probability mass and counts toward perplexity length.
class NGramModel {
 public:
  static constexpr int kEnd = -1;
  static constexpr int kStart = -2;

  NGramModel() = default;

  static NGramModel train(const std::vector<std::vector<std::string>>& corpus,
                          int order, double alpha);

  // A scorer with conditional probability exactly 1/|pool| per word and no
  // end-marker mass; models a generator whose length is chosen externally.
  static NGramModel uniform_unigram(const WordPool& pool);

  bool trained() const { return order_ > 0; }
  int order() const { return order_; }
  double alpha() const { return alpha_; }
  bool use_end_marker() const { return use_end_marker_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  // P(unit | context); unit may be kEnd. Context entries are unit ids or
  // kStart. Unseen contexts fall back to the smoothed uniform distribution.
  double cond_prob(const std::vector<int>& context, int unit) const;

  // Sum of per-unit smoothed conditional log-probabilities, including the
  // end event when the model carries one. -inf (not an error) when alpha=0
  // and an unseen event occurs, or when a unit is out of vocabulary.
  double logprob(const std::vector<std::string>& seq) const;

  // exp(-logprob/len_eff); len_eff = |seq| (+1 with end marker).
  // Infinite logprob propagates to +inf, which callers treat as a flag.
  double perplexity(const std::vector<std::string>& seq) const;

  // Ancestral sampling from the padded start context until the end marker
  // fires or max_len units are emitted.
  std::vector<std::string> sample(Rng& rng, int max_len) const;

  int unit_id(const std::string& unit) const;  // -3 when unknown

  std::string to_json() const;
  static NGramModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static NGramModel load(const std::string& path);

 private:
  int order_ = 0;
  double alpha_ = 0.0;
  bool use_end_marker_ = true;
  std::vector<std::string> vocab_;
  std::map<std::string, int> vocab_index_;
  // context (ids, most recent last) -> (unit id -> count); count may be
  // fractional only through deserialization, training always yields ints.
  std::map<std::vector<int>, std::map<int, double>> counts_;
  std::map<std::vector<int>, double> totals_;

  int num_outcomes() const;  // |vocab| (+1 with end marker)
  std::vector<int> start_context() const;
  void push_context(std::vector<int>& ctx, int unit) const;
};

// Whitespace tokenization helper shared by CLI and generators.
std::vector<std::string> split_units(const std::string& line);

}  // namespace lope
