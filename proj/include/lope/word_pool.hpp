#pragma once

#include <string>
#include <vector>

namespace lope {

struct WordPool {
  std::string name;
  std::vector<std::string> words;

  std::size_t size() const { return words.size(); }
  bool contains(const std::string& w) const;
};

// Throws ConfigError if the pool is empty, has duplicates, or contains
// empty / whitespace-carrying entries.
void validate_pool(const WordPool& pool);

// Line-delimited file, UTF-8, one word per line. Blank lines and lines
// starting with '#' are ignored. The result is validated.
WordPool load_word_pool(const std::string& path, const std::string& name = "");

// The 63 distinct words of the canonical Lorem Ipsum paragraph.
WordPool default_lorem_pool();

// A 50-entry high-frequency Latin pool.
WordPool default_latin50_pool();

}  // namespace lope
