#include "lope/word_pool.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "lope/common.hpp"

namespace lope {

namespace {

const char* const kLoremWords[] = {
    "ad",         "adipiscing", "aliqua",       "aliquip",  "amet",
    "anim",       "aute",       "cillum",       "commodo",  "consectetur",
    "consequat",  "culpa",      "cupidatat",    "deserunt", "do",
    "dolor",      "dolore",     "duis",         "ea",       "eiusmod",
    "elit",       "enim",       "esse",         "est",      "et",
    "eu",         "ex",         "excepteur",    "exercitation",
    "fugiat",     "id",         "in",           "incididunt",
    "ipsum",      "irure",      "labore",       "laboris",  "laborum",
    "lorem",      "magna",      "minim",        "mollit",   "nisi",
    "non",        "nostrud",    "nulla",        "occaecat", "officia",
    "pariatur",   "proident",   "qui",          "quis",     "reprehenderit",
    "sed",        "sint",       "sit",          "sunt",     "tempor",
    "ullamco",    "ut",         "velit",        "veniam",   "voluptate"};

const char* const kLatin50Words[] = {
    "et",   "in",    "est",  "non",   "ad",     "ut",    "cum",   "si",
    "de",   "quod",  "sed",  "qui",   "quae",   "esse",  "enim",  "atque",
    "aut",  "ab",    "ex",   "per",   "nec",    "etiam", "hoc",   "quam",
    "sunt", "autem", "iam",  "tamen", "omnia",  "nihil", "erat",  "inter",
    "ante", "post",  "sine", "sub",   "contra", "apud",  "ergo",  "ita",
    "nam",  "vel",   "dum",  "nisi",  "quia",   "ubi",   "unde",  "tum",
    "modo", "ac"};

bool has_whitespace(const std::string& w) {
  return std::any_of(w.begin(), w.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

bool WordPool::contains(const std::string& w) const {
  return std::find(words.begin(), words.end(), w) != words.end();
}

void validate_pool(const WordPool& pool) {
  if (pool.words.empty())
    throw ConfigError("word pool '" + pool.name + "' is empty");
  std::unordered_set<std::string> seen;
  for (const auto& w : pool.words) {
    if (w.empty())
      throw ConfigError("word pool '" + pool.name + "' has an empty entry");
    if (has_whitespace(w))
      throw ConfigError("word pool '" + pool.name +
                        "' entry contains whitespace: '" + w + "'");
    if (!seen.insert(w).second)
      throw ConfigError("word pool '" + pool.name + "' has duplicate: '" + w +
                        "'");
  }
}

WordPool load_word_pool(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open word pool file: " + path);
  WordPool pool;
  pool.name = name.empty() ? path : name;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    pool.words.push_back(line);
  }
  validate_pool(pool);
  return pool;
}

WordPool default_lorem_pool() {
  WordPool pool;
  pool.name = "lorem63";
  pool.words.assign(std::begin(kLoremWords), std::end(kLoremWords));
  return pool;
}

WordPool default_latin50_pool() {
  WordPool pool;
  pool.name = "latin50";
  pool.words.assign(std::begin(kLatin50Words), std::end(kLatin50Words));
  return pool;
}

}  // namespace lope
