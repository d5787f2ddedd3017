#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "lope/common.hpp"
#include "lope/word_pool.hpp"

using namespace lope;

TEST_CASE("default pools have the documented sizes") {
  CHECK(default_lorem_pool().size() == 63);
  CHECK(default_latin50_pool().size() == 50);
  CHECK_NOTHROW(validate_pool(default_lorem_pool()));
  CHECK_NOTHROW(validate_pool(default_latin50_pool()));
  CHECK(default_lorem_pool().contains("lorem"));
  CHECK(default_lorem_pool().contains("ipsum"));
}

TEST_CASE("pool validation rejects bad entries") {
  WordPool p{"bad", {"a", "a"}};
  CHECK_THROWS_AS(validate_pool(p), ConfigError);
  p.words = {};
  CHECK_THROWS_AS(validate_pool(p), ConfigError);
  p.words = {"a b"};
  CHECK_THROWS_AS(validate_pool(p), ConfigError);
  p.words = {""};
  CHECK_THROWS_AS(validate_pool(p), ConfigError);
}

TEST_CASE("pool file loader skips comments and blanks") {
  const char* path = "test_pool_tmp.txt";
  {
    std::ofstream out(path);
    out << "# comment\nalpha\n\nbeta\n";
  }
  WordPool p = load_word_pool(path);
  CHECK(p.words == std::vector<std::string>{"alpha", "beta"});
  std::remove(path);
  CHECK_THROWS_AS(load_word_pool("does_not_exist.txt"), ConfigError);
}
