#include <doctest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "segsample/corpus.hpp"
#include "segsample/error.hpp"
#include "segsample/utf8.hpp"

using namespace segsample;

TEST_SUITE("corpus") {

TEST_CASE("utf8 decode and encode round trip") {
  const std::string s = "a\xC3\xA9\xE2\x96\x81\xF0\x9F\x98\x80";
  const auto d = utf8::decode(s);
  REQUIRE(d);
  CHECK(*d == std::u32string{U'a', U'é', kMarker, U'\U0001F600'});
  CHECK(utf8::encode(*d) == s);
}

TEST_CASE("utf8 rejects ill-formed input") {
  CHECK_FALSE(utf8::decode("\xC0\xAF"));          // overlong
  CHECK_FALSE(utf8::decode("\xED\xA0\x80"));      // surrogate
  CHECK_FALSE(utf8::decode("\xF4\x90\x80\x80"));  // > U+10FFFF
  CHECK_FALSE(utf8::decode("\xE2\x96"));          // truncated
  CHECK_FALSE(utf8::decode("\x80"));
  CHECK_THROWS_AS(utf8::decode_or_throw("\xff"), std::invalid_argument);
}

TEST_CASE("utf8 round trip on random scalar values") {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 2000; ++t) {
    std::u32string s;
    for (int i = 0, n = static_cast<int>(gen() % 8); i < n; ++i) {
      char32_t c;
      do {
        c = static_cast<char32_t>(gen() % 0x110000);
      } while (c >= 0xD800 && c <= 0xDFFF);
      s.push_back(c);
    }
    CHECK(utf8::decode(utf8::encode(s)) == s);
  }
}

TEST_CASE("lowercase and whitespace normalization") {
  const auto c = parse_corpus("Set A Timer\n", Normalization::LowercaseWhitespace);
  REQUIRE(c.utterances.size() == 1);
  CHECK(c.utterances[0] == Words{"set", "a", "timer"});
  CHECK(normalize_line("\xC3\x89T\xC3\x89", Normalization::LowercaseWhitespace) ==
        Words{"\xC3\xA9t\xC3\xA9"});
  CHECK(normalize_line("Keep\tCase", Normalization::AsIs) == Words{"Keep", "Case"});
}

TEST_CASE("empty lines are dropped and counted") {
  const auto c = parse_corpus("  \n\nhello\n", Normalization::LowercaseWhitespace);
  REQUIRE(c.utterances.size() == 1);
  CHECK(c.utterances[0] == Words{"hello"});
  CHECK(c.dropped_lines == 2);
}

TEST_CASE("CRLF line endings") {
  const auto c = parse_corpus("a b\r\nc\r\n", Normalization::AsIs);
  REQUIRE(c.utterances.size() == 2);
  CHECK(c.utterances[0] == Words{"a", "b"});
  CHECK(c.utterances[1] == Words{"c"});
}

TEST_CASE("load_corpus counts tokens") {
  const auto dir = oracle::temp_dir("corpus");
  oracle::write_text(dir / "c.txt", "a b\nb c\na\n");
  const auto c = load_corpus((dir / "c.txt").string());
  CHECK(c.utterances.size() == 3);
  CHECK(c.token_count() == 5);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed input reports the line") {
  try {
    parse_corpus("ok\nbad \xff byte\n", Normalization::AsIs, "in.txt");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("in.txt:2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_corpus("x\xE2\x96\x81y\n", Normalization::AsIs), DataError);
  CHECK_THROWS_AS(load_corpus("/nonexistent/file.txt"), IoError);
}

TEST_CASE("word inventory") {
  Corpus c;
  c.utterances = {{"a", "b"}, {"a"}};
  auto inv = word_inventory(c);
  CHECK(inv.counts == std::map<std::string, std::uint64_t>{{"a", 2}, {"b", 1}});
  CHECK(inv.total() == 3);

  c.utterances = {{"x"}};
  CHECK(word_inventory(c).counts == std::map<std::string, std::uint64_t>{{"x", 1}});
  c.utterances = {{"a", "a"}};
  CHECK(word_inventory(c).counts == std::map<std::string, std::uint64_t>{{"a", 2}});
  CHECK_THROWS_AS(word_inventory(Corpus{}), std::invalid_argument);
}

TEST_CASE("inventory total equals token count on random corpora") {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 100; ++t) {
    Corpus c;
    for (int u = 0, n = 1 + static_cast<int>(gen() % 5); u < n; ++u) {
      Words w;
      for (int i = 0, m = 1 + static_cast<int>(gen() % 6); i < m; ++i) {
        w.push_back(std::string(1, static_cast<char>('a' + gen() % 4)));
      }
      c.utterances.push_back(w);
    }
    CHECK(word_inventory(c).total() == c.token_count());
  }
}

TEST_CASE("unseen word rate") {
  WordInventory train;
  train.counts = {{"a", 1}, {"b", 1}};
  Corpus test;
  test.utterances = {{"a", "c"}};
  auto r = unseen_word_rate(train, test);
  CHECK(r.words == std::set<std::string>{"c"});
  CHECK(r.rate == doctest::Approx(0.5));

  test.utterances = {{"a", "b", "a"}};
  r = unseen_word_rate(train, test);
  CHECK(r.words.empty());
  CHECK(r.rate == 0.0);
}

TEST_CASE("unseen word rate on a 1000-token set with 19 injected tokens") {
  WordInventory train;
  Corpus test;
  Words utt;
  for (int i = 0; i < 100; ++i) train.counts["w" + std::to_string(i)] = 1;
  for (int i = 0; i < 1000; ++i) {
    utt.push_back(i % 50 == 7 && i < 950 ? "oov" + std::to_string(i) : "w" + std::to_string(i % 100));
  }
  test.utterances = {utt};
  const auto r = unseen_word_rate(train, test);
  CHECK(r.unseen_tokens == 19);
  CHECK(r.total_tokens == 1000);
  CHECK(r.rate == doctest::Approx(0.019));
}

TEST_CASE("word list loader") {
  const auto dir = oracle::temp_dir("words");
  oracle::write_text(dir / "w.txt", "alpha\n\nbeta\n");
  const auto inv = load_word_list((dir / "w.txt").string());
  CHECK(inv.contains("alpha"));
  CHECK(inv.contains("beta"));
  CHECK(inv.size() == 2);
  oracle::write_text(dir / "bad.txt", "ok\ntwo words\n");
  try {
    load_word_list((dir / "bad.txt").string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 2);
  }
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
