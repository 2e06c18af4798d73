#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "segsample/error.hpp"
#include "segsample/metrics.hpp"

using namespace segsample;

namespace {

Words split(const std::string& s) { return normalize_line(s, Normalization::AsIs); }

TranscriptSet set_of(std::vector<std::pair<std::string, std::string>> rows) {
  TranscriptSet out;
  for (auto& [id, text] : rows) out[id] = split(text);
  return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("alignment basics") {
  const auto ops = align(split("a b c"), split("a b c"));
  CHECK(ops.size() == 3);
  for (const auto& op : ops) CHECK(op.kind == EditKind::Match);
  CHECK(edit_count(ops) == 0);

  const auto del = align(Words{"a"}, Words{});
  REQUIRE(del.size() == 1);
  CHECK(del[0] == AlignmentOp{EditKind::Deletion, "a", std::nullopt});
  const auto ins = align(Words{}, Words{"a"});
  REQUIRE(ins.size() == 1);
  CHECK(ins[0].kind == EditKind::Insertion);
}

TEST_CASE("alignment tie-break prefers substitution, then deletion") {
  // "a b" vs "c": substitute a->c and delete b, rather than delete a first.
  const auto ops = align(split("a b"), split("c"));
  REQUIRE(ops.size() == 2);
  CHECK(ops[0] == AlignmentOp{EditKind::Substitution, "a", "c"});
  CHECK(ops[1] == AlignmentOp{EditKind::Deletion, "b", std::nullopt});
}

TEST_CASE("alignment cost agrees with the reference DP") {
  std::mt19937_64 gen(21);
  for (int t = 0; t < 2000; ++t) {
    Words a(gen() % 9), b(gen() % 9);
    for (auto& w : a) w = std::string(1, static_cast<char>('a' + gen() % 3));
    for (auto& w : b) w = std::string(1, static_cast<char>('a' + gen() % 3));
    const auto ops = align(a, b);
    CHECK(edit_count(ops) == oracle::levenshtein(a, b));
    Words ra, rb;
    for (const auto& op : ops) {
      if (op.ref_word) ra.push_back(*op.ref_word);
      if (op.hyp_word) rb.push_back(*op.hyp_word);
      if (op.kind == EditKind::Match) CHECK(op.ref_word == op.hyp_word);
      if (op.kind == EditKind::Substitution) CHECK(op.ref_word != op.hyp_word);
    }
    CHECK(ra == a);
    CHECK(rb == b);
  }
}

TEST_CASE("wer") {
  const auto refs = set_of({{"u1", "a b c d e f g h i j"}});
  CHECK(wer(refs, refs).wer == 0.0);
  const auto r = wer(refs, set_of({{"u1", "a b c d e x g h i j k"}}));
  CHECK(r.substitutions == 1);
  CHECK(r.insertions == 1);
  CHECK(r.wer == doctest::Approx(0.2));
}

TEST_CASE("pooled wer differs from the per-utterance mean") {
  const auto refs = set_of({{"u1", "a"}, {"u2", "a b c d"}});
  const auto hyps = set_of({{"u1", "x"}, {"u2", "a b c d"}});
  const auto r = wer(refs, hyps);
  CHECK(r.wer == doctest::Approx(1.0 / 5.0));  // mean of per-utterance WERs would be 0.5
  CHECK(r.ref_token_count == 5);
  CHECK(r.utterances == 2);
}

TEST_CASE("wer with mismatched ids is a data error") {
  CHECK_THROWS_AS(wer(set_of({{"u1", "a"}}), set_of({{"u2", "a"}})), DataError);
  CHECK_THROWS_AS(wer(set_of({{"u1", "a"}}), set_of({{"u1", "a"}, {"u2", "b"}})), DataError);
}

TEST_CASE("werr") {
  CHECK(werr(1.00, 0.939) == doctest::Approx(6.1));
  CHECK(werr(0.893, 0.817) == doctest::Approx(8.5106).epsilon(1e-4));
  CHECK(std::abs(werr(0.893, 0.817) - 8.43) < 0.5);
  CHECK(werr(0.5, 0.5) == 0.0);
  CHECK_THROWS_AS(werr(0.0, 0.1), std::invalid_argument);
}

TEST_CASE("oracle wer") {
  const auto refs = set_of({{"u1", "a b c"}, {"u2", "d e"}});
  NBestSet lists = parse_nbest(
      "u1\t1\t-1\ta x c\nu1\t2\t-2\ta b c\nu2\t1\t-1\td\nu2\t2\t-3\tq e\n");
  const auto o = oracle_wer(refs, lists);
  CHECK(o.errors() == 1);  // u1 exact, u2 one edit (rank 1 wins the tie)
  CHECK(o.deletions == 1);
  CHECK(o.wer <= wer(refs, first_best(lists)).wer);

  NBestSet single = parse_nbest("u1\t1\t0\ta x c\nu2\t1\t0\td\n");
  CHECK(oracle_wer(refs, single).wer == wer(refs, first_best(single)).wer);
}

TEST_CASE("oracle wer never exceeds first-best wer") {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 200; ++t) {
    TranscriptSet refs;
    NBestSet lists;
    for (int u = 0; u < 3; ++u) {
      const std::string id = "u" + std::to_string(u);
      Words r(1 + gen() % 5);
      for (auto& w : r) w = std::string(1, static_cast<char>('a' + gen() % 3));
      refs[id] = r;
      NBestList l{id, {}};
      for (std::size_t k = 1, n = 1 + gen() % 4; k <= n; ++k) {
        Words h(gen() % 6);
        for (auto& w : h) w = std::string(1, static_cast<char>('a' + gen() % 3));
        l.hypotheses.push_back(Hypothesis{k, 0.0, h});
      }
      lists[id] = l;
    }
    CHECK(oracle_wer(refs, lists).wer <= wer(refs, first_best(lists)).wer);
  }
}

TEST_CASE("f-score from rounded table values") {
  CHECK(f_score(0.06, 0.09) == doctest::Approx(0.072));
  CHECK(f_score(0.0, 0.0) == 0.0);
}

TEST_CASE("unseen word precision and recall on a hand-built corpus") {
  WordInventory seen;
  for (const char* w : {"the", "cat", "sat", "on", "mat", "a", "dog"}) seen.counts[w] = 1;
  // Unseen words: zebra, okapi, quokka, lynx, ibis.
  const auto refs = set_of({{"u1", "the zebra sat"},      // match zebra: tp
                            {"u2", "a okapi on mat"},     // match okapi: tp
                            {"u3", "the quokka sat"},     // quokka -> cat: fn
                            {"u4", "the lynx"},           // lynx deleted: fn
                            {"u5", "a dog sat"}});        // ibis inserted: fp
  const auto hyps = set_of({{"u1", "the zebra sat"},
                            {"u2", "a okapi on mat"},
                            {"u3", "the cat sat"},
                            {"u4", "the"},
                            {"u5", "a dog ibis sat"}});
  const auto s = unseen_word_prf(refs, hyps, seen);
  CHECK(s.tp == 2);
  CHECK(s.fp == 1);
  CHECK(s.fn == 2);
  CHECK(s.precision == doctest::Approx(2.0 / 3.0));
  CHECK(s.recall == doctest::Approx(0.5));
  CHECK(s.f_score == doctest::Approx(4.0 / 7.0));
}

TEST_CASE("no unseen words gives zeros") {
  WordInventory seen;
  seen.counts = {{"a", 1}, {"b", 1}};
  const auto refs = set_of({{"u1", "a b"}});
  const auto s = unseen_word_prf(refs, set_of({{"u1", "b"}}), seen);
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f_score == 0.0);
}

TEST_CASE("tp + fn counts unseen reference tokens") {
  std::mt19937_64 gen(77);
  WordInventory seen;
  seen.counts = {{"a", 1}, {"b", 1}};
  for (int t = 0; t < 200; ++t) {
    TranscriptSet refs, hyps;
    std::size_t unseen_ref = 0;
    for (int u = 0; u < 3; ++u) {
      const std::string id = std::to_string(u);
      Words r(gen() % 6), h(gen() % 6);
      for (auto& w : r) {
        w = std::string(1, static_cast<char>('a' + gen() % 4));
        unseen_ref += seen.contains(w) ? 0 : 1;
      }
      for (auto& w : h) w = std::string(1, static_cast<char>('a' + gen() % 4));
      refs[id] = r;
      hyps[id] = h;
    }
    const auto s = unseen_word_prf(refs, hyps, seen);
    CHECK(s.tp + s.fn == unseen_ref);
  }
}

TEST_CASE("beam diversity") {
  std::string identical, unique, mixed;
  for (int k = 1; k <= 16; ++k) {
    identical += "u1\t" + std::to_string(k) + "\t0\tset a timer\n";
    unique += "u1\t" + std::to_string(k) + "\t0\tword" + std::to_string(k) + "\n";
    // 8 distinct texts each twice in u1; u2 has 4 distinct texts.
    mixed += "u1\t" + std::to_string(k) + "\t0\tw" + std::to_string((k - 1) / 2) + "\n";
    mixed += "u2\t" + std::to_string(k) + "\t0\tv" + std::to_string((k - 1) % 4) + "\n";
  }
  CHECK(beam_diversity(parse_nbest(identical)) == 0.0625);
  CHECK(beam_diversity(parse_nbest(unique)) == 1.0);
  CHECK(beam_diversity(parse_nbest(mixed)) == doctest::Approx((0.5 + 0.25) / 2));
}

TEST_CASE("n-best parsing") {
  const auto lists = parse_nbest("u1\t2\t-2\tb\nu1\t1\t-1\ta\nu2\t1\t0\t\n");
  REQUIRE(lists.at("u1").hypotheses.size() == 2);
  CHECK(lists.at("u1").hypotheses[0].words == Words{"a"});
  CHECK(lists.at("u2").hypotheses[0].words.empty());
  CHECK_THROWS_AS(parse_nbest("u1\t1\t0\ta\nu1\t3\t0\tb\n"), DataError);
  CHECK_THROWS_AS(parse_nbest("u1\tx\t0\ta\n"), DataError);
  CHECK_THROWS_AS(parse_nbest("u1\t1\tfoo\ta\n"), DataError);
  CHECK_THROWS_AS(parse_nbest("u1 1 0 a\n"), DataError);
}

TEST_CASE("transcript parsing") {
  const auto t = parse_transcripts("u1\thello world\nu2\t\n");
  CHECK(t.at("u1") == Words{"hello", "world"});
  CHECK(t.at("u2").empty());
  try {
    parse_transcripts("u1\ta\nu1\tb\n", "refs.tsv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_transcripts("no tab here\n"), DataError);
}

TEST_CASE("piece length histogram") {
  CHECK(piece_length_histogram({{"▁ab", "c"}}) == LengthHistogram{{2, 1}, {1, 1}});
  CHECK(piece_length_histogram({}).empty());
  const auto change = histogram_change({{1, 100}, {2, 50}}, {{1, 124}, {2, 40}});
  CHECK(change.at(1) == doctest::Approx(24.0));
  CHECK(change.at(2) == doctest::Approx(-20.0));
}

TEST_CASE("report lines") {
  std::ostringstream out;
  write_report_line(out, "wer", 0.25);
  write_report_line(out, "utterances", std::size_t{3});
  CHECK(out.str() == "wer\t0.25\nutterances\t3\n");
}

}  // TEST_SUITE
