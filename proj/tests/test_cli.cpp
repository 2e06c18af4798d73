#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "oracles.hpp"
#include "segsample/bpe.hpp"
#include "segsample/metrics.hpp"
#include "segsample/regularizer.hpp"

using namespace segsample;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SEGSAMPLE_CLI;
const fs::path kData = SEGSAMPLE_TEST_DATA;

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Result run(const std::vector<std::string>& args, const fs::path& dir) {
  std::string cmd = quote(kCli);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote((dir / "stdout").string()) + " 2>" + quote((dir / "stderr").string());
  const int status = std::system(cmd.c_str());
  return Result{WIFEXITED(status) ? WEXITSTATUS(status) : -1, oracle::read_text(dir / "stdout"),
                oracle::read_text(dir / "stderr")};
}

std::string data(const char* name) { return (kData / name).string(); }

Corpus fixture_corpus() { return load_corpus(data("tiny_corpus.txt")); }

std::string join(const std::vector<std::string>& pieces) {
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) out += (i ? " " : "") + pieces[i];
  return out;
}

struct Fixture {
  fs::path dir = oracle::temp_dir("cli");
  std::string model = (dir / "u.model").string();

  Fixture() {
    const auto r = run({"train-unigram", "--input", data("tiny_corpus.txt"), "--vocab-size", "120",
                        "--model-out", model},
                       dir);
    REQUIRE(r.code == 0);
  }
  ~Fixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE_FIXTURE(Fixture, "train-unigram writes a model that round-trips and matches the library") {
  const std::string text = oracle::read_text(model);
  const auto m = load_unigram(model);
  CHECK(serialize_unigram(m) == text);
  TrainConfig cfg;
  cfg.target_vocab_size = 120;
  CHECK(train_unigram(fixture_corpus(), cfg) == m);

  const auto again = (dir / "again.model").string();
  REQUIRE(run({"train-unigram", "--input", data("tiny_corpus.txt"), "--vocab-size", "120",
               "--model-out", again},
              dir)
              .code == 0);
  CHECK(oracle::read_text(again) == text);
}

TEST_CASE_FIXTURE(Fixture, "vocabulary size below the character floor is an error") {
  const auto r = run({"train-unigram", "--input", data("tiny_corpus.txt"), "--vocab-size", "5",
                      "--model-out", (dir / "x.model").string()},
                     dir);
  CHECK(r.code != 0);
  CHECK(r.err.find("error") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "x.model"));
}

TEST_CASE_FIXTURE(Fixture, "encode equals the library 1-best") {
  const auto r = run({"encode", "--model", model, "--input", data("tiny_corpus.txt")}, dir);
  REQUIRE(r.code == 0);
  const auto m = load_unigram(model);
  std::string expect;
  for (const auto& utt : fixture_corpus().utterances) {
    expect += join(piece_strings(m.vocab(), encode_sentence(m, utt))) + "\n";
  }
  CHECK(r.out == expect);
}

TEST_CASE_FIXTURE(Fixture, "sample with a huge alpha equals encode") {
  const auto enc = run({"encode", "--model", model, "--input", data("tiny_corpus.txt")}, dir);
  const auto smp = run({"sample", "--model", model, "--input", data("tiny_corpus.txt"), "--alpha",
                        "1e9", "--seed", "1"},
                       dir);
  REQUIRE(smp.code == 0);
  CHECK(smp.out == enc.out);
}

TEST_CASE_FIXTURE(Fixture, "sample is seeded and equals the library stream") {
  const std::vector<std::string> args{"sample", "--model", model, "--input", data("tiny_corpus.txt"),
                                      "--alpha", "0.2", "--nbest-size", "16", "--seed", "42"};
  const auto a = run(args, dir);
  const auto b = run(args, dir);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);

  const auto m = load_unigram(model);
  Rng rng(42);
  std::string expect;
  for (const auto& utt : fixture_corpus().utterances) {
    expect += join(piece_strings(m.vocab(), sample_sentence(m, utt, SampleParams{0.2, 16}, rng))) + "\n";
  }
  CHECK(a.out == expect);
}

TEST_CASE_FIXTURE(Fixture, "missing seed is generated, printed and recorded") {
  const auto manifest = (dir / "run.json").string();
  const auto out1 = (dir / "s1.txt").string();
  const auto r = run({"sample", "--model", model, "--input", data("tiny_corpus.txt"), "--alpha",
                      "0.1", "--output", out1, "--manifest", manifest},
                     dir);
  REQUIRE(r.code == 0);
  CHECK(r.err.rfind("seed\t", 0) == 0);
  const std::string first = oracle::read_text(out1);
  fs::remove(out1);
  const auto replay = run({"replay", "--manifest", manifest}, dir);
  REQUIRE(replay.code == 0);
  CHECK(oracle::read_text(out1) == first);
}

TEST_CASE_FIXTURE(Fixture, "replay refuses changed inputs") {
  const auto input = (dir / "in.txt").string();
  oracle::write_text(input, "set a timer\n");
  const auto manifest = (dir / "run.json").string();
  REQUIRE(run({"encode", "--model", model, "--input", input, "--manifest", manifest}, dir).code == 0);
  oracle::write_text(input, "set a timer please\n");
  CHECK(run({"replay", "--manifest", manifest}, dir).code == 2);
}

TEST_CASE_FIXTURE(Fixture, "nbest equals the library lists") {
  const auto r = run({"nbest", "--model", model, "--n", "5", "--input", data("tiny_corpus.txt")}, dir);
  REQUIRE(r.code == 0);
  const auto m = load_unigram(model);
  std::string expect;
  char buf[64];
  for (const auto& utt : fixture_corpus().utterances) {
    const auto list = nbest(build_lattice(m, utt), 5);
    for (std::size_t k = 0; k < list.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", list[k].log_prob);
      expect += (k ? "\t" : "") + std::string(buf) + "\t" + join(piece_strings(m.vocab(), list[k]));
    }
    expect += "\n";
  }
  CHECK(r.out == expect);
}

TEST_CASE_FIXTURE(Fixture, "analyze-edits equals the library curve") {
  const auto r = run({"analyze-edits", "--model", model, "--input", data("tiny_corpus.txt"),
                      "--alphas", "0,0.5,1e6", "--ns", "1,8", "--samples", "500", "--seed", "9",
                      "--threads", "2"},
                     dir);
  REQUIRE(r.code == 0);
  EditsCurveConfig cfg;
  cfg.alphas = {0, 0.5, 1e6};
  cfg.ns = {1, 8};
  cfg.samples_per_point = 500;
  cfg.seed = 9;
  std::ostringstream expect;
  write_edits_tsv(expect, expected_edits_curve(load_unigram(model), fixture_corpus(), cfg));
  CHECK(r.out == expect.str());
}

TEST_CASE_FIXTURE(Fixture, "bpe training and encoding equal the library") {
  const auto bpe = (dir / "b.model").string();
  REQUIRE(run({"train-bpe", "--input", data("tiny_corpus.txt"), "--merges", "60", "--model-out", bpe}, dir)
              .code == 0);
  const auto m = train_bpe(fixture_corpus(), 60);
  CHECK(oracle::read_text(bpe) == serialize_bpe(m));

  const auto greedy = run({"encode", "--model", bpe, "--input", data("tiny_corpus.txt")}, dir);
  const auto zero = run({"encode", "--model", bpe, "--input", data("tiny_corpus.txt"), "--dropout", "0"}, dir);
  const auto drop = run({"encode", "--model", bpe, "--input", data("tiny_corpus.txt"), "--dropout", "0.1",
                         "--seed", "3"},
                        dir);
  REQUIRE(greedy.code == 0);
  CHECK(zero.out == greedy.out);
  std::string g, d;
  Rng rng(3);
  for (const auto& utt : fixture_corpus().utterances) {
    g += join(piece_strings(m.vocab(), bpe_encode(m, utt))) + "\n";
    d += join(piece_strings(m.vocab(), bpe_dropout_encode(m, utt, 0.1, rng))) + "\n";
  }
  CHECK(greedy.out == g);
  CHECK(drop.out == d);
  CHECK(run({"encode", "--model", model, "--dropout", "0.1", "--input", data("tiny_corpus.txt")}, dir).code == 1);
}

TEST_CASE_FIXTURE(Fixture, "eval equals the library metrics") {
  const auto r = run({"eval", "--refs", data("refs.tsv"), "--hyps", data("hyps.tsv"), "--nbest",
                      data("nbest.tsv"), "--base-hyps", data("base_hyps.tsv"), "--seen-words",
                      data("seen_words.txt"), "--metrics", "wer,werr,oracle,unseen,diversity"},
                     dir);
  REQUIRE(r.code == 0);
  const auto refs = load_transcripts(data("refs.tsv"));
  const auto hyps = load_transcripts(data("hyps.tsv"));
  const auto lists = load_nbest(data("nbest.tsv"));
  std::ostringstream expect;
  const auto w = wer(refs, hyps);
  write_report_line(expect, "wer", w.wer);
  write_report_line(expect, "substitutions", w.substitutions);
  write_report_line(expect, "deletions", w.deletions);
  write_report_line(expect, "insertions", w.insertions);
  write_report_line(expect, "ref_tokens", w.ref_token_count);
  write_report_line(expect, "utterances", w.utterances);
  const double base = wer(refs, load_transcripts(data("base_hyps.tsv"))).wer;
  write_report_line(expect, "base_wer", base);
  write_report_line(expect, "werr_pct", werr(base, w.wer));
  write_report_line(expect, "oracle_wer", oracle_wer(refs, lists).wer);
  const auto s = unseen_word_prf(refs, hyps, load_word_list(data("seen_words.txt")));
  write_report_line(expect, "unseen_tp", s.tp);
  write_report_line(expect, "unseen_fp", s.fp);
  write_report_line(expect, "unseen_fn", s.fn);
  write_report_line(expect, "precision", s.precision);
  write_report_line(expect, "recall", s.recall);
  write_report_line(expect, "f_score", s.f_score);
  write_report_line(expect, "unique_ratio", beam_diversity(lists));
  CHECK(r.out == expect.str());
  CHECK(r.out.find("oracle_wer\t") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "eval reports diversity side by side and piece histograms") {
  const auto a = (dir / "a.tsv").string();
  const auto b = (dir / "b.tsv").string();
  std::string same, distinct;
  for (int k = 1; k <= 16; ++k) {
    same += "u\t" + std::to_string(k) + "\t0\tset a timer\n";
    distinct += "u\t" + std::to_string(k) + "\t0\tset a timer " + std::to_string(k) + "\n";
  }
  oracle::write_text(a, distinct);
  oracle::write_text(b, same);
  const auto r = run({"eval", "--nbest", a, "--base-nbest", b, "--metrics", "diversity"}, dir);
  REQUIRE(r.code == 0);
  CHECK(r.out == "unique_ratio\t1\nbase_unique_ratio\t0.0625\n");

  const auto p = (dir / "p.txt").string();
  const auto q = (dir / "q.txt").string();
  oracle::write_text(p, "▁ab c\n▁a\n");
  oracle::write_text(q, "▁ab ▁c\n");
  const auto h = run({"eval", "--pieces", p, "--base-pieces", q, "--metrics", "histogram"}, dir);
  REQUIRE(h.code == 0);
  CHECK(h.out == "hist_len_1\t2\nhist_len_2\t1\nhist_change_pct_1\t100\nhist_change_pct_2\t0\n");
}

TEST_CASE_FIXTURE(Fixture, "exit codes") {
  CHECK(run({}, dir).code == 1);
  CHECK(run({"encode"}, dir).code == 1);
  CHECK(run({"sample", "--model", model, "--alpha", "x"}, dir).code == 1);
  CHECK(run({"eval", "--metrics", "bogus"}, dir).code == 1);
  CHECK(run({"encode", "--model", (dir / "none.model").string()}, dir).code == 2);
  const auto bad = (dir / "bad.txt").string();
  oracle::write_text(bad, "fine\nbroken \xff\n");
  const auto r = run({"encode", "--model", model, "--input", bad}, dir);
  CHECK(r.code == 2);
  CHECK(r.err.find(":2:") != std::string::npos);
  CHECK(run({"eval", "--refs", data("refs.tsv"), "--hyps", data("tiny_corpus.txt")}, dir).code == 2);
  CHECK(run({"--help"}, dir).code == 0);
}

}  // TEST_SUITE
