// segsample: train, encode, sample and evaluate wordpiece segmentations.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "manifest.hpp"
#include "segsample/bpe.hpp"
#include "segsample/corpus.hpp"
#include "segsample/error.hpp"
#include "segsample/metrics.hpp"
#include "segsample/regularizer.hpp"
#include "segsample/unigram.hpp"
#include "segsample/utf8.hpp"

#ifndef SEGSAMPLE_VERSION
#define SEGSAMPLE_VERSION "0.0.0"
#endif

namespace segsample::cli {
namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

// Flags whose values are input files; their digests go into the manifest.
const std::set<std::string> kInputFlags = {"input", "model",      "refs",        "hyps",
                                           "nbest", "seen-words", "base-hyps",   "base-nbest",
                                           "pieces", "base-pieces"};

struct Options {
  std::string input, output, model, model_out, normalize = "lower", manifest;
  std::size_t vocab_size = 8000, seed_size = 100000, max_piece_length = 16;
  double shrink_factor = 0.75;
  std::size_t em_iterations = 2;
  std::size_t merges = 8000;
  std::size_t threads = 1;
  double dropout = 0.0;
  double alpha = 0.25;
  std::size_t nbest_size = 200;
  std::size_t n = 10;
  std::string alphas = "0,0.1,0.25,0.5,1,5", ns = "1,16,200";
  std::size_t samples = 1000;
  std::optional<std::uint64_t> seed;
  std::string refs, hyps, nbest, seen_words, base_hyps, base_nbest, pieces, base_pieces;
  std::string metrics = "wer";
};

Normalization policy_of(const std::string& name) {
  if (name == "lower") return Normalization::LowercaseWhitespace;
  if (name == "none") return Normalization::AsIs;
  throw std::invalid_argument("--normalize must be 'lower' or 'none'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* flag) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    std::istringstream in(item);
    T v;
    if (!(in >> v) || !in.eof()) throw std::invalid_argument(std::string(flag) + ": bad value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument(std::string(flag) + " is empty");
  return out;
}

// Lines of a file, CR stripped; empty lines kept so output stays aligned.
std::vector<std::string> read_lines(const std::string& path) {
  const std::string text = path.empty() || path == "-"
                               ? std::string(std::istreambuf_iterator<char>(std::cin), {})
                               : read_file(path);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = eol + 1;
  }
  return lines;
}

Words words_of(const std::string& line, Normalization policy, const std::string& source,
               std::size_t line_no) {
  try {
    return normalize_line(line, policy);
  } catch (const std::invalid_argument& e) {
    throw DataError(source, line_no, e.what());
  }
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  void close() {
    if (file_.is_open()) {
      file_.close();
      if (!file_) throw IoError("write failed");
    } else {
      std::cout.flush();
    }
  }

 private:
  std::ofstream file_;
};

std::string join_pieces(const std::vector<std::string>& pieces) {
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i) out += ' ';
    out += pieces[i];
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t resolve_seed(Options& o) {
  if (!o.seed) {
    std::random_device rd;
    o.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed\t" << *o.seed << '\n';
  }
  return *o.seed;
}

enum class ModelKind { Unigram, Bpe };

ModelKind model_kind(const std::string& text, const std::string& path) {
  auto starts = [&](std::string_view h) { return text.compare(0, h.size(), h) == 0; };
  if (starts(kUnigramHeader)) return ModelKind::Unigram;
  if (starts(kBpeHeader)) return ModelKind::Bpe;
  throw DataError(path, 1, "unrecognized model file header");
}

UnigramModel require_unigram(const std::string& path) {
  const std::string text = read_file(path);
  if (model_kind(text, path) != ModelKind::Unigram) {
    throw std::invalid_argument(path + " is not a unigram model");
  }
  return parse_unigram(text, path);
}

void cmd_train_unigram(Options& o) {
  const Corpus corpus = load_corpus(o.input, policy_of(o.normalize));
  TrainConfig cfg;
  cfg.target_vocab_size = o.vocab_size;
  cfg.seed_size = o.seed_size;
  cfg.max_piece_length = o.max_piece_length;
  cfg.shrink_factor = o.shrink_factor;
  cfg.em_iterations_per_round = o.em_iterations;
  cfg.threads = o.threads;
  const auto model = train_unigram(corpus, cfg, [](const EmTraceEntry& e) {
    std::cerr << "em\tround=" << e.round << "\titer=" << e.iteration << "\tsize=" << e.vocab_size
              << "\tll=" << format_double(e.log_likelihood) << '\n';
  });
  save_unigram(model, o.model_out);
}

void cmd_train_bpe(Options& o) {
  const Corpus corpus = load_corpus(o.input, policy_of(o.normalize));
  save_bpe(train_bpe(corpus, o.merges), o.model_out);
}

void cmd_encode(Options& o) {
  const std::string text = read_file(o.model);
  const auto policy = policy_of(o.normalize);
  const auto lines = read_lines(o.input);
  Output out(o.output);
  if (model_kind(text, o.model) == ModelKind::Unigram) {
    if (o.dropout != 0.0) throw std::invalid_argument("--dropout applies to BPE models only");
    const auto model = parse_unigram(text, o.model);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto words = words_of(lines[i], policy, o.input, i + 1);
      if (!words.empty()) out.stream() << join_pieces(piece_strings(model.vocab(), encode_sentence(model, words)));
      out.stream() << '\n';
    }
  } else {
    const auto model = parse_bpe(text, o.model);
    if (!(o.dropout >= 0.0 && o.dropout <= 1.0)) throw std::invalid_argument("--dropout must be in [0, 1]");
    std::optional<Rng> rng;
    if (o.dropout > 0.0) rng.emplace(resolve_seed(o));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto words = words_of(lines[i], policy, o.input, i + 1);
      if (!words.empty()) {
        const auto seg = rng ? bpe_dropout_encode(model, words, o.dropout, *rng) : bpe_encode(model, words);
        out.stream() << join_pieces(piece_strings(model.vocab(), seg));
      }
      out.stream() << '\n';
    }
  }
  out.close();
}

void cmd_sample(Options& o) {
  const auto model = require_unigram(o.model);
  const SampleParams params{o.alpha, o.nbest_size};
  validate(params);
  const auto policy = policy_of(o.normalize);
  const auto lines = read_lines(o.input);
  Rng rng(resolve_seed(o));
  Output out(o.output);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto words = words_of(lines[i], policy, o.input, i + 1);
    if (!words.empty()) {
      out.stream() << join_pieces(piece_strings(model.vocab(), sample_sentence(model, words, params, rng)));
    }
    out.stream() << '\n';
  }
  out.close();
}

void cmd_nbest(Options& o) {
  const auto model = require_unigram(o.model);
  if (o.n < 1) throw std::invalid_argument("--n must be >= 1");
  const auto policy = policy_of(o.normalize);
  const auto lines = read_lines(o.input);
  Output out(o.output);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto words = words_of(lines[i], policy, o.input, i + 1);
    if (!words.empty()) {
      const auto list = nbest(build_lattice(model, words), o.n);
      for (std::size_t k = 0; k < list.size(); ++k) {
        if (k) out.stream() << '\t';
        out.stream() << format_double(list[k].log_prob) << '\t'
                     << join_pieces(piece_strings(model.vocab(), list[k]));
      }
    }
    out.stream() << '\n';
  }
  out.close();
}

void cmd_analyze_edits(Options& o) {
  const auto model = require_unigram(o.model);
  const Corpus corpus = load_corpus(o.input, policy_of(o.normalize));
  EditsCurveConfig cfg;
  cfg.alphas = parse_list<double>(o.alphas, "--alphas");
  cfg.ns = parse_list<std::size_t>(o.ns, "--ns");
  cfg.samples_per_point = o.samples;
  cfg.threads = o.threads;
  cfg.seed = resolve_seed(o);
  const auto points = expected_edits_curve(model, corpus, cfg);
  Output out(o.output);
  write_edits_tsv(out.stream(), points);
  out.close();
}

std::vector<std::vector<std::string>> load_piece_file(const std::string& path) {
  std::vector<std::vector<std::string>> segs;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto chars = utf8::decode(lines[i]);
    if (!chars) throw DataError(path, i + 1, "invalid UTF-8 byte sequence");
    std::vector<std::string> pieces;
    std::u32string cur;
    for (char32_t c : *chars) {
      if (!utf8::is_space(c)) {
        cur.push_back(c);
      } else if (!cur.empty()) {
        pieces.push_back(utf8::encode(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) pieces.push_back(utf8::encode(cur));
    segs.push_back(std::move(pieces));
  }
  return segs;
}

void cmd_eval(Options& o) {
  const auto wanted = split_list(o.metrics);
  if (wanted.empty()) throw std::invalid_argument("--metrics is empty");
  const std::set<std::string> known = {"wer", "werr", "oracle", "unseen", "diversity", "histogram"};
  for (const auto& m : wanted) {
    if (!known.count(m)) throw std::invalid_argument("unknown metric '" + m + "'");
  }
  auto need = [](const std::string& value, const char* flag, const std::string& metric) {
    if (value.empty()) throw std::invalid_argument("metric " + metric + " needs " + flag);
  };

  std::optional<TranscriptSet> refs;
  std::optional<NBestSet> lists;
  auto get_refs = [&]() -> const TranscriptSet& {
    if (!refs) refs = load_transcripts(o.refs);
    return *refs;
  };
  auto get_lists = [&]() -> const NBestSet& {
    if (!lists) lists = load_nbest(o.nbest);
    return *lists;
  };
  // First-best hypotheses: --hyps when given, otherwise rank 1 of --nbest.
  auto get_hyps = [&](const std::string& metric) -> TranscriptSet {
    if (!o.hyps.empty()) return load_transcripts(o.hyps);
    need(o.nbest, "--hyps or --nbest", metric);
    return first_best(get_lists());
  };

  Output out(o.output);
  std::ostream& os = out.stream();
  for (const auto& metric : wanted) {
    if (metric == "wer") {
      need(o.refs, "--refs", metric);
      const auto r = wer(get_refs(), get_hyps(metric));
      write_report_line(os, "wer", r.wer);
      write_report_line(os, "substitutions", r.substitutions);
      write_report_line(os, "deletions", r.deletions);
      write_report_line(os, "insertions", r.insertions);
      write_report_line(os, "ref_tokens", r.ref_token_count);
      write_report_line(os, "utterances", r.utterances);
    } else if (metric == "werr") {
      need(o.refs, "--refs", metric);
      need(o.base_hyps, "--base-hyps", metric);
      const double base = wer(get_refs(), load_transcripts(o.base_hyps)).wer;
      const double now = wer(get_refs(), get_hyps(metric)).wer;
      write_report_line(os, "base_wer", base);
      write_report_line(os, "werr_pct", werr(base, now));
    } else if (metric == "oracle") {
      need(o.refs, "--refs", metric);
      need(o.nbest, "--nbest", metric);
      write_report_line(os, "oracle_wer", oracle_wer(get_refs(), get_lists()).wer);
    } else if (metric == "unseen") {
      need(o.refs, "--refs", metric);
      need(o.seen_words, "--seen-words", metric);
      const auto s = unseen_word_prf(get_refs(), get_hyps(metric), load_word_list(o.seen_words));
      write_report_line(os, "unseen_tp", s.tp);
      write_report_line(os, "unseen_fp", s.fp);
      write_report_line(os, "unseen_fn", s.fn);
      write_report_line(os, "precision", s.precision);
      write_report_line(os, "recall", s.recall);
      write_report_line(os, "f_score", s.f_score);
    } else if (metric == "diversity") {
      need(o.nbest, "--nbest", metric);
      write_report_line(os, "unique_ratio", beam_diversity(get_lists()));
      if (!o.base_nbest.empty()) {
        write_report_line(os, "base_unique_ratio", beam_diversity(load_nbest(o.base_nbest)));
      }
    } else if (metric == "histogram") {
      need(o.pieces, "--pieces", metric);
      const auto hist = piece_length_histogram(load_piece_file(o.pieces));
      for (const auto& [len, count] : hist) {
        write_report_line(os, "hist_len_" + std::to_string(len), count);
      }
      if (!o.base_pieces.empty()) {
        const auto base = piece_length_histogram(load_piece_file(o.base_pieces));
        for (const auto& [len, change] : histogram_change(base, hist)) {
          write_report_line(os, "hist_change_pct_" + std::to_string(len), change);
        }
      }
    }
  }
  out.close();
}

RunManifest make_manifest(const std::string& name, CLI::App* sub, const Options& o) {
  RunManifest m;
  m.tool_version = SEGSAMPLE_VERSION;
  m.subcommand = name;
  m.seed = o.seed;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string flag = opt->get_single_name();
    if (flag.empty() || flag == "help" || flag == "seed" || flag == "manifest") continue;
    std::string value;
    if (opt->count() > 0) {
      value = opt->as<std::string>();
    } else {
      value = opt->get_default_str();
      if (value.empty()) continue;
    }
    m.flags[flag] = value;
    if (kInputFlags.count(flag) && value != "-") m.input_sha256[value] = sha256_file(value);
  }
  return m;
}

int run(std::vector<std::string> args);

int dispatch(const std::string& name, CLI::App* sub, Options& o) {
  if (name == "train-unigram") cmd_train_unigram(o);
  else if (name == "train-bpe") cmd_train_bpe(o);
  else if (name == "encode") cmd_encode(o);
  else if (name == "sample") cmd_sample(o);
  else if (name == "nbest") cmd_nbest(o);
  else if (name == "analyze-edits") cmd_analyze_edits(o);
  else if (name == "eval") cmd_eval(o);

  if (!o.manifest.empty()) {
    std::ofstream out(o.manifest, std::ios::binary);
    if (!out) throw IoError("cannot write " + o.manifest);
    out << to_json(make_manifest(name, sub, o));
  }
  return 0;
}

int replay(const std::string& path) {
  const RunManifest m = manifest_from_json(read_file(path));
  for (const auto& [file, digest] : m.input_sha256) {
    if (sha256_file(file) != digest) {
      throw DataError("input " + file + " changed since the manifest was written");
    }
  }
  return run(replay_arguments(m));
}

int run(std::vector<std::string> args) {
  CLI::App app{"Wordpiece segmentation training, sampling and evaluation", "segsample"};
  app.set_version_flag("--version", SEGSAMPLE_VERSION);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--manifest", o.manifest, "Write a JSON run manifest to this path");
  };
  auto seed = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "RNG seed; generated and printed to stderr when omitted");
  };
  auto normalize = [&](CLI::App* s) {
    s->add_option("--normalize", o.normalize, "Text normalization: lower or none");
  };

  auto* tu = app.add_subcommand("train-unigram", "Train a unigram wordpiece model");
  tu->add_option("--input", o.input, "Training corpus, one utterance per line")->required();
  tu->add_option("--vocab-size", o.vocab_size, "Target vocabulary size");
  tu->add_option("--seed-size", o.seed_size, "Seed vocabulary size");
  tu->add_option("--max-piece-length", o.max_piece_length, "Longest seed piece, marker included");
  tu->add_option("--shrink-factor", o.shrink_factor, "Fraction of pieces kept per pruning round");
  tu->add_option("--em-iterations", o.em_iterations, "EM iterations per round");
  tu->add_option("--threads", o.threads, "Worker threads");
  tu->add_option("--model-out", o.model_out, "Output model file")->required();
  normalize(tu);
  common(tu);

  auto* tb = app.add_subcommand("train-bpe", "Train a BPE merge table");
  tb->add_option("--input", o.input, "Training corpus")->required();
  tb->add_option("--merges", o.merges, "Number of merges");
  tb->add_option("--model-out", o.model_out, "Output model file")->required();
  normalize(tb);
  common(tb);

  auto* enc = app.add_subcommand("encode", "1-best segmentation (unigram) or greedy/dropout BPE");
  enc->add_option("--model", o.model, "Model file")->required();
  enc->add_option("--input", o.input, "Text to segment ('-' for stdin)");
  enc->add_option("--output", o.output, "Output file ('-' for stdout)");
  enc->add_option("--dropout", o.dropout, "BPE-dropout probability");
  seed(enc);
  normalize(enc);
  common(enc);

  auto* smp = app.add_subcommand("sample", "Sample segmentations from the N-best distribution");
  smp->add_option("--model", o.model, "Unigram model file")->required();
  smp->add_option("--alpha", o.alpha, "Temperature");
  smp->add_option("--nbest-size", o.nbest_size, "N-best list size");
  smp->add_option("--input", o.input, "Text to segment ('-' for stdin)");
  smp->add_option("--output", o.output, "Output file ('-' for stdout)");
  seed(smp);
  normalize(smp);
  common(smp);

  auto* nb = app.add_subcommand("nbest", "N best segmentations with log probabilities");
  nb->add_option("--model", o.model, "Unigram model file")->required();
  nb->add_option("--n", o.n, "List size");
  nb->add_option("--input", o.input, "Text to segment ('-' for stdin)");
  nb->add_option("--output", o.output, "Output file ('-' for stdout)");
  normalize(nb);
  common(nb);

  auto* ae = app.add_subcommand("analyze-edits", "Expected edits per wordpiece over (alpha, N)");
  ae->add_option("--model", o.model, "Unigram model file")->required();
  ae->add_option("--input", o.input, "Corpus")->required();
  ae->add_option("--alphas", o.alphas, "Comma-separated temperatures");
  ae->add_option("--ns", o.ns, "Comma-separated N-best sizes");
  ae->add_option("--samples", o.samples, "Samples per point");
  ae->add_option("--threads", o.threads, "Worker threads");
  ae->add_option("--output", o.output, "Output TSV ('-' for stdout)");
  seed(ae);
  normalize(ae);
  common(ae);

  auto* ev = app.add_subcommand("eval", "WER, WERR, oracle WER, unseen-word P/R/F, diversity");
  ev->add_option("--refs", o.refs, "References: utt_id<TAB>text");
  ev->add_option("--hyps", o.hyps, "Hypotheses: utt_id<TAB>text");
  ev->add_option("--nbest", o.nbest, "N-best lists: utt_id<TAB>rank<TAB>score<TAB>text");
  ev->add_option("--base-hyps", o.base_hyps, "Baseline hypotheses for werr");
  ev->add_option("--base-nbest", o.base_nbest, "Baseline n-best lists for diversity");
  ev->add_option("--seen-words", o.seen_words, "Training word list for unseen-word scores");
  ev->add_option("--pieces", o.pieces, "Segmentations (space-separated pieces) for histogram");
  ev->add_option("--base-pieces", o.base_pieces, "Baseline segmentations for histogram change");
  ev->add_option("--metrics", o.metrics, "Comma list of wer,werr,oracle,unseen,diversity,histogram");
  ev->add_option("--output", o.output, "Report file ('-' for stdout)");
  common(ev);

  std::string replay_path;
  auto* rp = app.add_subcommand("replay", "Re-run the invocation recorded in a manifest");
  rp->add_option("--manifest", replay_path, "Manifest file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "replay") return replay(replay_path);
  return dispatch(name, sub, o);
}

}  // namespace
}  // namespace segsample::cli

int main(int argc, char** argv) {
  using namespace segsample;
  try {
    return cli::run(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kUsageError;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kDataError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kDataError;
  }
}
