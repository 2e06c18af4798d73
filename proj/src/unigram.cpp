#include "segsample/unigram.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "parallel.hpp"
#include "segsample/error.hpp"
#include "segsample/lattice.hpp"

namespace segsample {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

UnigramModel::UnigramModel(Vocabulary vocab, std::vector<double> log_probs)
    : vocab_(std::move(vocab)), log_probs_(std::move(log_probs)) {
  if (vocab_.size() != log_probs_.size()) {
    throw std::invalid_argument("UnigramModel: vocabulary/log-prob size mismatch");
  }
  for (std::size_t i = 0; i < log_probs_.size(); ++i) {
    if (!std::isfinite(log_probs_[i])) {
      throw std::invalid_argument("UnigramModel: non-finite log prob for " +
                                  vocab_.surface_utf8(static_cast<PieceId>(i)));
    }
  }
}

double UnigramModel::total_probability() const {
  double sum = 0.0;
  for (double lp : log_probs_) sum += std::exp(lp);
  return sum;
}

std::string serialize_unigram(const UnigramModel& model) {
  std::string out(kUnigramHeader);
  out += '\n';
  for (const auto& p : model.vocab().pieces()) {
    out += utf8::encode(p.surface);
    out += '\t';
    out += format_double(model.log_prob(p.id));
    out += '\n';
  }
  return out;
}

UnigramModel parse_unigram(std::string_view text, const std::string& source) {
  std::vector<std::u32string> surfaces;
  std::vector<double> log_probs;
  std::unordered_set<std::u32string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header) {
      if (line != kUnigramHeader) {
        throw DataError(source, line_no, "missing header " + std::string(kUnigramHeader));
      }
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw DataError(source, line_no, "expected 2 tab-separated columns");
    }
    auto surface = utf8::decode(line.substr(0, tab));
    if (!surface) throw DataError(source, line_no, "invalid UTF-8 in surface");
    if (surface->empty()) throw DataError(source, line_no, "empty surface");
    if (std::find(surface->begin() + 1, surface->end(), kMarker) != surface->end()) {
      throw DataError(source, line_no, "marker inside surface");
    }
    if (!seen.insert(*surface).second) {
      throw DataError(source, line_no,
                      "duplicate surface '" + std::string(line.substr(0, tab)) + "'");
    }
    const std::string num(line.substr(tab + 1));
    char* end = nullptr;
    errno = 0;
    const double lp = std::strtod(num.c_str(), &end);
    if (num.empty() || end != num.c_str() + num.size()) {
      throw DataError(source, line_no, "malformed log prob '" + num + "'");
    }
    if (!std::isfinite(lp)) throw DataError(source, line_no, "non-finite log prob");
    surfaces.push_back(std::move(*surface));
    log_probs.push_back(lp);
  }
  if (!header) throw DataError(source, 1, "empty model file");
  return UnigramModel(Vocabulary(std::move(surfaces)), std::move(log_probs));
}

void save_unigram(const UnigramModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << serialize_unigram(model);
  if (!out) throw IoError("write failed: " + path);
}

UnigramModel load_unigram(const std::string& path) { return parse_unigram(read_file(path), path); }

WordTable WordTable::from_corpus(const Corpus& corpus) {
  const WordInventory inv = word_inventory(corpus);
  WordTable t;
  t.words.reserve(inv.size());
  t.counts.reserve(inv.size());
  for (const auto& [w, c] : inv.counts) {
    t.words.push_back(utf8::decode_or_throw(w));
    t.counts.push_back(static_cast<double>(c));
  }
  return t;
}

std::vector<char32_t> corpus_alphabet(const WordTable& table) {
  std::set<char32_t> chars;
  for (const auto& w : table.words) chars.insert(w.begin(), w.end());
  return {chars.begin(), chars.end()};
}

namespace {

std::vector<std::u32string> required_pieces(const std::vector<char32_t>& alphabet) {
  std::vector<std::u32string> out;
  for (char32_t c : alphabet) {
    out.push_back(std::u32string(1, c));
    out.push_back(std::u32string{kMarker, c});
  }
  return out;
}

std::vector<double> normalized_log_probs(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  const double log_total = std::log(total);
  std::vector<double> lp(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    lp[i] = counts[i] > 0.0 ? std::log(counts[i]) - log_total : std::log(kZeroCountProbability);
  }
  return lp;
}

void validate_config(const TrainConfig& config) {
  if (config.max_piece_length < 2) throw std::invalid_argument("max_piece_length must be >= 2");
  if (!(config.shrink_factor > 0.0 && config.shrink_factor < 1.0)) {
    throw std::invalid_argument("shrink_factor must be in (0, 1)");
  }
  if (config.em_iterations_per_round < 1) {
    throw std::invalid_argument("em_iterations_per_round must be >= 1");
  }
  if (!(config.convergence_tol >= 0.0)) throw std::invalid_argument("convergence_tol must be >= 0");
}

UnigramModel seed_from_table(const WordTable& table, const TrainConfig& config) {
  validate_config(config);
  const auto required = required_pieces(corpus_alphabet(table));
  if (config.seed_size < required.size()) {
    throw std::invalid_argument("seed_size " + std::to_string(config.seed_size) +
                                " is smaller than the " + std::to_string(required.size()) +
                                " required character pieces");
  }

  std::unordered_map<std::u32string, double> freq;
  std::u32string decorated;
  for (std::size_t wi = 0; wi < table.words.size(); ++wi) {
    decorated.assign(1, kMarker);
    decorated += table.words[wi];
    const std::size_t n = decorated.size();
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t max_len = std::min(config.max_piece_length, n - s);
      for (std::size_t len = (s == 0 ? 2 : 1); len <= max_len; ++len) {
        freq[decorated.substr(s, len)] += table.counts[wi];
      }
    }
  }

  struct Candidate {
    std::u32string surface;
    double count;
    double score;
  };
  std::vector<Candidate> ranked;
  ranked.reserve(freq.size());
  for (auto& [s, c] : freq) ranked.push_back(Candidate{s, c, c * static_cast<double>(s.size())});
  auto by_score = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.surface < b.surface;
  };
  std::sort(ranked.begin(), ranked.end(), by_score);
  if (ranked.size() > config.seed_size) ranked.resize(config.seed_size);

  std::unordered_set<std::u32string> chosen;
  for (const auto& c : ranked) chosen.insert(c.surface);
  for (const auto& r : required) {
    if (chosen.insert(r).second) {
      const auto it = freq.find(r);
      const double c = it == freq.end() ? 0.0 : it->second;
      ranked.push_back(Candidate{r, c, c * static_cast<double>(r.size())});
    }
  }
  std::sort(ranked.begin(), ranked.end(), by_score);

  std::vector<std::u32string> surfaces;
  std::vector<double> counts;
  for (auto& c : ranked) {
    surfaces.push_back(std::move(c.surface));
    counts.push_back(c.count);
  }
  return UnigramModel(Vocabulary(std::move(surfaces)), normalized_log_probs(counts));
}

std::vector<SegmentationLattice> word_lattices(const Vocabulary& vocab, const WordTable& table,
                                               std::size_t threads) {
  std::vector<SegmentationLattice> lattices(table.words.size());
  detail::parallel_for(table.words.size(), threads, [&](std::size_t i) {
    lattices[i] = build_lattice(vocab, std::span<const std::u32string>(&table.words[i], 1));
  });
  return lattices;
}

// Count-weighted sum of f(word index) with a fixed reduction order.
template <typename Fn>
double ordered_sum(std::size_t n, std::size_t threads, Fn&& f) {
  const std::size_t chunks = detail::num_chunks(n);
  std::vector<double> partial(chunks, 0.0);
  detail::parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t lo = c * detail::kChunkSize;
    const std::size_t hi = std::min(n, lo + detail::kChunkSize);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += f(i);
    partial[c] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

// Chebyshev interpolant of a smooth function on [0, hi].
class ChebyshevInterpolant {
 public:
  template <typename Fn>
  ChebyshevInterpolant(double hi, std::size_t points, Fn&& f) {
    for (std::size_t i = 0; i < points; ++i) {
      const double theta = std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) /
                           (2.0 * static_cast<double>(points));
      const double x = 0.5 * hi * (1.0 + std::cos(theta));
      nodes_.push_back(x);
      values_.push_back(f(x));
      weights_.push_back(((i % 2) ? -1.0 : 1.0) * std::sin(theta));
    }
  }

  double operator()(double x) const {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const double d = x - nodes_[i];
      if (d == 0.0) return values_[i];
      const double t = weights_[i] / d;
      num += t * values_[i];
      den += t;
    }
    return num / den;
  }

 private:
  std::vector<double> nodes_, values_, weights_;
};

std::vector<double> removal_losses_impl(const UnigramModel& model, const WordTable& table,
                                        const std::vector<SegmentationLattice>& lattices,
                                        std::size_t threads) {
  const Vocabulary& vocab = model.vocab();
  const auto scores = model.log_probs();
  const std::size_t nw = table.words.size();

  std::vector<double> base(nw);
  detail::parallel_for(nw, threads, [&](std::size_t w) {
    base[w] = marginal_logprob(lattices[w], scores);
  });

  // Words whose lattice contains each piece.
  std::vector<std::vector<std::uint32_t>> words_of(vocab.size());
  for (std::uint32_t w = 0; w < nw; ++w) {
    PieceId last = -1;
    std::vector<PieceId> ids;
    for (const auto& e : lattices[w].edges()) ids.push_back(e.piece);
    std::sort(ids.begin(), ids.end());
    for (PieceId id : ids) {
      if (id != last) words_of[static_cast<std::size_t>(id)].push_back(w);
      last = id;
    }
  }

  // Renormalizing by 1/(1-p) adds beta = -log(1-p) to every remaining edge.
  // Its effect on all words, G(beta), is smooth in beta and shared by every
  // piece, so it is interpolated from a few full passes.
  std::vector<double> beta(vocab.size(), 0.0);
  double beta_max = 0.0;
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    if (vocab.is_char_piece(static_cast<PieceId>(k))) continue;
    beta[k] = -std::log1p(-std::exp(scores[k]));
    beta_max = std::max(beta_max, beta[k]);
  }
  auto global_shift = [&](double b) {
    if (b == 0.0) return 0.0;
    return ordered_sum(nw, threads, [&](std::size_t w) {
      return table.counts[w] * (marginal_logprob(lattices[w], scores, -1, b) - base[w]);
    });
  };
  const ChebyshevInterpolant shift_gain(beta_max, beta_max > 0.0 ? 24 : 1, global_shift);

  std::vector<double> loss(vocab.size(), kInf);
  detail::parallel_for(vocab.size(), threads, [&](std::size_t k) {
    const auto id = static_cast<PieceId>(k);
    if (vocab.is_char_piece(id)) return;
    double affected = 0.0;
    for (auto w : words_of[k]) {
      const double without = marginal_logprob(lattices[w], scores, id, beta[k]);
      if (!std::isfinite(without)) {
        affected = -kInf;
        break;
      }
      const double with = marginal_logprob(lattices[w], scores, -1, beta[k]);
      affected += table.counts[w] * (without - with);
    }
    loss[k] = -(beta_max > 0.0 ? shift_gain(beta[k]) : 0.0) - affected;
  });
  return loss;
}

UnigramModel keep_pieces(const UnigramModel& model, const std::vector<bool>& keep) {
  std::vector<std::u32string> surfaces;
  std::vector<double> lps;
  for (const auto& p : model.vocab().pieces()) {
    if (!keep[static_cast<std::size_t>(p.id)]) continue;
    surfaces.push_back(p.surface);
    lps.push_back(model.log_prob(p.id));
  }
  double mass = 0.0;
  for (double lp : lps) mass += std::exp(lp);
  const double log_mass = std::log(mass);
  for (double& lp : lps) lp -= log_mass;
  return UnigramModel(Vocabulary(std::move(surfaces)), std::move(lps));
}

std::size_t char_piece_count(const Vocabulary& vocab) {
  std::size_t n = 0;
  for (const auto& p : vocab.pieces()) n += vocab.is_char_piece(p.id) ? 1 : 0;
  return n;
}

}  // namespace

UnigramModel seed_vocabulary(const Corpus& corpus, const TrainConfig& config) {
  if (corpus.empty()) throw std::invalid_argument("seed_vocabulary: empty corpus");
  return seed_from_table(WordTable::from_corpus(corpus), config);
}

double corpus_log_likelihood(const UnigramModel& model, const WordTable& table,
                             std::size_t threads) {
  return ordered_sum(table.words.size(), threads, [&](std::size_t w) {
    const auto lat = build_lattice(model, std::span<const std::u32string>(&table.words[w], 1));
    return table.counts[w] * marginal_logprob(lat);
  });
}

EmStepResult em_step(const UnigramModel& model, const WordTable& table, std::size_t threads) {
  const std::size_t nw = table.words.size();
  const std::size_t v = model.size();
  const std::size_t chunks = detail::num_chunks(nw);
  std::vector<std::vector<double>> partial_counts(chunks);
  std::vector<double> partial_ll(chunks, 0.0);
  const auto scores = model.log_probs();

  detail::parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<double> counts(v, 0.0);
    double ll = 0.0;
    const std::size_t lo = c * detail::kChunkSize;
    const std::size_t hi = std::min(nw, lo + detail::kChunkSize);
    for (std::size_t w = lo; w < hi; ++w) {
      const auto lat =
          build_lattice(model.vocab(), std::span<const std::u32string>(&table.words[w], 1));
      ll += table.counts[w] * accumulate_expected_counts(lat, scores, table.counts[w], counts);
    }
    partial_counts[c] = std::move(counts);
    partial_ll[c] = ll;
  });

  std::vector<double> counts(v, 0.0);
  double ll = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t k = 0; k < v; ++k) counts[k] += partial_counts[c][k];
    ll += partial_ll[c];
  }
  return EmStepResult{UnigramModel(model.vocab(), normalized_log_probs(counts)), ll};
}

EmStepResult em_step(const UnigramModel& model, const Corpus& corpus, std::size_t threads) {
  if (corpus.empty()) throw std::invalid_argument("em_step: empty corpus");
  return em_step(model, WordTable::from_corpus(corpus), threads);
}

std::vector<double> removal_losses(const UnigramModel& model, const WordTable& table,
                                   std::size_t threads) {
  const auto lattices = word_lattices(model.vocab(), table, threads);
  return removal_losses_impl(model, table, lattices, threads);
}

UnigramModel prune_to_size(const UnigramModel& model, const WordTable& table,
                           std::size_t target_size, std::size_t threads) {
  const Vocabulary& vocab = model.vocab();
  const std::size_t chars = char_piece_count(vocab);
  if (target_size < chars) {
    throw std::invalid_argument("cannot prune to " + std::to_string(target_size) +
                                " pieces: " + std::to_string(chars) +
                                " character pieces are required");
  }
  if (target_size >= vocab.size()) return model;

  const auto loss = removal_losses(model, table, threads);
  std::vector<PieceId> candidates;
  for (const auto& p : vocab.pieces()) {
    if (!vocab.is_char_piece(p.id)) candidates.push_back(p.id);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](PieceId a, PieceId b) {
    return loss[static_cast<std::size_t>(a)] > loss[static_cast<std::size_t>(b)];
  });
  std::vector<bool> keep(vocab.size(), false);
  for (const auto& p : vocab.pieces()) keep[static_cast<std::size_t>(p.id)] = vocab.is_char_piece(p.id);
  for (std::size_t i = 0; i < target_size - chars; ++i) {
    keep[static_cast<std::size_t>(candidates[i])] = true;
  }
  return keep_pieces(model, keep);
}

UnigramModel prune(const UnigramModel& model, const Corpus& corpus, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("keep_fraction must be in (0, 1]");
  }
  if (corpus.empty()) throw std::invalid_argument("prune: empty corpus");
  const std::size_t chars = char_piece_count(model.vocab());
  const std::size_t others = model.size() - chars;
  const auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(others)));
  return prune_to_size(model, WordTable::from_corpus(corpus), chars + std::min(keep, others));
}

UnigramModel train_unigram(const Corpus& corpus, const TrainConfig& config,
                           const EmTraceSink& trace) {
  if (corpus.empty()) throw std::invalid_argument("train_unigram: empty corpus");
  validate_config(config);
  const WordTable table = WordTable::from_corpus(corpus);
  const std::size_t required = 2 * corpus_alphabet(table).size();
  if (config.target_vocab_size < required) {
    throw std::invalid_argument("target vocabulary size " +
                                std::to_string(config.target_vocab_size) + " is below the " +
                                std::to_string(required) + " required character pieces");
  }

  UnigramModel model = seed_from_table(table, config);
  std::size_t round = 0;
  auto report = [&](std::size_t it, std::size_t size, double ll) {
    if (trace) trace(EmTraceEntry{round, it, size, ll});
  };

  while (model.size() > config.target_vocab_size) {
    for (std::size_t it = 0; it < config.em_iterations_per_round; ++it) {
      auto step = em_step(model, table, config.threads);
      report(it, model.size(), step.log_likelihood);
      model = std::move(step.model);
    }
    const auto shrunk = static_cast<std::size_t>(
        std::floor(static_cast<double>(model.size()) * config.shrink_factor));
    model = prune_to_size(model, table, std::max(config.target_vocab_size, shrunk),
                          config.threads);
    ++round;
  }

  double previous = 0.0;
  for (std::size_t it = 0; it < config.max_final_em_iterations; ++it) {
    auto step = em_step(model, table, config.threads);
    report(it, model.size(), step.log_likelihood);
    model = std::move(step.model);
    if (it > 0 && std::abs(step.log_likelihood - previous) <=
                      config.convergence_tol * std::abs(previous)) {
      break;
    }
    previous = step.log_likelihood;
  }
  return model;
}

bool has_character_coverage(const UnigramModel& model, const Corpus& corpus) {
  for (const auto& utt : corpus.utterances) {
    for (const auto& w : utt) {
      for (char32_t c : utf8::decode_or_throw(w)) {
        if (!model.vocab().covers(c)) return false;
      }
    }
  }
  return true;
}

}  // namespace segsample
