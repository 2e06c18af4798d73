#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segsample/corpus.hpp"
#include "segsample/vocab.hpp"

namespace segsample {

// Vocabulary plus one natural-log probability per piece. P(y) is the product
// of its pieces' probabilities.
class UnigramModel {
 public:
  UnigramModel() = default;
  // Throws std::invalid_argument if sizes differ or a log prob is not finite.
  UnigramModel(Vocabulary vocab, std::vector<double> log_probs);

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t size() const { return vocab_.size(); }
  double log_prob(PieceId id) const { return log_probs_[static_cast<std::size_t>(id)]; }
  std::span<const double> log_probs() const { return log_probs_; }

  // Sum of exp(log_prob) over all pieces.
  double total_probability() const;

  bool operator==(const UnigramModel& other) const {
    return vocab_ == other.vocab_ && log_probs_ == other.log_probs_;
  }

 private:
  Vocabulary vocab_;
  std::vector<double> log_probs_;
};

// Model file: header "#segsample-unigram-v1", then `surface<TAB>log_prob`
// per piece in id order, log_prob with 17 significant digits.
std::string serialize_unigram(const UnigramModel& model);
UnigramModel parse_unigram(std::string_view text, const std::string& source = "<memory>");
void save_unigram(const UnigramModel& model, const std::string& path);
UnigramModel load_unigram(const std::string& path);

inline constexpr std::string_view kUnigramHeader = "#segsample-unigram-v1";

struct TrainConfig {
  std::size_t target_vocab_size = 8000;
  std::size_t seed_size = 100000;
  std::size_t max_piece_length = 16;  // characters, marker included
  double shrink_factor = 0.75;
  std::size_t em_iterations_per_round = 2;
  double convergence_tol = 1e-6;  // relative log-likelihood change
  std::size_t max_final_em_iterations = 50;
  std::size_t threads = 1;
};

// Word types of a corpus with their frequencies, decoded once. Training
// operates on these because pieces never cross word boundaries, so the corpus
// likelihood is a count-weighted sum of per-word likelihoods.
struct WordTable {
  std::vector<std::u32string> words;
  std::vector<double> counts;

  static WordTable from_corpus(const Corpus& corpus);
};

// Characters occurring in the corpus, sorted.
std::vector<char32_t> corpus_alphabet(const WordTable& table);

// Substrings of marker-decorated words up to max_piece_length, ranked by
// frequency x length, truncated to seed_size and unioned with "c" and "▁c"
// for every corpus character.
UnigramModel seed_vocabulary(const Corpus& corpus, const TrainConfig& config);

struct EmStepResult {
  UnigramModel model;
  double log_likelihood;  // under the input model
};

// One EM iteration: expected piece counts by forward-backward over every
// word lattice (E), then log_prob = log(count / total) (M). Pieces with zero
// expected count get kZeroCountProbability so every log prob stays finite.
EmStepResult em_step(const UnigramModel& model, const Corpus& corpus, std::size_t threads = 1);
EmStepResult em_step(const UnigramModel& model, const WordTable& table, std::size_t threads = 1);

// Count-weighted sum of per-word log marginal likelihoods.
double corpus_log_likelihood(const UnigramModel& model, const WordTable& table,
                             std::size_t threads = 1);

inline constexpr double kZeroCountProbability = 1e-30;

// Per-piece likelihood loss from removing a piece: L(model) minus the corpus
// log-likelihood of the model without that piece, the remaining
// probabilities held fixed and renormalized by 1 / (1 - p). Character pieces
// get +infinity (never removed).
std::vector<double> removal_losses(const UnigramModel& model, const WordTable& table,
                                   std::size_t threads = 1);

// Keeps ceil(keep_fraction * #non-character pieces) pieces with the largest
// removal loss, plus every character piece, and renormalizes.
UnigramModel prune(const UnigramModel& model, const Corpus& corpus, double keep_fraction);
UnigramModel prune_to_size(const UnigramModel& model, const WordTable& table,
                           std::size_t target_size, std::size_t threads = 1);

struct EmTraceEntry {
  std::size_t round;      // 0-based; the final convergence phase is its own round
  std::size_t iteration;  // within the round
  std::size_t vocab_size;
  double log_likelihood;
};

using EmTraceSink = std::function<void(const EmTraceEntry&)>;

// seed -> repeat { EM iterations; prune by shrink_factor } until the
// vocabulary reaches target_vocab_size, then EM to convergence.
UnigramModel train_unigram(const Corpus& corpus, const TrainConfig& config,
                           const EmTraceSink& trace = {});

// Every corpus character has both its plain and marker piece.
bool has_character_coverage(const UnigramModel& model, const Corpus& corpus);

}  // namespace segsample
