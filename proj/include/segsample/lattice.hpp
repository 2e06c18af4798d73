#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segsample/corpus.hpp"
#include "segsample/random.hpp"
#include "segsample/unigram.hpp"
#include "segsample/vocab.hpp"

namespace segsample {

struct LatticeEdge {
  std::uint32_t start;
  std::uint32_t end;
  PieceId piece;
  double score;  // log p(piece); 0 for lattices built from a bare vocabulary
};

// DAG over the character positions 0..L of a word sequence (markers are not
// positions). Word-initial edges carry marker pieces; no edge crosses a word
// boundary.
class SegmentationLattice {
 public:
  std::size_t length() const { return text_.size(); }
  std::size_t num_nodes() const { return text_.size() + 1; }
  // Characters of all words, concatenated without markers.
  const std::u32string& text() const { return text_; }
  // The text with a marker before each word.
  std::u32string decorated_text() const;
  const std::vector<std::uint32_t>& word_starts() const { return word_starts_; }

  // Edges sorted by (end, start, piece).
  const std::vector<LatticeEdge>& edges() const { return edges_; }
  // Indices into edges() of edges ending / starting at `node`.
  std::span<const std::uint32_t> incoming(std::size_t node) const;
  std::span<const std::uint32_t> outgoing(std::size_t node) const;

 private:
  friend SegmentationLattice build_lattice_impl(const Vocabulary&, std::span<const double>,
                                                std::span<const std::u32string>);

  std::u32string text_;
  std::vector<std::uint32_t> word_starts_;
  std::vector<LatticeEdge> edges_;
  std::vector<std::uint32_t> in_offsets_, in_index_;
  std::vector<std::uint32_t> out_offsets_, out_index_;
};

// Throws DataError naming the word and character offset when some word has
// no complete segmentation (uncovered character).
SegmentationLattice build_lattice(const Vocabulary& vocab, const Words& words);
SegmentationLattice build_lattice(const UnigramModel& model, const Words& words);
SegmentationLattice build_lattice(const UnigramModel& model,
                                  std::span<const std::u32string> words);
SegmentationLattice build_lattice(const Vocabulary& vocab, std::span<const std::u32string> words);

struct Segmentation {
  std::vector<PieceId> pieces;
  double log_prob = 0.0;  // left-to-right sum of edge scores

  bool operator==(const Segmentation&) const = default;
};

// Total order used for 1-best and N-best: higher log_prob first, then fewer
// pieces, then lexicographically smaller piece-id sequence.
bool segmentation_before(const Segmentation& a, const Segmentation& b);

Segmentation viterbi_1best(const SegmentationLattice& lattice);

// The min(n, #paths) best distinct paths in segmentation_before order.
// Exact: keeps the n best prefixes per node, which suffices because the
// order is preserved when two prefixes are extended by the same suffix.
std::vector<Segmentation> nbest(const SegmentationLattice& lattice, std::size_t n);

inline constexpr std::size_t kDefaultEnumerationCap = 1'000'000;

// Every path exactly once (order unspecified). Throws std::length_error when
// the lattice has more than `cap` paths.
std::vector<Segmentation> enumerate_all(const SegmentationLattice& lattice,
                                        std::size_t cap = kDefaultEnumerationCap);

// Number of paths as a double (may be huge).
double count_paths(const SegmentationLattice& lattice);

// log sum over paths of exp(sum of edge scores).
double marginal_logprob(const SegmentationLattice& lattice);

// Same, scoring edges with piece_scores[piece] + shift and dropping edges of
// `excluded` (-1 for none). Returns -inf when no path survives.
double marginal_logprob(const SegmentationLattice& lattice, std::span<const double> piece_scores,
                        PieceId excluded = -1, double shift = 0.0);

// Forward-backward: adds weight * posterior edge mass into counts[piece] and
// returns the log marginal.
double accumulate_expected_counts(const SegmentationLattice& lattice,
                                  std::span<const double> piece_scores, double weight,
                                  std::span<double> counts);

struct SampleParams {
  double alpha = 0.25;
  std::size_t n_best = 200;
  // alpha at or above this is treated as the delta at the 1-best.
  double infinite_alpha = 1e6;
};

void validate(const SampleParams& params);

// Index drawn from P(i) proportional to exp(alpha * log_prob_i) over the
// candidates (inverse CDF, one uniform draw). Candidates must be in
// segmentation_before order; the delta case returns 0 without consuming
// randomness.
std::size_t sample_candidate(std::span<const Segmentation> candidates, double alpha,
                             double infinite_alpha, Rng& rng);

// Draw from the temperature-scaled distribution restricted to the N-best,
// normalized over the N-best only.
Segmentation sample_alpha_nbest(const SegmentationLattice& lattice, const SampleParams& params,
                                Rng& rng);

// UTF-8 surfaces of a segmentation.
std::vector<std::string> piece_strings(const Vocabulary& vocab, const Segmentation& seg);

}  // namespace segsample
