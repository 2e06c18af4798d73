#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "segsample/corpus.hpp"
#include "segsample/lattice.hpp"
#include "segsample/random.hpp"
#include "segsample/unigram.hpp"

namespace segsample {

// The per-example entry point for a training loop: one segmentation of the
// whole word sequence drawn from the N-best restricted, temperature-scaled
// distribution. alpha >= params.infinite_alpha (or n_best == 1) returns the
// 1-best without consuming randomness.
Segmentation sample_sentence(const UnigramModel& model, const Words& words,
                             const SampleParams& params, Rng& rng);

// 1-best (Viterbi) segmentation of a word sequence.
Segmentation encode_sentence(const UnigramModel& model, const Words& words);

// Token-level Levenshtein distance between piece sequences.
std::size_t piece_edit_distance(const std::vector<PieceId>& a, const std::vector<PieceId>& b);

struct EditsCurvePoint {
  double alpha = 0.0;
  std::size_t n_best = 1;
  double expected_edits_per_wordpiece = 0.0;
  std::size_t samples_used = 0;
  double std_error = 0.0;
  std::uint64_t seed = 0;  // stream seed used for this point
};

struct EditsCurveConfig {
  std::vector<double> alphas;
  std::vector<std::size_t> ns;
  std::size_t samples_per_point = 1000;
  std::uint64_t seed = 0;
  double infinite_alpha = 1e6;
  std::size_t threads = 1;
};

// For every (alpha, N) pair (alphas outer, ns inner): draw sentences
// uniformly with replacement, sample a segmentation, and average
// edit_distance(sample, 1-best) / |1-best|. Each point uses its own stream
// seeded from config.seed and the point index, so points are independent of
// evaluation order and thread count.
std::vector<EditsCurvePoint> expected_edits_curve(const UnigramModel& model, const Corpus& corpus,
                                                  const EditsCurveConfig& config);

// TSV with header `alpha<TAB>n_best<TAB>edits_per_wp<TAB>samples`.
void write_edits_tsv(std::ostream& out, const std::vector<EditsCurvePoint>& points);

}  // namespace segsample
