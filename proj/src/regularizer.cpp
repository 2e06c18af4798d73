#include "segsample/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "parallel.hpp"

namespace segsample {

Segmentation sample_sentence(const UnigramModel& model, const Words& words,
                             const SampleParams& params, Rng& rng) {
  const auto lattice = build_lattice(model, words);
  return sample_alpha_nbest(lattice, params, rng);
}

Segmentation encode_sentence(const UnigramModel& model, const Words& words) {
  return viterbi_1best(build_lattice(model, words));
}

std::size_t piece_edit_distance(const std::vector<PieceId>& a, const std::vector<PieceId>& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

namespace {

// N-best candidates of one sentence with their normalized edit distance to
// the 1-best, computed on first use. Smaller N use a prefix of the list.
struct SentenceCache {
  std::once_flag once;
  std::vector<Segmentation> candidates;
  std::vector<double> edit_ratio;
};

}  // namespace

std::vector<EditsCurvePoint> expected_edits_curve(const UnigramModel& model, const Corpus& corpus,
                                                  const EditsCurveConfig& config) {
  if (config.samples_per_point < 1) throw std::invalid_argument("samples_per_point must be >= 1");
  if (corpus.empty()) throw std::invalid_argument("expected_edits_curve: empty corpus");
  for (double a : config.alphas) validate(SampleParams{a, 1, config.infinite_alpha});
  for (std::size_t n : config.ns) {
    if (n < 1) throw std::invalid_argument("n_best must be >= 1");
  }
  std::size_t max_n = 1;
  for (std::size_t n : config.ns) max_n = std::max(max_n, n);

  std::vector<SentenceCache> cache(corpus.utterances.size());
  auto entry = [&](std::size_t u) -> const SentenceCache& {
    SentenceCache& c = cache[u];
    std::call_once(c.once, [&] {
      c.candidates = nbest(build_lattice(model, corpus.utterances[u]), max_n);
      const auto& best = c.candidates.front().pieces;
      for (const auto& cand : c.candidates) {
        c.edit_ratio.push_back(static_cast<double>(piece_edit_distance(cand.pieces, best)) /
                               static_cast<double>(best.size()));
      }
    });
    return c;
  };

  std::vector<EditsCurvePoint> points;
  for (double a : config.alphas) {
    for (std::size_t n : config.ns) {
      EditsCurvePoint p;
      p.alpha = a;
      p.n_best = n;
      p.seed = mix_seed(config.seed ^ mix_seed(points.size()));
      points.push_back(p);
    }
  }

  detail::parallel_for(points.size(), config.threads, [&](std::size_t pi) {
    EditsCurvePoint& p = points[pi];
    Rng rng(p.seed);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t s = 0; s < config.samples_per_point; ++s) {
      const auto u = static_cast<std::size_t>(uniform_index(rng, corpus.utterances.size()));
      const SentenceCache& c = entry(u);
      const std::size_t k = std::min(p.n_best, c.candidates.size());
      const std::size_t pick =
          sample_candidate(std::span<const Segmentation>(c.candidates.data(), k), p.alpha,
                           config.infinite_alpha, rng);
      const double r = c.edit_ratio[pick];
      sum += r;
      sum_sq += r * r;
    }
    const auto n = static_cast<double>(config.samples_per_point);
    p.samples_used = config.samples_per_point;
    p.expected_edits_per_wordpiece = sum / n;
    if (config.samples_per_point > 1) {
      const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
      p.std_error = std::sqrt(var / n);
    }
  });
  return points;
}

void write_edits_tsv(std::ostream& out, const std::vector<EditsCurvePoint>& points) {
  out << "alpha\tn_best\tedits_per_wp\tsamples\n";
  char buf[64];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.expected_edits_per_wordpiece);
    out << p.alpha << '\t' << p.n_best << '\t' << buf << '\t' << p.samples_used << '\n';
  }
}

}  // namespace segsample
