#include "segsample/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>

#include "segsample/error.hpp"

namespace segsample {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void build_csr(std::size_t num_nodes, const std::vector<LatticeEdge>& edges, bool by_end,
               std::vector<std::uint32_t>& offsets, std::vector<std::uint32_t>& index) {
  offsets.assign(num_nodes + 1, 0);
  for (const auto& e : edges) ++offsets[(by_end ? e.end : e.start) + 1];
  for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
  index.assign(edges.size(), 0);
  std::vector<std::uint32_t> fill(offsets.begin(), offsets.end() - 1);
  for (std::uint32_t i = 0; i < edges.size(); ++i) {
    const auto node = by_end ? edges[i].end : edges[i].start;
    index[fill[node]++] = i;
  }
}

std::vector<std::u32string> decode_words(const Words& words) {
  std::vector<std::u32string> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    auto d = utf8::decode(w);
    if (!d) throw DataError("invalid UTF-8 in word");
    out.push_back(std::move(*d));
  }
  return out;
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

}  // namespace

SegmentationLattice build_lattice_impl(const Vocabulary& vocab, std::span<const double> scores,
                                       std::span<const std::u32string> words) {
  SegmentationLattice lat;
  std::size_t total = 0;
  for (const auto& w : words) total += w.size();
  lat.text_.reserve(total);

  std::u32string decorated;
  for (const auto& w : words) {
    if (w.empty()) throw std::invalid_argument("build_lattice: empty word");
    const auto off = static_cast<std::uint32_t>(lat.text_.size());
    lat.word_starts_.push_back(off);
    lat.text_ += w;

    auto add = [&](std::uint32_t start, std::uint32_t end, PieceId id) {
      const double s = scores.empty() ? 0.0 : scores[static_cast<std::size_t>(id)];
      lat.edges_.push_back(LatticeEdge{start, end, id, s});
    };

    decorated.assign(1, kMarker);
    decorated += w;
    vocab.for_each_prefix(decorated, [&](PieceId id, std::size_t len) {
      // A bare marker covers no character and never forms an edge.
      if (len >= 2) add(off, off + static_cast<std::uint32_t>(len - 1), id);
    });
    for (std::size_t i = 1; i < w.size(); ++i) {
      vocab.for_each_prefix(std::u32string_view(w).substr(i), [&](PieceId id, std::size_t len) {
        add(off + static_cast<std::uint32_t>(i), off + static_cast<std::uint32_t>(i + len), id);
      });
    }
  }

  std::sort(lat.edges_.begin(), lat.edges_.end(), [](const LatticeEdge& a, const LatticeEdge& b) {
    if (a.end != b.end) return a.end < b.end;
    if (a.start != b.start) return a.start < b.start;
    return a.piece < b.piece;
  });
  const std::size_t n = lat.num_nodes();
  build_csr(n, lat.edges_, true, lat.in_offsets_, lat.in_index_);
  build_csr(n, lat.edges_, false, lat.out_offsets_, lat.out_index_);

  std::vector<char> reach(n, 0);
  reach[0] = 1;
  for (std::size_t p = 0; p + 1 < n; ++p) {
    if (!reach[p]) continue;
    for (auto ei : lat.outgoing(p)) reach[lat.edges_[ei].end] = 1;
  }
  if (!reach[n - 1]) {
    // Report the first reachable position that cannot be left.
    std::size_t stuck = 0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      bool leaves = false;
      for (auto ei : lat.outgoing(p)) leaves = leaves || reach[lat.edges_[ei].end];
      if (reach[p] && !leaves) {
        stuck = p;
        break;
      }
    }
    const auto wi = static_cast<std::size_t>(
        std::upper_bound(lat.word_starts_.begin(), lat.word_starts_.end(), stuck) -
        lat.word_starts_.begin() - 1);
    const std::size_t offset = stuck - lat.word_starts_[wi];
    throw DataError("no segmentation for word '" + utf8::encode(words[wi]) + "': character '" +
                    utf8::encode(words[wi][offset]) + "' at offset " + std::to_string(offset) +
                    " is not covered");
  }
  return lat;
}

SegmentationLattice build_lattice(const Vocabulary& vocab, std::span<const std::u32string> words) {
  return build_lattice_impl(vocab, {}, words);
}

SegmentationLattice build_lattice(const UnigramModel& model,
                                  std::span<const std::u32string> words) {
  return build_lattice_impl(model.vocab(), model.log_probs(), words);
}

SegmentationLattice build_lattice(const Vocabulary& vocab, const Words& words) {
  const auto decoded = decode_words(words);
  return build_lattice_impl(vocab, {}, decoded);
}

SegmentationLattice build_lattice(const UnigramModel& model, const Words& words) {
  const auto decoded = decode_words(words);
  return build_lattice_impl(model.vocab(), model.log_probs(), decoded);
}

std::u32string SegmentationLattice::decorated_text() const {
  std::u32string out;
  std::size_t w = 0;
  for (std::size_t i = 0; i < text_.size(); ++i) {
    if (w < word_starts_.size() && word_starts_[w] == i) {
      out.push_back(kMarker);
      ++w;
    }
    out.push_back(text_[i]);
  }
  return out;
}

std::span<const std::uint32_t> SegmentationLattice::incoming(std::size_t node) const {
  return std::span<const std::uint32_t>(in_index_).subspan(
      in_offsets_[node], in_offsets_[node + 1] - in_offsets_[node]);
}

std::span<const std::uint32_t> SegmentationLattice::outgoing(std::size_t node) const {
  return std::span<const std::uint32_t>(out_index_).subspan(
      out_offsets_[node], out_offsets_[node + 1] - out_offsets_[node]);
}

bool segmentation_before(const Segmentation& a, const Segmentation& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.pieces.size() != b.pieces.size()) return a.pieces.size() < b.pieces.size();
  return a.pieces < b.pieces;
}

namespace {

// Partial path ending at some node: the last edge plus the rank of the
// predecessor prefix in its node's list.
struct Prefix {
  double score;
  std::uint32_t count;
  std::int32_t edge;
  std::int32_t prev_rank;
};

class KBest {
 public:
  KBest(const SegmentationLattice& lat, std::size_t n) : lat_(lat), n_(n), lists_(lat.num_nodes()) {}

  // Rounding can collapse two different prefix scores into equal totals once
  // a shared suffix is added, after which the tie-break may favour the lower
  // prefix. Each addition narrows a gap by at most one ulp of the running
  // sum, so prefixes within (length + 1) ulps of the n-th best are kept too.
  void run() {
    const double slack = rounding_slack();
    lists_[0].push_back(Prefix{0.0, 0, -1, -1});
    std::vector<Prefix> cands;
    std::priority_queue<double, std::vector<double>, std::greater<>> best;  // n best scores so far
    for (std::size_t j = 1; j < lat_.num_nodes(); ++j) {
      cands.clear();
      best = {};
      for (auto ei : lat_.incoming(j)) {
        const LatticeEdge& e = lat_.edges()[ei];
        const auto& src = lists_[e.start];
        for (std::size_t r = 0; r < src.size(); ++r) {
          const double score = src[r].score + e.score;
          // src is sorted by descending score and addition is monotone.
          if (best.size() == n_ && score < best.top() - slack) break;
          cands.push_back(Prefix{score, src[r].count + 1, static_cast<std::int32_t>(ei),
                                 static_cast<std::int32_t>(r)});
          if (best.size() < n_) {
            best.push(score);
          } else if (score > best.top()) {
            best.pop();
            best.push(score);
          }
        }
      }
      std::sort(cands.begin(), cands.end(), [this](const Prefix& a, const Prefix& b) { return before(a, b); });
      std::size_t keep = std::min(n_, cands.size());
      if (keep > 0) {
        const double cut = cands[keep - 1].score - slack;
        while (keep < cands.size() && cands[keep].score >= cut) ++keep;
      }
      lists_[j].assign(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep));
    }
  }

  std::vector<Segmentation> results() const {
    std::vector<Segmentation> out;
    const auto& last = lists_.back();
    const std::size_t k = std::min(n_, last.size());
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(Segmentation{materialize(last[i]), last[i].score});
    return out;
  }

 private:
  std::vector<PieceId> materialize(const Prefix& p) const {
    std::vector<PieceId> ids;
    ids.reserve(p.count);
    const Prefix* cur = &p;
    while (cur->edge >= 0) {
      const LatticeEdge& e = lat_.edges()[static_cast<std::size_t>(cur->edge)];
      ids.push_back(e.piece);
      cur = &lists_[e.start][static_cast<std::size_t>(cur->prev_rank)];
    }
    std::reverse(ids.begin(), ids.end());
    return ids;
  }

  // Upper bound on one ulp of any partial path sum, times the path length.
  double rounding_slack() const {
    std::vector<double> reach(lat_.num_nodes(), 0.0);
    for (std::size_t j = 1; j < lat_.num_nodes(); ++j) {
      for (auto ei : lat_.incoming(j)) {
        const LatticeEdge& e = lat_.edges()[ei];
        reach[j] = std::max(reach[j], reach[e.start] + std::abs(e.score));
      }
    }
    const double m = std::max(reach.back(), std::numeric_limits<double>::min());
    return static_cast<double>(lat_.num_nodes()) * m * 0x1.0p-51;
  }

  bool before(const Prefix& a, const Prefix& b) const {
    if (a.score != b.score) return a.score > b.score;
    if (a.count != b.count) return a.count < b.count;
    return materialize(a) < materialize(b);
  }

  const SegmentationLattice& lat_;
  std::size_t n_;
  std::vector<std::vector<Prefix>> lists_;
};

}  // namespace

std::vector<Segmentation> nbest(const SegmentationLattice& lattice, std::size_t n) {
  if (n == 0) throw std::invalid_argument("nbest: n must be >= 1");
  KBest kb(lattice, n);
  kb.run();
  auto out = kb.results();
  if (out.empty()) throw std::logic_error("nbest: lattice has no path");
  return out;
}

Segmentation viterbi_1best(const SegmentationLattice& lattice) {
  return nbest(lattice, 1).front();
}

std::vector<Segmentation> enumerate_all(const SegmentationLattice& lattice, std::size_t cap) {
  std::vector<Segmentation> out;
  std::vector<PieceId> stack;
  const std::size_t last = lattice.length();
  auto dfs = [&](auto&& self, std::size_t node, double score) -> void {
    if (node == last) {
      if (out.size() >= cap) throw std::length_error("enumerate_all: path cap exceeded");
      out.push_back(Segmentation{stack, score});
      return;
    }
    for (auto ei : lattice.outgoing(node)) {
      const LatticeEdge& e = lattice.edges()[ei];
      stack.push_back(e.piece);
      self(self, e.end, score + e.score);
      stack.pop_back();
    }
  };
  dfs(dfs, 0, 0.0);
  return out;
}

double count_paths(const SegmentationLattice& lattice) {
  std::vector<double> ways(lattice.num_nodes(), 0.0);
  ways[0] = 1.0;
  for (std::size_t j = 1; j < lattice.num_nodes(); ++j) {
    for (auto ei : lattice.incoming(j)) ways[j] += ways[lattice.edges()[ei].start];
  }
  return ways.back();
}

namespace {

// Forward log-sum-exp; edge score from `scores` when non-empty.
std::vector<double> forward(const SegmentationLattice& lat, std::span<const double> scores,
                            PieceId excluded, double shift = 0.0) {
  std::vector<double> alpha(lat.num_nodes(), kNegInf);
  alpha[0] = 0.0;
  for (std::size_t j = 1; j < lat.num_nodes(); ++j) {
    double m = kNegInf;
    for (auto ei : lat.incoming(j)) {
      const LatticeEdge& e = lat.edges()[ei];
      if (e.piece == excluded) continue;
      const double s = (scores.empty() ? e.score : scores[static_cast<std::size_t>(e.piece)]) + shift;
      m = std::max(m, alpha[e.start] + s);
    }
    if (m == kNegInf) continue;
    double sum = 0.0;
    for (auto ei : lat.incoming(j)) {
      const LatticeEdge& e = lat.edges()[ei];
      if (e.piece == excluded) continue;
      const double s = (scores.empty() ? e.score : scores[static_cast<std::size_t>(e.piece)]) + shift;
      sum += std::exp(alpha[e.start] + s - m);
    }
    alpha[j] = m + std::log(sum);
  }
  return alpha;
}

}  // namespace

double marginal_logprob(const SegmentationLattice& lattice) {
  return forward(lattice, {}, -1).back();
}

double marginal_logprob(const SegmentationLattice& lattice, std::span<const double> piece_scores,
                        PieceId excluded, double shift) {
  return forward(lattice, piece_scores, excluded, shift).back();
}

double accumulate_expected_counts(const SegmentationLattice& lat,
                                  std::span<const double> piece_scores, double weight,
                                  std::span<double> counts) {
  const auto alpha = forward(lat, piece_scores, -1);
  const double z = alpha.back();
  std::vector<double> beta(lat.num_nodes(), kNegInf);
  beta.back() = 0.0;
  for (std::size_t j = lat.num_nodes() - 1; j-- > 0;) {
    double acc = kNegInf;
    for (auto ei : lat.outgoing(j)) {
      const LatticeEdge& e = lat.edges()[ei];
      acc = log_add(acc, piece_scores[static_cast<std::size_t>(e.piece)] + beta[e.end]);
    }
    beta[j] = acc;
  }
  for (const auto& e : lat.edges()) {
    const double post =
        std::exp(alpha[e.start] + piece_scores[static_cast<std::size_t>(e.piece)] + beta[e.end] - z);
    counts[static_cast<std::size_t>(e.piece)] += weight * post;
  }
  return z;
}

void validate(const SampleParams& params) {
  if (!(params.alpha >= 0.0) || std::isnan(params.alpha)) {
    throw std::invalid_argument("alpha must be >= 0");
  }
  if (params.n_best < 1) throw std::invalid_argument("n_best must be >= 1");
}

std::size_t sample_candidate(std::span<const Segmentation> candidates, double alpha,
                             double infinite_alpha, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("sample_candidate: no candidates");
  if (candidates.size() == 1 || alpha >= infinite_alpha) return 0;
  const double best = candidates.front().log_prob;
  std::vector<double> cdf(candidates.size());
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    // Relative to the best keeps the weights in (0, 1].
    total += std::exp(alpha * (candidates[i].log_prob - best));
    cdf[i] = total;
  }
  double u = uniform01(rng) * total;
  if (u >= total) u = std::nextafter(total, 0.0);
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

Segmentation sample_alpha_nbest(const SegmentationLattice& lattice, const SampleParams& params,
                                Rng& rng) {
  validate(params);
  if (params.n_best == 1 || params.alpha >= params.infinite_alpha) {
    return viterbi_1best(lattice);
  }
  const auto candidates = nbest(lattice, params.n_best);
  return candidates[sample_candidate(candidates, params.alpha, params.infinite_alpha, rng)];
}

std::vector<std::string> piece_strings(const Vocabulary& vocab, const Segmentation& seg) {
  std::vector<std::string> out;
  out.reserve(seg.pieces.size());
  for (auto id : seg.pieces) out.push_back(vocab.surface_utf8(id));
  return out;
}

}  // namespace segsample
