#include "segsample/metrics.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <set>
#include <stdexcept>

#include "segsample/error.hpp"
#include "segsample/utf8.hpp"

namespace segsample {

namespace {

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    fn(line_no, line);
  }
}

Words split_text(std::string_view text, const std::string& source, std::size_t line_no) {
  try {
    return normalize_line(text, Normalization::AsIs);
  } catch (const std::invalid_argument& e) {
    throw DataError(source, line_no, e.what());
  }
}

std::string join(const Words& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

void check_same_ids(const TranscriptSet& refs, const std::set<std::string>& other) {
  if (refs.size() != other.size()) {
    throw DataError("utterance count mismatch: " + std::to_string(refs.size()) + " references vs " +
                    std::to_string(other.size()) + " hypotheses");
  }
  for (const auto& [id, words] : refs) {
    if (!other.count(id)) throw DataError("no hypothesis for utterance '" + id + "'");
  }
}

void add_ops(EvalReport& r, const std::vector<AlignmentOp>& ops) {
  for (const auto& op : ops) {
    switch (op.kind) {
      case EditKind::Match: ++r.ref_token_count; break;
      case EditKind::Substitution: ++r.ref_token_count, ++r.substitutions; break;
      case EditKind::Deletion: ++r.ref_token_count, ++r.deletions; break;
      case EditKind::Insertion: ++r.insertions; break;
    }
  }
}

void finish(EvalReport& r) {
  if (r.ref_token_count > 0) {
    r.wer = static_cast<double>(r.errors()) / static_cast<double>(r.ref_token_count);
  } else {
    r.wer = r.errors() == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
}

}  // namespace

TranscriptSet parse_transcripts(std::string_view text, const std::string& source) {
  TranscriptSet out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw DataError(source, line_no, "expected `utt_id<TAB>text`");
    }
    std::string id(line.substr(0, tab));
    auto words = split_text(line.substr(tab + 1), source, line_no);
    if (!out.emplace(id, std::move(words)).second) {
      throw DataError(source, line_no, "duplicate utterance id '" + id + "'");
    }
  });
  return out;
}

TranscriptSet load_transcripts(const std::string& path) {
  return parse_transcripts(read_file(path), path);
}

NBestSet parse_nbest(std::string_view text, const std::string& source) {
  NBestSet out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    std::string_view fields[4];
    std::size_t start = 0;
    for (int f = 0; f < 3; ++f) {
      const auto tab = line.find('\t', start);
      if (tab == std::string_view::npos) {
        throw DataError(source, line_no, "expected `utt_id<TAB>rank<TAB>score<TAB>text`");
      }
      fields[f] = line.substr(start, tab - start);
      start = tab + 1;
    }
    fields[3] = line.substr(start);
    if (fields[0].empty()) throw DataError(source, line_no, "empty utterance id");

    const std::string rank_str(fields[1]);
    char* end = nullptr;
    errno = 0;
    const long long rank = std::strtoll(rank_str.c_str(), &end, 10);
    if (rank_str.empty() || end != rank_str.c_str() + rank_str.size() || rank < 1 || errno) {
      throw DataError(source, line_no, "bad rank '" + rank_str + "'");
    }
    const std::string score_str(fields[2]);
    const double score = std::strtod(score_str.c_str(), &end);
    if (score_str.empty() || end != score_str.c_str() + score_str.size()) {
      throw DataError(source, line_no, "bad score '" + score_str + "'");
    }

    auto& list = out[std::string(fields[0])];
    list.utt_id = std::string(fields[0]);
    list.hypotheses.push_back(
        Hypothesis{static_cast<std::size_t>(rank), score, split_text(fields[3], source, line_no)});
  });
  for (auto& [id, list] : out) {
    std::stable_sort(list.hypotheses.begin(), list.hypotheses.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.rank < b.rank; });
    for (std::size_t i = 0; i < list.hypotheses.size(); ++i) {
      if (list.hypotheses[i].rank != i + 1) {
        throw DataError(source + ": ranks of utterance '" + id + "' are not contiguous from 1");
      }
    }
  }
  return out;
}

NBestSet load_nbest(const std::string& path) { return parse_nbest(read_file(path), path); }

TranscriptSet first_best(const NBestSet& lists) {
  TranscriptSet out;
  for (const auto& [id, list] : lists) out.emplace(id, list.hypotheses.front().words);
  return out;
}

std::vector<AlignmentOp> align(const Words& ref, const Words& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  // cost[i][j]: minimal cost of aligning ref[i:] with hyp[j:].
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = n + 1; i-- > 0;) {
    for (std::size_t j = m + 1; j-- > 0;) {
      if (i == n) {
        at(i, j) = m - j;
      } else if (j == m) {
        at(i, j) = n - i;
      } else {
        at(i, j) = std::min({at(i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1), at(i + 1, j) + 1,
                             at(i, j + 1) + 1});
      }
    }
  }

  std::vector<AlignmentOp> ops;
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    const std::size_t here = at(i, j);
    if (i < n && j < m && ref[i] == hyp[j] && at(i + 1, j + 1) == here) {
      ops.push_back(AlignmentOp{EditKind::Match, ref[i], hyp[j]});
      ++i, ++j;
    } else if (i < n && j < m && ref[i] != hyp[j] && at(i + 1, j + 1) + 1 == here) {
      ops.push_back(AlignmentOp{EditKind::Substitution, ref[i], hyp[j]});
      ++i, ++j;
    } else if (i < n && at(i + 1, j) + 1 == here) {
      ops.push_back(AlignmentOp{EditKind::Deletion, ref[i], std::nullopt});
      ++i;
    } else {
      ops.push_back(AlignmentOp{EditKind::Insertion, std::nullopt, hyp[j]});
      ++j;
    }
  }
  return ops;
}

std::size_t edit_count(const std::vector<AlignmentOp>& ops) {
  std::size_t n = 0;
  for (const auto& op : ops) n += op.kind == EditKind::Match ? 0 : 1;
  return n;
}

EvalReport wer(const TranscriptSet& refs, const TranscriptSet& hyps) {
  std::set<std::string> ids;
  for (const auto& [id, w] : hyps) ids.insert(id);
  check_same_ids(refs, ids);
  EvalReport r;
  for (const auto& [id, ref] : refs) {
    add_ops(r, align(ref, hyps.at(id)));
    ++r.utterances;
  }
  finish(r);
  return r;
}

double werr(double base_wer, double new_wer) {
  if (!(base_wer > 0.0)) throw std::invalid_argument("werr: base WER must be > 0");
  return (base_wer - new_wer) / base_wer * 100.0;
}

EvalReport oracle_wer(const TranscriptSet& refs, const NBestSet& lists) {
  std::set<std::string> ids;
  for (const auto& [id, l] : lists) ids.insert(id);
  check_same_ids(refs, ids);
  EvalReport r;
  for (const auto& [id, ref] : refs) {
    std::vector<AlignmentOp> best;
    std::size_t best_edits = std::numeric_limits<std::size_t>::max();
    for (const auto& h : lists.at(id).hypotheses) {
      auto ops = align(ref, h.words);
      const std::size_t e = edit_count(ops);
      if (e < best_edits) {
        best_edits = e;
        best = std::move(ops);
      }
    }
    add_ops(r, best);
    ++r.utterances;
  }
  finish(r);
  return r;
}

double f_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

UnseenWordScores unseen_word_prf(const TranscriptSet& refs, const TranscriptSet& hyps,
                                 const WordInventory& seen) {
  std::set<std::string> ids;
  for (const auto& [id, w] : hyps) ids.insert(id);
  check_same_ids(refs, ids);
  UnseenWordScores s;
  auto unseen = [&](const std::optional<std::string>& w) { return w && !seen.contains(*w); };
  for (const auto& [id, ref] : refs) {
    for (const auto& op : align(ref, hyps.at(id))) {
      switch (op.kind) {
        case EditKind::Match:
          s.tp += unseen(op.ref_word) ? 1 : 0;
          break;
        case EditKind::Substitution:
          s.fn += unseen(op.ref_word) ? 1 : 0;
          s.fp += unseen(op.hyp_word) ? 1 : 0;
          break;
        case EditKind::Deletion:
          s.fn += unseen(op.ref_word) ? 1 : 0;
          break;
        case EditKind::Insertion:
          s.fp += unseen(op.hyp_word) ? 1 : 0;
          break;
      }
    }
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  s.precision = ratio(s.tp, s.tp + s.fp);
  s.recall = ratio(s.tp, s.tp + s.fn);
  s.f_score = f_score(s.precision, s.recall);
  return s;
}

double beam_diversity(const NBestSet& lists) {
  if (lists.empty()) throw std::invalid_argument("beam_diversity: no n-best lists");
  double sum = 0.0;
  for (const auto& [id, list] : lists) {
    if (list.hypotheses.empty()) throw std::invalid_argument("beam_diversity: empty list " + id);
    std::set<std::string> distinct;
    for (const auto& h : list.hypotheses) distinct.insert(join(h.words));
    sum += static_cast<double>(distinct.size()) / static_cast<double>(list.hypotheses.size());
  }
  return sum / static_cast<double>(lists.size());
}

LengthHistogram piece_length_histogram(
    const std::vector<std::vector<std::string>>& segmentations) {
  LengthHistogram h;
  for (const auto& seg : segmentations) {
    for (const auto& piece : seg) {
      auto chars = utf8::decode_or_throw(piece);
      std::size_t len = chars.size();
      if (len > 0 && chars.front() == kMarker) --len;
      ++h[len];
    }
  }
  return h;
}

std::map<std::size_t, double> histogram_change(const LengthHistogram& base,
                                               const LengthHistogram& updated) {
  std::map<std::size_t, double> out;
  for (const auto& [len, count] : base) {
    if (count == 0) continue;
    const auto it = updated.find(len);
    const double now = it == updated.end() ? 0.0 : static_cast<double>(it->second);
    out[len] = (now - static_cast<double>(count)) / static_cast<double>(count) * 100.0;
  }
  return out;
}

void write_report_line(std::ostream& out, std::string_view key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", value);
  out << key << '\t' << buf << '\n';
}

void write_report_line(std::ostream& out, std::string_view key, std::size_t value) {
  out << key << '\t' << value << '\n';
}

}  // namespace segsample
