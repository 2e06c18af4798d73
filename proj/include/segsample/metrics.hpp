#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "segsample/corpus.hpp"

namespace segsample {

// utt_id -> words. Ids are unique.
using TranscriptSet = std::map<std::string, Words>;

struct Hypothesis {
  std::size_t rank = 1;
  double score = 0.0;
  Words words;
};

struct NBestList {
  std::string utt_id;
  std::vector<Hypothesis> hypotheses;  // ranks 1..n in order
};

using NBestSet = std::map<std::string, NBestList>;

// `utt_id<TAB>text` per line. Throws DataError (with line number) on a
// missing tab or duplicate id.
TranscriptSet parse_transcripts(std::string_view text, const std::string& source = "<memory>");
TranscriptSet load_transcripts(const std::string& path);

// `utt_id<TAB>rank<TAB>score<TAB>text` per line. Lines of one utterance may
// come in any order; ranks must end up contiguous from 1.
NBestSet parse_nbest(std::string_view text, const std::string& source = "<memory>");
NBestSet load_nbest(const std::string& path);

// Rank-1 hypothesis of every list.
TranscriptSet first_best(const NBestSet& lists);

enum class EditKind { Match, Substitution, Deletion, Insertion };

struct AlignmentOp {
  EditKind kind;
  std::optional<std::string> ref_word;
  std::optional<std::string> hyp_word;

  bool operator==(const AlignmentOp&) const = default;
};

// Unit-cost Levenshtein alignment. Among optimal alignments, operations are
// chosen left to right preferring Match, Substitution, Deletion, Insertion.
std::vector<AlignmentOp> align(const Words& ref, const Words& hyp);

// Substitutions + deletions + insertions of an alignment.
std::size_t edit_count(const std::vector<AlignmentOp>& ops);

struct EvalReport {
  double wer = 0.0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_token_count = 0;
  std::size_t utterances = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
};

// Corpus-level WER: pooled edits over pooled reference tokens. Throws
// DataError when the id sets differ.
EvalReport wer(const TranscriptSet& refs, const TranscriptSet& hyps);

// Relative reduction (base - new) / base, in percent. base must be > 0.
double werr(double base_wer, double new_wer);

// Per utterance, the hypothesis with the fewest edits (lowest rank on ties).
EvalReport oracle_wer(const TranscriptSet& refs, const NBestSet& lists);

struct UnseenWordScores {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// F from precision and recall; 0 when both are 0.
double f_score(double precision, double recall);

// Unseen-word detection as binary classification over alignment ops:
// tp = Match of an unseen word; fn = Substitution/Deletion of an unseen
// reference word; fp = Substitution/Insertion of an unseen hypothesis word.
UnseenWordScores unseen_word_prf(const TranscriptSet& refs, const TranscriptSet& hyps,
                                 const WordInventory& seen);

// Mean over lists of (#distinct hypothesis texts) / (list size).
double beam_diversity(const NBestSet& lists);

// Piece length in characters (marker excluded) -> count.
using LengthHistogram = std::map<std::size_t, std::size_t>;

LengthHistogram piece_length_histogram(const std::vector<std::vector<std::string>>& segmentations);

// Relative change (new - base) / base in percent for every length present in
// `base` with a non-zero count.
std::map<std::size_t, double> histogram_change(const LengthHistogram& base,
                                               const LengthHistogram& updated);

// `key<TAB>value` lines.
void write_report_line(std::ostream& out, std::string_view key, double value);
void write_report_line(std::ostream& out, std::string_view key, std::size_t value);

}  // namespace segsample
