#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "segsample/corpus.hpp"
#include "segsample/lattice.hpp"
#include "segsample/random.hpp"
#include "segsample/vocab.hpp"

namespace segsample {

struct BpeMerge {
  std::u32string left;
  std::u32string right;

  bool operator==(const BpeMerge&) const = default;
};

// Ordered merge list over marker-decorated words. The marker is its own
// initial symbol, so "▁" is always in the vocabulary.
class BpeModel {
 public:
  BpeModel() : BpeModel({}, {}) {}
  // Throws std::invalid_argument on a duplicate merge or an operand that is
  // neither an alphabet character nor produced by an earlier merge.
  BpeModel(std::vector<char32_t> alphabet, std::vector<BpeMerge> merges);

  const std::vector<char32_t>& alphabet() const { return alphabet_; }
  const std::vector<BpeMerge>& merges() const { return merges_; }
  // "▁", the alphabet, then every merge result in merge order.
  const Vocabulary& vocab() const { return vocab_; }

  struct Rule {
    std::size_t rank;
    PieceId result;
  };
  std::optional<Rule> rule(PieceId left, PieceId right) const;

  bool operator==(const BpeModel& other) const {
    return alphabet_ == other.alphabet_ && merges_ == other.merges_;
  }

 private:
  std::vector<char32_t> alphabet_;
  std::vector<BpeMerge> merges_;
  Vocabulary vocab_;
  std::unordered_map<std::uint64_t, Rule> rules_;
};

// Most frequent adjacent pair first (word-frequency weighted), ties to the
// lexicographically smallest (left, right). Stops after num_merges or when
// no pair occurs at least twice.
BpeModel train_bpe(const Corpus& corpus, std::size_t num_merges);

// Greedy encoding: repeatedly merges every occurrence of the lowest-rank
// applicable pair. Throws DataError on a character outside the alphabet.
Segmentation bpe_encode(const BpeModel& model, const Words& words);

// As bpe_encode, but each applicable pair occurrence is skipped with
// probability p_drop at every merge step. p_drop = 0 draws no randomness
// and is identical to bpe_encode.
Segmentation bpe_dropout_encode(const BpeModel& model, const Words& words, double p_drop,
                                Rng& rng);

// Header "#segsample-bpe-v1", an "#alphabet<TAB>chars" line, then one
// `left<SPACE>right` merge per line in application order.
std::string serialize_bpe(const BpeModel& model);
BpeModel parse_bpe(std::string_view text, const std::string& source = "<memory>");
void save_bpe(const BpeModel& model, const std::string& path);
BpeModel load_bpe(const std::string& path);

inline constexpr std::string_view kBpeHeader = "#segsample-bpe-v1";

}  // namespace segsample
