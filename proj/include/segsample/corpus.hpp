#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace segsample {

// A word sequence. Words are UTF-8, non-empty and whitespace-free.
using Words = std::vector<std::string>;

enum class Normalization {
  AsIs,                 // split on whitespace, keep case
  LowercaseWhitespace,  // simple-lowercase, then split on whitespace
};

struct Corpus {
  std::vector<Words> utterances;
  std::string source_path;
  Normalization policy = Normalization::LowercaseWhitespace;
  // Lines that were empty after normalization.
  std::size_t dropped_lines = 0;

  std::size_t token_count() const;
  bool empty() const { return utterances.empty(); }
};

// Splits one line into words under `policy`. Throws std::invalid_argument
// on ill-formed UTF-8 or if a word contains the reserved boundary marker.
Words normalize_line(std::string_view line, Normalization policy);

// Parses an in-memory corpus (one utterance per line, LF or CRLF).
// Errors are DataError carrying `source_name` and the 1-based line number.
Corpus parse_corpus(std::string_view text, Normalization policy,
                    std::string source_name = "<memory>");

Corpus load_corpus(const std::string& path,
                   Normalization policy = Normalization::LowercaseWhitespace);

struct WordInventory {
  // Ordered so that iteration and serialization are deterministic.
  std::map<std::string, std::uint64_t> counts;

  bool contains(const std::string& word) const { return counts.count(word) != 0; }
  std::size_t size() const { return counts.size(); }
  std::uint64_t total() const;
};

WordInventory word_inventory(const Corpus& corpus);

// One word per line; blank lines ignored. Every listed word gets count 1 per
// occurrence.
WordInventory load_word_list(const std::string& path);

struct UnseenWords {
  std::set<std::string> words;
  std::size_t unseen_tokens = 0;
  std::size_t total_tokens = 0;
  double rate = 0.0;
};

UnseenWords unseen_word_rate(const WordInventory& train, const Corpus& test);

// Reads a whole file; throws IoError on failure.
std::string read_file(const std::string& path);

}  // namespace segsample
