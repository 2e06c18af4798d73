#include "segsample/corpus.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "segsample/error.hpp"
#include "segsample/utf8.hpp"

namespace segsample {

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.size();
  return n;
}

std::uint64_t WordInventory::total() const {
  std::uint64_t n = 0;
  for (const auto& [word, count] : counts) n += count;
  return n;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

Words normalize_line(std::string_view line, Normalization policy) {
  const auto chars = utf8::decode(line);
  if (!chars) throw std::invalid_argument("invalid UTF-8 byte sequence");

  Words words;
  std::u32string current;
  auto flush = [&] {
    if (current.empty()) return;
    words.push_back(utf8::encode(current));
    current.clear();
  };
  for (char32_t c : *chars) {
    if (utf8::is_space(c)) {
      flush();
      continue;
    }
    if (c == kMarker) {
      throw std::invalid_argument("word contains the reserved marker U+2581");
    }
    current.push_back(policy == Normalization::LowercaseWhitespace ? utf8::to_lower(c) : c);
  }
  flush();
  return words;
}

Corpus parse_corpus(std::string_view text, Normalization policy, std::string source_name) {
  Corpus corpus;
  corpus.source_path = std::move(source_name);
  corpus.policy = policy;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    Words words;
    try {
      words = normalize_line(line, policy);
    } catch (const std::invalid_argument& e) {
      throw DataError(corpus.source_path, line_no, e.what());
    }
    if (words.empty()) {
      ++corpus.dropped_lines;
    } else {
      corpus.utterances.push_back(std::move(words));
    }
  }
  return corpus;
}

Corpus load_corpus(const std::string& path, Normalization policy) {
  return parse_corpus(read_file(path), policy, path);
}

WordInventory word_inventory(const Corpus& corpus) {
  if (corpus.empty()) throw std::invalid_argument("word_inventory: empty corpus");
  WordInventory inv;
  for (const auto& utt : corpus.utterances) {
    for (const auto& w : utt) ++inv.counts[w];
  }
  return inv;
}

WordInventory load_word_list(const std::string& path) {
  const std::string text = read_file(path);
  WordInventory inv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    Words words;
    try {
      words = normalize_line(line, Normalization::AsIs);
    } catch (const std::invalid_argument& e) {
      throw DataError(path, line_no, e.what());
    }
    if (words.empty()) continue;
    if (words.size() != 1) throw DataError(path, line_no, "expected exactly one word per line");
    ++inv.counts[words.front()];
  }
  return inv;
}

UnseenWords unseen_word_rate(const WordInventory& train, const Corpus& test) {
  if (train.counts.empty() || test.empty()) {
    throw std::invalid_argument("unseen_word_rate: empty input");
  }
  UnseenWords out;
  for (const auto& utt : test.utterances) {
    for (const auto& w : utt) {
      ++out.total_tokens;
      if (!train.contains(w)) {
        ++out.unseen_tokens;
        out.words.insert(w);
      }
    }
  }
  out.rate = out.total_tokens == 0
                 ? 0.0
                 : static_cast<double>(out.unseen_tokens) / static_cast<double>(out.total_tokens);
  return out;
}

}  // namespace segsample
