#include "segsample/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "segsample/error.hpp"

namespace segsample {

namespace {

std::uint64_t pair_key(std::int64_t a, std::int64_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

BpeModel::BpeModel(std::vector<char32_t> alphabet, std::vector<BpeMerge> merges)
    : alphabet_(std::move(alphabet)), merges_(std::move(merges)) {
  std::sort(alphabet_.begin(), alphabet_.end());
  alphabet_.erase(std::unique(alphabet_.begin(), alphabet_.end()), alphabet_.end());
  alphabet_.erase(std::remove(alphabet_.begin(), alphabet_.end(), kMarker), alphabet_.end());

  std::vector<std::u32string> surfaces{std::u32string(1, kMarker)};
  for (char32_t c : alphabet_) surfaces.emplace_back(1, c);
  std::unordered_set<std::u32string> known(surfaces.begin(), surfaces.end());
  std::vector<std::u32string> results;
  std::set<std::pair<std::u32string, std::u32string>> seen;
  for (const auto& m : merges_) {
    if (!known.count(m.left) || !known.count(m.right)) {
      throw std::invalid_argument("merge operand not producible: " + utf8::encode(m.left) + " " +
                                  utf8::encode(m.right));
    }
    if (!seen.emplace(m.left, m.right).second) {
      throw std::invalid_argument("duplicate merge: " + utf8::encode(m.left) + " " +
                                  utf8::encode(m.right));
    }
    auto joined = m.left + m.right;
    if (std::find(joined.begin() + 1, joined.end(), kMarker) != joined.end()) {
      throw std::invalid_argument("merge places the marker inside a piece");
    }
    results.push_back(joined);
    if (known.insert(joined).second) surfaces.push_back(std::move(joined));
  }
  vocab_ = Vocabulary(std::move(surfaces));
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto l = *vocab_.find(merges_[r].left);
    const auto rt = *vocab_.find(merges_[r].right);
    rules_.emplace(pair_key(l, rt), Rule{r, *vocab_.find(results[r])});
  }
}

std::optional<BpeModel::Rule> BpeModel::rule(PieceId left, PieceId right) const {
  const auto it = rules_.find(pair_key(left, right));
  if (it == rules_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::vector<PieceId> initial_symbols(const BpeModel& model, const std::string& word) {
  const auto chars = utf8::decode(word);
  if (!chars) throw DataError("invalid UTF-8 in word");
  if (chars->empty()) throw std::invalid_argument("empty word");
  std::vector<PieceId> syms{*model.vocab().find(std::u32string(1, kMarker))};
  for (std::size_t i = 0; i < chars->size(); ++i) {
    const char32_t c = (*chars)[i];
    const auto id = c == kMarker ? std::nullopt : model.vocab().find(std::u32string(1, c));
    if (!id) {
      throw DataError("character '" + utf8::encode(c) + "' at offset " + std::to_string(i) +
                      " of word '" + word + "' is not in the BPE alphabet");
    }
    syms.push_back(*id);
  }
  return syms;
}

void encode_word(const BpeModel& model, std::vector<PieceId>& syms, double p_drop, Rng* rng) {
  struct Applicable {
    std::size_t pos;
    std::size_t rank;
    PieceId result;
  };
  std::vector<Applicable> applicable;
  std::vector<PieceId> next;
  while (syms.size() > 1) {
    applicable.clear();
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      const auto r = model.rule(syms[i], syms[i + 1]);
      if (!r) continue;
      if (rng != nullptr && p_drop > 0.0 && uniform01(*rng) < p_drop) continue;
      applicable.push_back(Applicable{i, r->rank, r->result});
      best = std::min(best, r->rank);
    }
    if (applicable.empty()) break;
    next.clear();
    std::size_t i = 0;
    for (const auto& a : applicable) {
      if (a.rank != best || a.pos < i) continue;
      next.insert(next.end(), syms.begin() + static_cast<std::ptrdiff_t>(i),
                  syms.begin() + static_cast<std::ptrdiff_t>(a.pos));
      next.push_back(a.result);
      i = a.pos + 2;
    }
    next.insert(next.end(), syms.begin() + static_cast<std::ptrdiff_t>(i), syms.end());
    syms.swap(next);
  }
}

Segmentation encode_words(const BpeModel& model, const Words& words, double p_drop, Rng* rng) {
  Segmentation seg;
  for (const auto& w : words) {
    auto syms = initial_symbols(model, w);
    encode_word(model, syms, p_drop, rng);
    seg.pieces.insert(seg.pieces.end(), syms.begin(), syms.end());
  }
  return seg;
}

}  // namespace

Segmentation bpe_encode(const BpeModel& model, const Words& words) {
  return encode_words(model, words, 0.0, nullptr);
}

Segmentation bpe_dropout_encode(const BpeModel& model, const Words& words, double p_drop,
                                Rng& rng) {
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw std::invalid_argument("p_drop must be in [0, 1]");
  return encode_words(model, words, p_drop, &rng);
}

BpeModel train_bpe(const Corpus& corpus, std::size_t num_merges) {
  if (corpus.empty()) throw std::invalid_argument("train_bpe: empty corpus");
  const WordInventory inv = word_inventory(corpus);

  // Interned symbol strings; ids only grow, strings never change.
  std::vector<std::u32string> sym_str;
  std::unordered_map<std::u32string, int> sym_id;
  auto intern = [&](const std::u32string& s) {
    auto [it, inserted] = sym_id.emplace(s, static_cast<int>(sym_str.size()));
    if (inserted) sym_str.push_back(s);
    return it->second;
  };

  std::set<char32_t> alphabet;
  std::vector<std::vector<int>> words;
  std::vector<std::int64_t> freq;
  for (const auto& [w, c] : inv.counts) {
    const auto chars = utf8::decode_or_throw(w);
    alphabet.insert(chars.begin(), chars.end());
    std::vector<int> syms{intern(std::u32string(1, kMarker))};
    for (char32_t ch : chars) syms.push_back(intern(std::u32string(1, ch)));
    words.push_back(std::move(syms));
    freq.push_back(static_cast<std::int64_t>(c));
  }

  struct Entry {
    std::int64_t count;
    int a, b;
  };
  auto better = [&sym_str](const Entry& x, const Entry& y) {
    if (x.count != y.count) return x.count > y.count;
    if (x.a != y.a) return sym_str[x.a] < sym_str[y.a];
    return sym_str[x.b] < sym_str[y.b];
  };
  std::set<Entry, decltype(better)> queue(better);
  std::unordered_map<std::uint64_t, std::int64_t> counts;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> where;

  auto adjust = [&](int a, int b, std::int64_t delta, std::size_t word) {
    const auto key = pair_key(a, b);
    auto& c = counts[key];
    if (c > 0) queue.erase(Entry{c, a, b});
    c += delta;
    if (c > 0) queue.insert(Entry{c, a, b});
    if (delta > 0) where[key].push_back(word);
  };
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (std::size_t i = 0; i + 1 < words[w].size(); ++i) {
      adjust(words[w][i], words[w][i + 1], freq[w], w);
    }
  }

  std::vector<BpeMerge> merges;
  std::unordered_set<std::uint64_t> done;
  while (merges.size() < num_merges && !queue.empty()) {
    const Entry top = *queue.begin();
    if (top.count < 2) break;
    const int merged = intern(sym_str[top.a] + sym_str[top.b]);
    // A pair can reappear when another merge rebuilds one of its operands;
    // it is applied again but recorded once.
    if (done.insert(pair_key(top.a, top.b)).second) {
      merges.push_back(BpeMerge{sym_str[top.a], sym_str[top.b]});
    }

    auto affected = std::move(where[pair_key(top.a, top.b)]);
    where.erase(pair_key(top.a, top.b));
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
    for (std::size_t w : affected) {
      auto& syms = words[w];
      bool present = false;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        present = present || (syms[i] == top.a && syms[i + 1] == top.b);
      }
      if (!present) continue;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) adjust(syms[i], syms[i + 1], -freq[w], w);
      std::vector<int> out;
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == top.a && syms[i + 1] == top.b) {
          out.push_back(merged);
          i += 2;
        } else {
          out.push_back(syms[i]);
          ++i;
        }
      }
      syms.swap(out);
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) adjust(syms[i], syms[i + 1], freq[w], w);
    }
  }
  return BpeModel(std::vector<char32_t>(alphabet.begin(), alphabet.end()), std::move(merges));
}

std::string serialize_bpe(const BpeModel& model) {
  std::string out(kBpeHeader);
  out += "\n#alphabet\t";
  for (char32_t c : model.alphabet()) out += utf8::encode(c);
  out += '\n';
  for (const auto& m : model.merges()) {
    out += utf8::encode(m.left);
    out += ' ';
    out += utf8::encode(m.right);
    out += '\n';
  }
  return out;
}

BpeModel parse_bpe(std::string_view text, const std::string& source) {
  std::vector<char32_t> alphabet;
  std::vector<BpeMerge> merges;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != kBpeHeader) throw DataError(source, 1, "missing header " + std::string(kBpeHeader));
      continue;
    }
    if (line_no == 2) {
      constexpr std::string_view tag = "#alphabet\t";
      if (line.substr(0, tag.size()) != tag) throw DataError(source, 2, "missing #alphabet line");
      const auto chars = utf8::decode(line.substr(tag.size()));
      if (!chars) throw DataError(source, 2, "invalid UTF-8 in alphabet");
      alphabet.assign(chars->begin(), chars->end());
      continue;
    }
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos || line.find(' ', sp + 1) != std::string_view::npos ||
        sp == 0 || sp + 1 == line.size()) {
      throw DataError(source, line_no, "expected `left right`");
    }
    const auto l = utf8::decode(line.substr(0, sp));
    const auto r = utf8::decode(line.substr(sp + 1));
    if (!l || !r) throw DataError(source, line_no, "invalid UTF-8");
    merges.push_back(BpeMerge{*l, *r});
  }
  if (line_no < 2) throw DataError(source, line_no, "truncated BPE model file");
  try {
    return BpeModel(std::move(alphabet), std::move(merges));
  } catch (const std::invalid_argument& e) {
    throw DataError(source, 0, e.what());
  }
}

void save_bpe(const BpeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << serialize_bpe(model);
  if (!out) throw IoError("write failed: " + path);
}

BpeModel load_bpe(const std::string& path) { return parse_bpe(read_file(path), path); }

}  // namespace segsample
