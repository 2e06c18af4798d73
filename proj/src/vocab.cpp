#include "segsample/vocab.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace segsample {

Vocabulary::Vocabulary(std::vector<std::u32string> surfaces) {
  pieces_.reserve(surfaces.size());
  index_.reserve(surfaces.size());
  for (auto& s : surfaces) {
    if (s.empty()) throw std::invalid_argument("empty piece surface");
    if (std::find(s.begin() + 1, s.end(), kMarker) != s.end()) {
      throw std::invalid_argument("marker inside piece: " + utf8::encode(s));
    }
    const auto id = static_cast<PieceId>(pieces_.size());
    if (!index_.emplace(s, id).second) {
      throw std::invalid_argument("duplicate piece: " + utf8::encode(s));
    }
    pieces_.push_back(Piece{std::move(s), id});
  }
  build_trie();
}

void Vocabulary::build_trie() {
  // Pointer trie first, then flattened so children are contiguous and sorted.
  struct Tmp {
    std::map<char32_t, std::size_t> next;
    PieceId piece = -1;
  };
  std::vector<Tmp> tmp(1);
  for (const auto& p : pieces_) {
    std::size_t n = 0;
    for (char32_t c : p.surface) {
      auto it = tmp[n].next.find(c);
      if (it == tmp[n].next.end()) {
        tmp.emplace_back();
        it = tmp[n].next.emplace(c, tmp.size() - 1).first;
      }
      n = it->second;
    }
    tmp[n].piece = p.id;
  }

  nodes_.assign(tmp.size(), Node{});
  edges_.clear();
  edges_.reserve(tmp.size());
  for (std::size_t n = 0; n < tmp.size(); ++n) {
    nodes_[n].piece = tmp[n].piece;
    nodes_[n].first_child = static_cast<std::uint32_t>(edges_.size());
    nodes_[n].num_children = static_cast<std::uint32_t>(tmp[n].next.size());
    for (const auto& [c, target] : tmp[n].next) {
      edges_.push_back(TrieEdge{c, static_cast<std::int32_t>(target)});
    }
  }
}

std::int32_t Vocabulary::child(std::int32_t node, char32_t c) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  const auto first = edges_.begin() + n.first_child;
  const auto last = first + n.num_children;
  const auto it = std::lower_bound(first, last, c,
                                   [](const TrieEdge& e, char32_t v) { return e.label < v; });
  if (it == last || it->label != c) return -1;
  return it->target;
}

std::optional<PieceId> Vocabulary::find(std::u32string_view surface) const {
  const auto it = index_.find(std::u32string(surface));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<PrefixMatch> Vocabulary::prefix_matches(std::u32string_view text,
                                                    std::size_t start) const {
  if (start >= text.size()) throw std::out_of_range("prefix_matches: start out of range");
  std::vector<PrefixMatch> out;
  for_each_prefix(text.substr(start),
                  [&](PieceId id, std::size_t len) { out.push_back(PrefixMatch{id, len}); });
  return out;
}

bool Vocabulary::covers(char32_t c) const {
  const char32_t plain[] = {c};
  const char32_t marked[] = {kMarker, c};
  return find(std::u32string_view(plain, 1)).has_value() &&
         find(std::u32string_view(marked, 2)).has_value();
}

Words detokenize(const std::vector<std::string>& pieces) {
  static const std::string marker = utf8::encode(kMarker);
  Words words;
  for (const auto& p : pieces) {
    std::string_view rest = p;
    if (rest.substr(0, marker.size()) == marker) {
      words.emplace_back();
      rest.remove_prefix(marker.size());
    } else if (words.empty()) {
      words.emplace_back();
    }
    words.back() += rest;
  }
  return words;
}

}  // namespace segsample
