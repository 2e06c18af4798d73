#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "segsample/corpus.hpp"
#include "segsample/utf8.hpp"

namespace segsample {

using PieceId = std::int32_t;

struct Piece {
  std::u32string surface;
  PieceId id = -1;

  bool has_marker() const { return !surface.empty() && surface.front() == kMarker; }
  // Length in characters, not counting the marker.
  std::size_t text_length() const { return surface.size() - (has_marker() ? 1 : 0); }

  bool operator==(const Piece&) const = default;
};

struct PrefixMatch {
  PieceId id;
  std::size_t length;  // characters, marker included

  bool operator==(const PrefixMatch&) const = default;
};

// Wordpiece inventory with a prefix trie over surfaces. Immutable after
// construction.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Ids follow the order of `surfaces`. Throws std::invalid_argument on an
  // empty surface, a marker anywhere but the first position, or a duplicate
  // surface (the message names it).
  explicit Vocabulary(std::vector<std::u32string> surfaces);

  std::size_t size() const { return pieces_.size(); }
  bool empty() const { return pieces_.empty(); }
  const Piece& piece(PieceId id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  const std::vector<Piece>& pieces() const { return pieces_; }
  std::string surface_utf8(PieceId id) const { return utf8::encode(piece(id).surface); }

  std::optional<PieceId> find(std::u32string_view surface) const;

  // All pieces equal to text[start, start+len) for some len >= 1, shortest
  // first. Throws std::out_of_range if start >= text.size().
  std::vector<PrefixMatch> prefix_matches(std::u32string_view text, std::size_t start) const;

  // Trie walk over `text` from its beginning; calls fn(id, length) for each
  // piece that is a prefix of text, shortest first.
  template <typename Fn>
  void for_each_prefix(std::u32string_view text, Fn&& fn) const {
    std::int32_t node = 0;
    if (nodes_.empty()) return;
    for (std::size_t i = 0; i < text.size(); ++i) {
      node = child(node, text[i]);
      if (node < 0) return;
      if (nodes_[static_cast<std::size_t>(node)].piece >= 0) {
        fn(nodes_[static_cast<std::size_t>(node)].piece, i + 1);
      }
    }
  }

  // Single characters, with or without the marker.
  bool is_char_piece(PieceId id) const { return piece(id).text_length() == 1; }

  // True when both "c" and "▁c" are pieces.
  bool covers(char32_t c) const;

  bool operator==(const Vocabulary& other) const { return pieces_ == other.pieces_; }

 private:
  struct Node {
    std::uint32_t first_child = 0;  // index into edges_
    std::uint32_t num_children = 0;
    PieceId piece = -1;
  };
  struct TrieEdge {
    char32_t label;
    std::int32_t target;
  };

  std::int32_t child(std::int32_t node, char32_t c) const;
  void build_trie();

  std::vector<Piece> pieces_;
  std::unordered_map<std::u32string, PieceId> index_;
  std::vector<Node> nodes_;
  std::vector<TrieEdge> edges_;
};

// Concatenates UTF-8 piece surfaces; each marker starts a new word.
Words detokenize(const std::vector<std::string>& pieces);

}  // namespace segsample
