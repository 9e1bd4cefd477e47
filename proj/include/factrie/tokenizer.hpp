// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factrie/types.hpp"

namespace factrie {

/**
 * Greedy longest-match subword tokenizer with byte fallback.
 *
 * Ids 0..255 are the raw bytes, 256 is the end-of-sequence marker, and
 * multi-byte pieces follow in insertion order. Every string is encodable
 * and decode(encode(s)) == s. The fingerprint hashes the piece table, so an
 * index built with one vocabulary is rejected by sessions using another.
 */
class Tokenizer {
 public:
  static constexpr TokenId kEos = 256;
  static constexpr TokenId kFirstPiece = 257;

  Tokenizer() : Tokenizer(std::vector<std::string>{}) {}
  explicit Tokenizer(std::vector<std::string> pieces);

  /// Builds a vocabulary from the most frequent words of `corpus`.
  /// `required` pieces are always kept and come first.
  static Tokenizer train(std::span<const std::string> corpus, std::size_t max_pieces,
                         std::span<const std::string> required = {});

  static Tokenizer load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenSequence encode(std::string_view text) const;
  /// Facts are tokenized standalone with one leading space.
  TokenSequence encode_fact(std::string_view fact_text) const;
  std::string decode(std::span<const TokenId> tokens) const;
  std::string_view piece(TokenId id) const;

  /// Appends every token whose piece is a prefix of `text`, longest first.
  void prefix_pieces(std::string_view text, std::vector<TokenId>& out) const;

  std::size_t vocab_size() const noexcept { return pieces_.size(); }
  const std::string& fingerprint() const noexcept { return fingerprint_; }
  /// Multi-byte pieces only, in id order.
  std::vector<std::string> extra_pieces() const;

 private:
  struct TrieNode {
    std::vector<std::pair<unsigned char, std::uint32_t>> next;
    std::int64_t id = -1;
  };

  std::uint32_t walk(std::uint32_t node, unsigned char byte) const;

  std::vector<std::string> pieces_;
  std::vector<TrieNode> trie_;
  std::string fingerprint_;
};

/// FNV-1a 64-bit, used for fingerprints and input hashes.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t value);

}  // namespace factrie
