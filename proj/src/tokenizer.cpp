// SPDX-License-Identifier: Apache-2.0

#include "factrie/tokenizer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "factrie/error.hpp"

namespace factrie {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string format_tokens(TokenSpan tokens) {
  std::string out = "[";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(tokens[i]);
  }
  out += ']';
  return out;
}

Tokenizer::Tokenizer(std::vector<std::string> pieces) {
  pieces_.reserve(kFirstPiece + pieces.size());
  for (int b = 0; b < 256; ++b) pieces_.emplace_back(1, static_cast<char>(b));
  pieces_.emplace_back("");  // end of sequence
  trie_.emplace_back();

  auto insert = [this](const std::string& piece, std::uint32_t id) {
    std::uint32_t node = 0;
    for (unsigned char c : piece) {
      std::uint32_t next = walk(node, c);
      if (next == 0) {
        next = static_cast<std::uint32_t>(trie_.size());
        auto& edges = trie_[node].next;
        auto pos = std::lower_bound(edges.begin(), edges.end(), std::make_pair(c, 0u));
        edges.insert(pos, {c, next});
        trie_.emplace_back();
      }
      node = next;
    }
    trie_[node].id = id;
  };

  for (int b = 0; b < 256; ++b) insert(pieces_[b], static_cast<std::uint32_t>(b));

  std::set<std::string> seen;
  for (auto& p : pieces) {
    if (p.size() < 2 || !seen.insert(p).second) continue;
    auto id = static_cast<std::uint32_t>(pieces_.size());
    pieces_.push_back(std::move(p));
    insert(pieces_.back(), id);
  }

  std::uint64_t h = fnv1a64("factrie-vocab-v1");
  for (std::size_t i = kFirstPiece; i < pieces_.size(); ++i) {
    h = fnv1a64(pieces_[i], h);
    h = fnv1a64(std::string_view("\0", 1), h);
  }
  fingerprint_ = "fnv1a64:" + hex64(h);
}

std::uint32_t Tokenizer::walk(std::uint32_t node, unsigned char byte) const {
  const auto& edges = trie_[node].next;
  auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(byte, 0u));
  if (it == edges.end() || it->first != byte) return 0;
  return it->second;
}

TokenSequence Tokenizer::encode(std::string_view text) const {
  TokenSequence out;
  out.reserve(text.size() / 3 + 1);
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::uint32_t node = 0;
    std::int64_t best_id = -1;
    std::size_t best_len = 0;
    for (std::size_t i = pos; i < text.size(); ++i) {
      node = walk(node, static_cast<unsigned char>(text[i]));
      if (node == 0) break;
      if (trie_[node].id >= 0) {
        best_id = trie_[node].id;
        best_len = i - pos + 1;
      }
    }
    out.push_back(static_cast<TokenId>(best_id));
    pos += best_len;
  }
  return out;
}

TokenSequence Tokenizer::encode_fact(std::string_view fact_text) const {
  std::string s;
  s.reserve(fact_text.size() + 1);
  s += ' ';
  s += fact_text;
  return encode(s);
}

std::string Tokenizer::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) out += piece(t);
  return out;
}

std::string_view Tokenizer::piece(TokenId id) const {
  if (id >= pieces_.size()) {
    throw Error(ErrorCode::IllegalToken, "token " + std::to_string(id) + " outside vocabulary of " +
                                             std::to_string(pieces_.size()));
  }
  return pieces_[id];
}

void Tokenizer::prefix_pieces(std::string_view text, std::vector<TokenId>& out) const {
  std::uint32_t node = 0;
  std::size_t first = out.size();
  for (char ch : text) {
    node = walk(node, static_cast<unsigned char>(ch));
    if (node == 0) break;
    if (trie_[node].id >= 0) out.push_back(static_cast<TokenId>(trie_[node].id));
  }
  std::reverse(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
}

std::vector<std::string> Tokenizer::extra_pieces() const {
  return {pieces_.begin() + kFirstPiece, pieces_.end()};
}

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

Tokenizer Tokenizer::train(std::span<const std::string> corpus, std::size_t max_pieces,
                           std::span<const std::string> required) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& line : corpus) {
    std::size_t i = 0;
    while (i < line.size()) {
      std::size_t start = i;
      bool lead_space = line[i] == ' ' && i + 1 < line.size() &&
                        is_word_byte(static_cast<unsigned char>(line[i + 1]));
      std::size_t j = lead_space ? i + 1 : i;
      if (!is_word_byte(static_cast<unsigned char>(line[j]))) {
        ++i;
        continue;
      }
      while (j < line.size() && is_word_byte(static_cast<unsigned char>(line[j]))) ++j;
      if (j - start >= 2) ++counts[line.substr(start, j - start)];
      i = j;
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  std::vector<std::string> pieces(required.begin(), required.end());
  for (const char* structural : {" <", "> <", "> .", "Fact:", "Answer:", " (", ")"}) {
    pieces.emplace_back(structural);
  }
  std::set<std::string> have(pieces.begin(), pieces.end());
  for (auto& [word, count] : ranked) {
    if (have.size() >= max_pieces + required.size()) break;
    if (have.insert(word).second) pieces.push_back(word);
  }
  return Tokenizer(std::move(pieces));
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InputError, "cannot open vocabulary " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InputError, path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "factrie-vocab" || !doc.contains("pieces")) {
    throw Error(ErrorCode::InputError, path.string() + ": not a factrie vocabulary");
  }
  Tokenizer tok(doc["pieces"].get<std::vector<std::string>>());
  if (doc.contains("fingerprint") && doc["fingerprint"].get<std::string>() != tok.fingerprint()) {
    throw Error(ErrorCode::TokenizerMismatch, path.string() + ": stored fingerprint does not match pieces");
  }
  return tok;
}

void Tokenizer::save(const std::filesystem::path& path) const {
  nlohmann::json doc;
  doc["format"] = "factrie-vocab";
  doc["version"] = 1;
  doc["fingerprint"] = fingerprint_;
  doc["pieces"] = extra_pieces();
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::BackendWrite, "cannot write vocabulary " + path.string());
  out << doc.dump(1) << '\n';
}

}  // namespace factrie
