// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factrie/types.hpp"

namespace factrie {

/// Prefix-tree node with per-child reachable-leaf counts. Children are kept
/// sorted by token id. A leaf ends a fact and has num_leaves() == 1.
class TrieNode {
 public:
  TrieNode() = default;
  TrieNode(const TrieNode& other);
  TrieNode& operator=(const TrieNode& other);
  TrieNode(TrieNode&&) noexcept = default;
  TrieNode& operator=(TrieNode&&) noexcept = default;

  std::uint64_t num_leaves() const noexcept { return leaves_; }
  std::span<const TokenId> child_tokens() const noexcept { return tokens_; }
  std::span<const std::uint64_t> child_leaves() const noexcept { return child_leaves_; }
  std::size_t child_count() const noexcept { return tokens_.size(); }
  bool is_leaf() const noexcept { return tokens_.empty(); }

  const TrieNode* child(TokenId token) const;
  const TrieNode& child_at(std::size_t i) const { return *kids_[i]; }

  /// Appends a child whose token is greater than every existing child token.
  TrieNode& append_child(TokenId token);
  /// Recomputes leaf counts bottom-up: leaves count 1, inner nodes sum.
  void recount();

  /// Structural equality: same tokens, same shape, same counts.
  bool operator==(const TrieNode& other) const;

 private:
  friend class FactTree;

  std::uint64_t leaves_ = 0;
  std::vector<TokenId> tokens_;
  std::vector<std::uint64_t> child_leaves_;
  std::vector<std::unique_ptr<TrieNode>> kids_;
};

/// Read-only view of a tree node, shared by in-memory and disk-backed sources.
class SourceNode {
 public:
  virtual ~SourceNode() = default;

  std::uint64_t num_leaves() const noexcept { return num_leaves_; }
  std::span<const TokenId> child_tokens() const noexcept { return tokens_; }
  std::span<const std::uint64_t> child_leaves() const noexcept { return leaves_; }
  bool is_leaf() const noexcept { return tokens_.empty(); }
  std::optional<std::size_t> find(TokenId token) const;

 protected:
  std::uint64_t num_leaves_ = 0;
  std::span<const TokenId> tokens_;
  std::span<const std::uint64_t> leaves_;
};

using NodeHandle = std::shared_ptr<const SourceNode>;

/// Anything that can answer "which tokens may follow this prefix".
/// Implementations are immutable once built and safe for concurrent readers.
class FactSource {
 public:
  virtual ~FactSource() = default;

  virtual NodeHandle root() const = 0;
  /// nullptr when `token` is not a child of `parent`.
  virtual NodeHandle child(const NodeHandle& parent, TokenId token) const = 0;
  virtual const std::string& tokenizer_fingerprint() const = 0;

  /// Walks `prefix` from the root. Throws Error(UnknownPrefix).
  NodeHandle resolve(TokenSpan prefix) const;
};

/// In-memory fact tree. Insertion has set semantics; facts must be prefix-free.
class FactTree final : public FactSource {
 public:
  explicit FactTree(std::string tokenizer_fingerprint = {});

  /// Returns true if `seq` was new. Throws PrefixConflict when `seq` is a
  /// strict prefix of a stored fact or extends one.
  bool insert(TokenSpan seq);

  std::uint64_t fact_count() const noexcept { return root_->num_leaves(); }
  const TrieNode& root_node() const noexcept { return *root_; }

  NodeHandle root() const override;
  NodeHandle child(const NodeHandle& parent, TokenId token) const override;
  const std::string& tokenizer_fingerprint() const override { return fingerprint_; }

  /// Every stored fact, in token order.
  std::vector<TokenSequence> facts() const;

 private:
  std::shared_ptr<TrieNode> root_;
  std::string fingerprint_;
};

/// Builds a tree from any sequence collection, sorting first so children are
/// appended in order.
FactTree build_tree(std::vector<TokenSequence> facts, std::string tokenizer_fingerprint = {});

/// Session-local record of consumed facts. Persistent: consume() path-copies
/// and leaves the original untouched, so forks share structure.
class ConsumedOverlay {
 public:
  struct Node {
    std::uint64_t consumed = 0;
    std::vector<TokenId> tokens;
    std::vector<std::shared_ptr<const Node>> kids;

    const Node* child(TokenId token) const;
  };

  const Node* root() const noexcept { return root_.get(); }
  std::uint64_t consumed(TokenSpan prefix) const;
  std::uint64_t consumed_facts() const noexcept { return root_ ? root_->consumed : 0; }
  /// Adds one consumption along every node of `path`, root and leaf included.
  ConsumedOverlay consume(TokenSpan path) const;

 private:
  std::shared_ptr<const Node> root_;
};

/// Children of `prefix` with overlay-adjusted counts; exhausted tokens are omitted.
std::map<TokenId, std::uint64_t> next_tokens(const FactSource& source, TokenSpan prefix,
                                             const ConsumedOverlay& overlay = {});

/// Fills `out` with (token, remaining) for the children of `node` that still
/// have leaves under `overlay_node` (which may be null).
void remaining_children(const SourceNode& node, const ConsumedOverlay::Node* overlay_node,
                        std::vector<std::pair<TokenId, std::uint64_t>>& out);

std::uint64_t remaining_leaves(const FactSource& source, TokenSpan prefix, const ConsumedOverlay& overlay);

/// Marks the fact `seq` as generated. Throws UnknownPrefix if `seq` is not a
/// root-to-leaf path and AlreadyConsumed if it was consumed before.
ConsumedOverlay consume_fact(const FactSource& source, const ConsumedOverlay& overlay, TokenSpan seq);

}  // namespace factrie
