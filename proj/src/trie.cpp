// SPDX-License-Identifier: Apache-2.0

#include "factrie/trie.hpp"

#include <algorithm>

#include "factrie/error.hpp"

namespace factrie {

TrieNode::TrieNode(const TrieNode& other)
    : leaves_(other.leaves_), tokens_(other.tokens_), child_leaves_(other.child_leaves_) {
  kids_.reserve(other.kids_.size());
  for (const auto& k : other.kids_) kids_.push_back(std::make_unique<TrieNode>(*k));
}

TrieNode& TrieNode::operator=(const TrieNode& other) {
  if (this != &other) *this = TrieNode(other);
  return *this;
}

const TrieNode* TrieNode::child(TokenId token) const {
  auto it = std::lower_bound(tokens_.begin(), tokens_.end(), token);
  if (it == tokens_.end() || *it != token) return nullptr;
  return kids_[static_cast<std::size_t>(it - tokens_.begin())].get();
}

TrieNode& TrieNode::append_child(TokenId token) {
  if (!tokens_.empty() && tokens_.back() >= token) {
    throw Error(ErrorCode::CorruptRecord, "children must be appended in increasing token order");
  }
  tokens_.push_back(token);
  child_leaves_.push_back(0);
  kids_.push_back(std::make_unique<TrieNode>());
  return *kids_.back();
}

void TrieNode::recount() {
  if (kids_.empty()) {
    leaves_ = 1;
    return;
  }
  leaves_ = 0;
  for (std::size_t i = 0; i < kids_.size(); ++i) {
    kids_[i]->recount();
    child_leaves_[i] = kids_[i]->leaves_;
    leaves_ += child_leaves_[i];
  }
}

bool TrieNode::operator==(const TrieNode& other) const {
  if (leaves_ != other.leaves_ || tokens_ != other.tokens_ || child_leaves_ != other.child_leaves_) return false;
  for (std::size_t i = 0; i < kids_.size(); ++i) {
    if (!(*kids_[i] == *other.kids_[i])) return false;
  }
  return true;
}

std::optional<std::size_t> SourceNode::find(TokenId token) const {
  auto it = std::lower_bound(tokens_.begin(), tokens_.end(), token);
  if (it == tokens_.end() || *it != token) return std::nullopt;
  return static_cast<std::size_t>(it - tokens_.begin());
}

NodeHandle FactSource::resolve(TokenSpan prefix) const {
  NodeHandle node = root();
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    node = child(node, prefix[i]);
    if (!node) {
      throw Error(ErrorCode::UnknownPrefix, format_tokens(prefix) + " diverges at position " + std::to_string(i));
    }
  }
  return node;
}

namespace {

class MemoryNode final : public SourceNode {
 public:
  MemoryNode(std::shared_ptr<const TrieNode> keep, const TrieNode* node) : keep_(std::move(keep)), node_(node) {
    num_leaves_ = node->num_leaves();
    tokens_ = node->child_tokens();
    leaves_ = node->child_leaves();
  }
  const TrieNode* node() const noexcept { return node_; }
  const std::shared_ptr<const TrieNode>& keep() const noexcept { return keep_; }

 private:
  std::shared_ptr<const TrieNode> keep_;
  const TrieNode* node_;
};

void collect(const TrieNode& node, TokenSequence& path, std::vector<TokenSequence>& out) {
  if (node.is_leaf()) {
    out.push_back(path);
    return;
  }
  for (std::size_t i = 0; i < node.child_count(); ++i) {
    path.push_back(node.child_tokens()[i]);
    collect(node.child_at(i), path, out);
    path.pop_back();
  }
}

}  // namespace

FactTree::FactTree(std::string tokenizer_fingerprint)
    : root_(std::make_shared<TrieNode>()), fingerprint_(std::move(tokenizer_fingerprint)) {}

bool FactTree::insert(TokenSpan seq) {
  if (seq.empty()) throw Error(ErrorCode::InputError, "cannot insert an empty token sequence");
  const TrieNode* probe = root_.get();
  std::size_t depth = 0;
  for (; depth < seq.size(); ++depth) {
    if (probe != root_.get() && probe->is_leaf()) {
      throw Error(ErrorCode::PrefixConflict, "a stored fact is a prefix of " + format_tokens(seq));
    }
    const TrieNode* next = probe->child(seq[depth]);
    if (!next) break;
    probe = next;
  }
  if (depth == seq.size()) {
    if (probe->is_leaf()) return false;
    throw Error(ErrorCode::PrefixConflict, format_tokens(seq) + " is a prefix of a stored fact");
  }

  TrieNode* node = root_.get();
  ++node->leaves_;
  for (TokenId token : seq) {
    auto it = std::lower_bound(node->tokens_.begin(), node->tokens_.end(), token);
    auto idx = static_cast<std::size_t>(it - node->tokens_.begin());
    if (it == node->tokens_.end() || *it != token) {
      node->tokens_.insert(it, token);
      node->child_leaves_.insert(node->child_leaves_.begin() + static_cast<std::ptrdiff_t>(idx), 0);
      node->kids_.insert(node->kids_.begin() + static_cast<std::ptrdiff_t>(idx), std::make_unique<TrieNode>());
    }
    ++node->child_leaves_[idx];
    node = node->kids_[idx].get();
    ++node->leaves_;
  }
  return true;
}

NodeHandle FactTree::root() const { return std::make_shared<MemoryNode>(root_, root_.get()); }

NodeHandle FactTree::child(const NodeHandle& parent, TokenId token) const {
  const auto& mem = static_cast<const MemoryNode&>(*parent);
  const TrieNode* next = mem.node()->child(token);
  if (!next) return nullptr;
  return std::make_shared<MemoryNode>(mem.keep(), next);
}

std::vector<TokenSequence> FactTree::facts() const {
  std::vector<TokenSequence> out;
  if (root_->num_leaves() == 0) return out;
  TokenSequence path;
  collect(*root_, path, out);
  return out;
}

FactTree build_tree(std::vector<TokenSequence> facts, std::string tokenizer_fingerprint) {
  std::sort(facts.begin(), facts.end());
  FactTree tree(std::move(tokenizer_fingerprint));
  for (const auto& f : facts) tree.insert(f);
  return tree;
}

const ConsumedOverlay::Node* ConsumedOverlay::Node::child(TokenId token) const {
  auto it = std::lower_bound(tokens.begin(), tokens.end(), token);
  if (it == tokens.end() || *it != token) return nullptr;
  return kids[static_cast<std::size_t>(it - tokens.begin())].get();
}

std::uint64_t ConsumedOverlay::consumed(TokenSpan prefix) const {
  const Node* n = root_.get();
  for (TokenId t : prefix) {
    if (!n) return 0;
    n = n->child(t);
  }
  return n ? n->consumed : 0;
}

namespace {

std::shared_ptr<const ConsumedOverlay::Node> consume_path(const ConsumedOverlay::Node* old, TokenSpan path) {
  auto copy = old ? std::make_shared<ConsumedOverlay::Node>(*old) : std::make_shared<ConsumedOverlay::Node>();
  ++copy->consumed;
  if (!path.empty()) {
    TokenId t = path.front();
    auto it = std::lower_bound(copy->tokens.begin(), copy->tokens.end(), t);
    auto idx = static_cast<std::size_t>(it - copy->tokens.begin());
    if (it == copy->tokens.end() || *it != t) {
      copy->tokens.insert(it, t);
      copy->kids.insert(copy->kids.begin() + static_cast<std::ptrdiff_t>(idx), consume_path(nullptr, path.subspan(1)));
    } else {
      copy->kids[idx] = consume_path(copy->kids[idx].get(), path.subspan(1));
    }
  }
  return copy;
}

}  // namespace

ConsumedOverlay ConsumedOverlay::consume(TokenSpan path) const {
  ConsumedOverlay out;
  out.root_ = consume_path(root_.get(), path);
  return out;
}

void remaining_children(const SourceNode& node, const ConsumedOverlay::Node* overlay_node,
                        std::vector<std::pair<TokenId, std::uint64_t>>& out) {
  out.clear();
  auto tokens = node.child_tokens();
  auto leaves = node.child_leaves();
  out.reserve(tokens.size());
  if (!overlay_node || overlay_node->tokens.empty()) {
    for (std::size_t i = 0; i < tokens.size(); ++i) out.emplace_back(tokens[i], leaves[i]);
    return;
  }
  std::size_t j = 0;
  const auto& otoks = overlay_node->tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    while (j < otoks.size() && otoks[j] < tokens[i]) ++j;
    std::uint64_t used = (j < otoks.size() && otoks[j] == tokens[i]) ? overlay_node->kids[j]->consumed : 0;
    if (used > leaves[i]) {
      throw Error(ErrorCode::EngineError, "overlay consumed more leaves than exist under token " +
                                              std::to_string(tokens[i]));
    }
    if (leaves[i] > used) out.emplace_back(tokens[i], leaves[i] - used);
  }
}

std::map<TokenId, std::uint64_t> next_tokens(const FactSource& source, TokenSpan prefix,
                                             const ConsumedOverlay& overlay) {
  NodeHandle node = source.resolve(prefix);
  const ConsumedOverlay::Node* onode = overlay.root();
  for (TokenId t : prefix) {
    if (!onode) break;
    onode = onode->child(t);
  }
  std::vector<std::pair<TokenId, std::uint64_t>> rem;
  remaining_children(*node, onode, rem);
  return {rem.begin(), rem.end()};
}

std::uint64_t remaining_leaves(const FactSource& source, TokenSpan prefix, const ConsumedOverlay& overlay) {
  NodeHandle node = source.resolve(prefix);
  std::uint64_t used = overlay.consumed(prefix);
  return node->num_leaves() > used ? node->num_leaves() - used : 0;
}

ConsumedOverlay consume_fact(const FactSource& source, const ConsumedOverlay& overlay, TokenSpan seq) {
  NodeHandle node = source.resolve(seq);
  if (!node->is_leaf()) throw Error(ErrorCode::UnknownPrefix, format_tokens(seq) + " is not a complete fact");
  if (overlay.consumed(seq) >= node->num_leaves()) {
    throw Error(ErrorCode::AlreadyConsumed, format_tokens(seq) + " was already generated");
  }
  return overlay.consume(seq);
}

}  // namespace factrie
