// SPDX-License-Identifier: Apache-2.0

#include "factrie/engine.hpp"

#include <algorithm>

#include "factrie/error.hpp"

namespace factrie {

void to_json(nlohmann::json& j, const SessionReport& r) {
  j = nlohmann::json::object();
  auto& facts = j["facts"] = nlohmann::json::array();
  for (const auto& f : r.facts) facts.push_back({{"text", f.text}, {"start", f.start}, {"end", f.end}});
  auto& ex = j["exhaustion"] = nlohmann::json::array();
  for (const auto& e : r.exhaustion) ex.push_back({{"position", e.position}, {"reason", e.reason}});
  j["transitions"] = r.transitions;
  j["tokens"] = r.tokens;
}

ConstraintEngine::ConstraintEngine(std::shared_ptr<const FactSource> source,
                                   std::shared_ptr<const Tokenizer> tokenizer, EngineConfig cfg)
    : source_(std::move(source)), tokenizer_(std::move(tokenizer)), cfg_(std::move(cfg)) {
  if (!source_ || !tokenizer_) throw Error(ErrorCode::EngineError, "engine needs a fact source and a tokenizer");
  if (source_->tokenizer_fingerprint() != tokenizer_->fingerprint()) {
    throw Error(ErrorCode::TokenizerMismatch, "index built with " + source_->tokenizer_fingerprint() +
                                                  ", tokenizer is " + tokenizer_->fingerprint());
  }
  if (cfg_.trigger.empty()) throw Error(ErrorCode::InputError, "trigger must not be empty");
  if (cfg_.max_new_tokens < 1) throw Error(ErrorCode::InputError, "max_new_tokens must be at least 1");
  for (TokenId t : cfg_.preamble) {
    if (t >= tokenizer_->vocab_size()) throw Error(ErrorCode::InputError, "preamble token out of vocabulary");
  }
  window_ = std::max<std::size_t>(64, 2 * cfg_.trigger.size());
}

DecodingSession ConstraintEngine::create_session() const {
  DecodingSession s;
  s.budget_ = cfg_.max_new_tokens;
  return s;
}

void ConstraintEngine::enter_constrained(DecodingSession& s) const {
  NodeHandle root = source_->root();
  if (root->num_leaves() <= s.overlay_.consumed_facts()) {
    throw Error(ErrorCode::ExhaustedBranch, "no unconsumed facts remain");
  }
  s.mode_ = Mode::Constrained;
  s.cursor_.clear();
  s.preamble_pos_ = 0;
  s.node_ = std::move(root);
  s.onode_ = s.overlay_.root();
}

std::vector<std::pair<TokenId, std::uint64_t>> ConstraintEngine::allowed(const DecodingSession& s) const {
  std::vector<std::pair<TokenId, std::uint64_t>> out;
  if (s.mode_ != Mode::Constrained) return out;
  if (s.preamble_pos_ < cfg_.preamble.size()) {
    out.emplace_back(cfg_.preamble[s.preamble_pos_], 1);
    return out;
  }
  remaining_children(*s.node_, s.onode_, out);
  return out;
}

void ConstraintEngine::check_logits(std::span<const float> logits) const {
  if (logits.size() != tokenizer_->vocab_size()) {
    throw Error(ErrorCode::EngineError, "logits length " + std::to_string(logits.size()) +
                                            " does not match vocabulary size " +
                                            std::to_string(tokenizer_->vocab_size()));
  }
}

void ConstraintEngine::mask_in_place(const DecodingSession& s, std::span<float> logits) const {
  check_logits(logits);
  if (s.mode_ != Mode::Constrained) return;
  auto allow = allowed(s);
  if (allow.empty()) throw Error(ErrorCode::ExhaustedBranch, "every fact under " + format_tokens(s.cursor_) + " was consumed");
  // Walk the sorted allowed list alongside the vocabulary; allowed entries are left untouched.
  std::size_t j = 0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    if (j < allow.size() && allow[j].first == t) {
      ++j;
    } else {
      logits[t] = kMasked;
    }
  }
  if (j != allow.size()) throw Error(ErrorCode::EngineError, "allowed token outside the vocabulary");
}

std::vector<float> ConstraintEngine::mask_logits(const DecodingSession& s, std::span<const float> logits) const {
  std::vector<float> out(logits.begin(), logits.end());
  mask_in_place(s, out);
  return out;
}

void ConstraintEngine::step(DecodingSession& s, TokenId token) const {
  if (s.budget_ == 0) throw Error(ErrorCode::EngineError, "new-token budget exhausted");
  if (token >= tokenizer_->vocab_size()) {
    throw Error(ErrorCode::IllegalToken, "token " + std::to_string(token) + " outside the vocabulary");
  }
  std::size_t position = s.report_.tokens;

  if (s.mode_ == Mode::Constrained) {
    if (s.preamble_pos_ < cfg_.preamble.size()) {
      if (token != cfg_.preamble[s.preamble_pos_]) {
        throw Error(ErrorCode::IllegalToken, "expected preamble token " + std::to_string(cfg_.preamble[s.preamble_pos_]));
      }
      ++s.preamble_pos_;
    } else {
      auto idx = s.node_->find(token);
      std::uint64_t used = 0;
      const ConsumedOverlay::Node* next_o = s.onode_ ? s.onode_->child(token) : nullptr;
      if (next_o) used = next_o->consumed;
      if (!idx || s.node_->child_leaves()[*idx] <= used) {
        throw Error(ErrorCode::IllegalToken, "token " + std::to_string(token) + " not allowed after " +
                                                 format_tokens(s.cursor_));
      }
      s.node_ = source_->child(s.node_, token);
      s.onode_ = next_o;
      s.cursor_.push_back(token);
      if (s.node_->is_leaf()) {
        s.overlay_ = s.overlay_.consume(s.cursor_);
        std::string text = tokenizer_->decode(s.cursor_);
        if (!text.empty() && text.front() == ' ') text.erase(0, 1);
        std::size_t start = position + 1 - s.cursor_.size();
        s.report_.facts.push_back({std::move(text), start, position + 1});
        ++s.report_.transitions;
        s.mode_ = Mode::Normal;
        s.cursor_.clear();
        s.node_.reset();
        s.onode_ = nullptr;
        s.buffer_.clear();
      }
    }
  } else {
    s.buffer_.append(tokenizer_->piece(token));
    if (s.buffer_.size() > 2 * window_) s.buffer_.erase(0, s.buffer_.size() - window_);
    if (s.buffer_.ends_with(cfg_.trigger)) {
      try {
        enter_constrained(s);
        s.buffer_.clear();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ExhaustedBranch) throw;
        s.report_.exhaustion.push_back({position, e.what()});
      }
    }
  }
  --s.budget_;
  ++s.report_.tokens;
}

std::vector<DecodingSession> ConstraintEngine::fork_beams(const DecodingSession& s, std::size_t k) const {
  if (k < 1) throw Error(ErrorCode::InputError, "beam count must be at least 1");
  return std::vector<DecodingSession>(k, s);
}

}  // namespace factrie
