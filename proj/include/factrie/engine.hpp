// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "factrie/tokenizer.hpp"
#include "factrie/trie.hpp"

namespace factrie {

inline constexpr float kMasked = -std::numeric_limits<float>::infinity();

struct EngineConfig {
  std::string trigger = "Fact:";
  /// Tokens forced between the trigger and the first fact token. Empty by default.
  TokenSequence preamble;
  std::size_t max_new_tokens = 1000;
};

enum class Mode { Normal, Constrained };

struct FactEvent {
  std::string text;        // without the leading space
  std::size_t start = 0;   // position of the first fact token among generated tokens
  std::size_t end = 0;     // one past the last fact token
};

struct ExhaustionEvent {
  std::size_t position = 0;
  std::string reason;
};

struct SessionReport {
  std::vector<FactEvent> facts;
  std::vector<ExhaustionEvent> exhaustion;
  std::size_t transitions = 0;  // Constrained -> Normal switches
  std::size_t tokens = 0;
};

void to_json(nlohmann::json& j, const SessionReport& r);

/// Per-sequence decoding state. Cheap to copy: the consumed overlay is
/// persistent and shared between copies until one of them consumes a fact.
class DecodingSession {
 public:
  Mode mode() const noexcept { return mode_; }
  /// Fact tokens emitted since entering Constrained mode (preamble excluded).
  const TokenSequence& cursor() const noexcept { return cursor_; }
  const ConsumedOverlay& overlay() const noexcept { return overlay_; }
  std::size_t budget() const noexcept { return budget_; }
  const SessionReport& report() const noexcept { return report_; }
  const std::string& text_window() const noexcept { return buffer_; }

 private:
  friend class ConstraintEngine;

  Mode mode_ = Mode::Normal;
  TokenSequence cursor_;
  std::size_t preamble_pos_ = 0;
  NodeHandle node_;
  const ConsumedOverlay::Node* onode_ = nullptr;
  ConsumedOverlay overlay_;
  std::string buffer_;
  std::size_t budget_ = 0;
  SessionReport report_;
};

/// Masks next-token scores so a Constrained session can only spell facts of
/// the source, and tracks the Normal <-> Constrained switch on the trigger.
/// The engine is immutable; any number of sessions may share it across threads.
class ConstraintEngine {
 public:
  /// Throws TokenizerMismatch when the source was built with another vocabulary.
  ConstraintEngine(std::shared_ptr<const FactSource> source, std::shared_ptr<const Tokenizer> tokenizer,
                   EngineConfig cfg = {});

  DecodingSession create_session() const;

  /// Switches to Constrained mode at the root. Throws ExhaustedBranch when
  /// every fact was already consumed by this session.
  void enter_constrained(DecodingSession& session) const;

  /// (token, remaining leaves) pairs that may follow, in token order.
  /// Empty in Normal mode.
  std::vector<std::pair<TokenId, std::uint64_t>> allowed(const DecodingSession& session) const;

  /// Returns a copy of `logits` with every disallowed entry set to -inf.
  /// Identity in Normal mode. Throws ExhaustedBranch when nothing is allowed.
  std::vector<float> mask_logits(const DecodingSession& session, std::span<const float> logits) const;
  void mask_in_place(const DecodingSession& session, std::span<float> logits) const;

  /// Commits one generated token. Throws IllegalToken for a disallowed token in
  /// Constrained mode and EngineError once the budget is spent.
  void step(DecodingSession& session, TokenId token) const;

  std::vector<DecodingSession> fork_beams(const DecodingSession& session, std::size_t k) const;

  const Tokenizer& tokenizer() const noexcept { return *tokenizer_; }
  const FactSource& source() const noexcept { return *source_; }
  const EngineConfig& config() const noexcept { return cfg_; }

 private:
  void check_logits(std::span<const float> logits) const;

  std::shared_ptr<const FactSource> source_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  EngineConfig cfg_;
  std::size_t window_;
};

}  // namespace factrie
