// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "factrie/tokenizer.hpp"

namespace factrie {

/// Next-token scorer driven by the orchestrator. Implementations must be safe
/// to call from several threads at once.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual const std::string& fingerprint() const = 0;
  /// Writes one unnormalized score per vocabulary entry into `out`.
  virtual void next_logits(TokenSpan context, std::vector<float>& out) const = 0;
};

struct ScriptRule {
  std::string after;  // context pattern
  std::string then;   // continuation preferred once `after` was seen
};

struct Script {
  std::vector<ScriptRule> rules;
  float top = 10.0f;
  float step = 1.0f;
  float floor = 0.0f;
  float noise = 0.5f;
  /// Artificial forward-pass delay per call, in milliseconds.
  double delay_ms = 0.0;

  static Script parse(const std::string& json_text);
  static Script load(const std::filesystem::path& path);
};

/**
 * Deterministic stand-in for a real model.
 *
 * The decoded tail of the context is matched against every rule: a rule is
 * live when the text after the last occurrence of its `after` pattern is a
 * proper prefix of its `then` text. Among live rules the one whose pattern
 * ends latest wins (longest pattern on ties). The pieces that spell the next
 * part of the continuation get scores top, top - step, ...; every other token
 * gets floor plus a small context-seeded jitter below `noise`. With no live
 * rule the end-of-sequence token is preferred.
 */
class ScriptedModel final : public LanguageModel {
 public:
  ScriptedModel(std::shared_ptr<const Tokenizer> tokenizer, Script script);

  std::size_t vocab_size() const override { return tokenizer_->vocab_size(); }
  const std::string& fingerprint() const override { return tokenizer_->fingerprint(); }
  void next_logits(TokenSpan context, std::vector<float>& out) const override;

  /// The continuation text the model currently wants to produce, if any.
  std::optional<std::string> pending_text(TokenSpan context) const;

  const Script& script() const noexcept { return script_; }

 private:
  std::shared_ptr<const Tokenizer> tokenizer_;
  Script script_;
};

/// Adapts a host-provided scoring function, e.g. a model running in another
/// runtime behind the C interface.
class CallbackModel final : public LanguageModel {
 public:
  using Fn = std::function<void(TokenSpan context, std::vector<float>& out)>;

  CallbackModel(std::size_t vocab_size, std::string fingerprint, Fn fn)
      : vocab_(vocab_size), fingerprint_(std::move(fingerprint)), fn_(std::move(fn)) {}

  std::size_t vocab_size() const override { return vocab_; }
  const std::string& fingerprint() const override { return fingerprint_; }
  void next_logits(TokenSpan context, std::vector<float>& out) const override;

 private:
  std::size_t vocab_;
  std::string fingerprint_;
  Fn fn_;
};

/// Model served over HTTP: POST <path> with {"context":[ids]} answered by
/// {"logits":[floats]}.
class HttpModel final : public LanguageModel {
 public:
  HttpModel(std::string base_url, std::string path, std::size_t vocab_size, std::string fingerprint);
  ~HttpModel() override;

  std::size_t vocab_size() const override { return vocab_; }
  const std::string& fingerprint() const override { return fingerprint_; }
  void next_logits(TokenSpan context, std::vector<float>& out) const override;

 private:
  std::string base_url_;
  std::string path_;
  std::size_t vocab_;
  std::string fingerprint_;
};

}  // namespace factrie
