// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "factrie/engine.hpp"
#include "factrie/metrics.hpp"
#include "factrie/model.hpp"

namespace factrie {

/// Instructions that explain the Fact command and the answer convention.
const std::string& default_system_prompt();
/// Optional extra instruction for KBs whose relations should be looked up one at a time.
const std::string& relation_addendum();

inline constexpr std::string_view kAnswerPrefix = "Answer:";
inline constexpr std::string_view kRefusal = "I don't know.";

struct PromptConfig {
  std::string system_prompt = default_system_prompt();
  std::vector<std::string> few_shot;
  std::string trigger = "Fact:";
  std::size_t max_new_tokens = 1000;
  std::size_t beams = 3;
  /// Sampling is not supported; decoding is greedy or beam search.
  bool sampling = false;
  bool relation_addendum = false;
  TokenSequence preamble;

  /// Throws InputError unless there are exactly two examples, beams >= 1,
  /// max_new_tokens >= 1 and sampling is off.
  void validate() const;
  std::string render(std::string_view question) const;
};

/// Reads worked examples separated by lines consisting of "===".
std::vector<std::string> load_few_shot(const std::filesystem::path& path);

enum class Terminal { Answered, IDontKnow, BudgetExhausted };
std::string_view to_string(Terminal t) noexcept;

struct Transcript {
  std::string id;
  std::string question;
  std::string text;  // generated text only
  std::vector<FactEvent> facts;
  std::vector<ExhaustionEvent> exhaustion;
  std::size_t transitions = 0;
  std::size_t new_tokens = 0;
  Terminal terminal = Terminal::IDontKnow;
};

void to_json(nlohmann::json& j, const Transcript& t);
void from_json(const nlohmann::json& j, Transcript& t);

/// Answer from the last "Answer:" line; IDontKnow for the refusal; NotGiven
/// when the budget ran out first.
ParsedAnswer parse_answer(const Transcript& transcript);

/// Decodes one question: greedy for one beam, beam search otherwise. Facts
/// can only be spelled inside Fact commands, so every fact event is a member
/// of `source`. Throws TokenizerMismatch when model, tokenizer and index disagree.
Transcript run_question(std::string_view question, const LanguageModel& model,
                        std::shared_ptr<const FactSource> source, std::shared_ptr<const Tokenizer> tokenizer,
                        const PromptConfig& cfg);

struct DatasetRecord {
  std::string id;
  std::string question;
  GoldRecord gold;
};

/// Line-delimited JSON: {id, question, gold_answers | gold_answer, answer_type, question_type}.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path);
std::vector<Transcript> load_transcripts(const std::filesystem::path& path);
void write_transcripts(const std::filesystem::path& path, const std::vector<Transcript>& transcripts);

}  // namespace factrie
