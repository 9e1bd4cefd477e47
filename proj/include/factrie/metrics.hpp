// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace factrie {

enum class AnswerType { Generic, YesNo, Enumeration };

std::string_view to_string(AnswerType type) noexcept;
/// Throws InputError for anything but generic, yesno, enumeration.
AnswerType parse_answer_type(std::string_view text);

struct ParsedAnswer {
  enum class Kind { Answer, IDontKnow, NotGiven };
  Kind kind = Kind::NotGiven;
  std::string text;
};

struct GoldRecord {
  std::string id;
  std::vector<std::string> answers;
  AnswerType answer_type = AnswerType::Generic;
  std::string question_type;
};

struct Prediction {
  std::string id;
  ParsedAnswer answer;
};

struct MatchOptions {
  /// Compare enumerations as whole strings instead of as item sets.
  bool strict_enumeration = false;
  char delimiter = ',';
};

/// Trims and collapses internal whitespace runs to one space.
std::string normalize_answer(std::string_view text);

/// Case-insensitive equality with any gold form, after normalize_answer.
/// Enumerations compare as sets of delimiter-separated items unless strict.
bool exact_match(std::string_view pred, std::span<const std::string> gold, AnswerType type = AnswerType::Generic,
                 const MatchOptions& opts = {});

struct Counts {
  std::uint64_t questions = 0;
  std::uint64_t given = 0;
  std::uint64_t correct = 0;

  double accuracy() const noexcept;
  /// Null when no answer was given.
  std::optional<double> precision() const noexcept;
  Counts& operator+=(const Counts& other) noexcept;
};

struct EvalResult {
  Counts overall;
  std::map<std::string, Counts> by_answer_type;
  std::map<std::string, Counts> by_question_type;
};

/// One gold record per prediction, matched by id. Throws MissingGold when a
/// prediction has no gold record or the record has no answers.
EvalResult aggregate(std::span<const Prediction> predictions, std::span<const GoldRecord> gold,
                     const MatchOptions& opts = {});

nlohmann::json to_json(const EvalResult& result);
std::string summary_text(const EvalResult& result);

}  // namespace factrie
