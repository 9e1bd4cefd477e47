// SPDX-License-Identifier: Apache-2.0

#include "factrie/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "factrie/error.hpp"

namespace factrie {

std::string_view to_string(AnswerType type) noexcept {
  switch (type) {
    case AnswerType::Generic: return "generic";
    case AnswerType::YesNo: return "yesno";
    case AnswerType::Enumeration: return "enumeration";
  }
  return "generic";
}

AnswerType parse_answer_type(std::string_view text) {
  if (text == "generic") return AnswerType::Generic;
  if (text == "yesno") return AnswerType::YesNo;
  if (text == "enumeration") return AnswerType::Enumeration;
  throw Error(ErrorCode::InputError, "unknown answer type '" + std::string(text) + "'");
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

namespace {

std::string fold(std::string_view text) {
  std::string out = normalize_answer(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::multiset<std::string> items(std::string_view text, char delimiter) {
  std::multiset<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(delimiter, start);
    if (end == std::string_view::npos) end = text.size();
    std::string item = fold(text.substr(start, end - start));
    if (!item.empty()) out.insert(std::move(item));
    start = end + 1;
  }
  return out;
}

}  // namespace

bool exact_match(std::string_view pred, std::span<const std::string> gold, AnswerType type, const MatchOptions& opts) {
  bool as_set = type == AnswerType::Enumeration && !opts.strict_enumeration;
  std::string p = fold(pred);
  auto p_items = as_set ? items(pred, opts.delimiter) : std::multiset<std::string>{};
  for (const auto& g : gold) {
    if (as_set ? items(g, opts.delimiter) == p_items : fold(g) == p) return true;
  }
  return false;
}

double Counts::accuracy() const noexcept {
  return questions == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(questions);
}

std::optional<double> Counts::precision() const noexcept {
  if (given == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(given);
}

Counts& Counts::operator+=(const Counts& o) noexcept {
  questions += o.questions;
  given += o.given;
  correct += o.correct;
  return *this;
}

EvalResult aggregate(std::span<const Prediction> predictions, std::span<const GoldRecord> gold,
                     const MatchOptions& opts) {
  std::unordered_map<std::string_view, const GoldRecord*> by_id;
  for (const auto& g : gold) by_id.emplace(g.id, &g);
  EvalResult r;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.id);
    if (it == by_id.end()) throw Error(ErrorCode::MissingGold, "no gold record for question '" + p.id + "'");
    const GoldRecord& g = *it->second;
    if (g.answers.empty()) throw Error(ErrorCode::MissingGold, "gold record '" + p.id + "' has no answers");
    Counts c;
    c.questions = 1;
    if (p.answer.kind == ParsedAnswer::Kind::Answer) {
      c.given = 1;
      c.correct = exact_match(p.answer.text, g.answers, g.answer_type, opts) ? 1 : 0;
    }
    r.overall += c;
    r.by_answer_type[std::string(to_string(g.answer_type))] += c;
    r.by_question_type[g.question_type.empty() ? "unspecified" : g.question_type] += c;
  }
  return r;
}

namespace {

nlohmann::json counts_json(const Counts& c) {
  nlohmann::json j = {{"questions", c.questions}, {"given", c.given}, {"correct", c.correct},
                      {"accuracy", c.accuracy()}};
  auto p = c.precision();
  j["precision"] = p ? nlohmann::json(*p) : nlohmann::json(nullptr);
  return j;
}

std::string fmt(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

nlohmann::json to_json(const EvalResult& r) {
  nlohmann::json j;
  j["overall"] = counts_json(r.overall);
  j["by_answer_type"] = nlohmann::json::object();
  for (const auto& [k, c] : r.by_answer_type) j["by_answer_type"][k] = counts_json(c);
  j["by_question_type"] = nlohmann::json::object();
  for (const auto& [k, c] : r.by_question_type) j["by_question_type"][k] = counts_json(c);
  return j;
}

std::string summary_text(const EvalResult& r) {
  std::ostringstream out;
  auto row = [&](const std::string& name, const Counts& c) {
    out << name << "  questions=" << c.questions << " given=" << c.given << " correct=" << c.correct
        << " A=" << fmt(c.accuracy()) << " P=" << fmt(c.precision()) << '\n';
  };
  row("overall", r.overall);
  for (const auto& [k, c] : r.by_answer_type) row("answer_type:" + k, c);
  for (const auto& [k, c] : r.by_question_type) row("question_type:" + k, c);
  return out.str();
}

}  // namespace factrie
