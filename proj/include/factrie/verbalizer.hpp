// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace factrie {

enum class LiteralKind { String, Number, Date };

struct EntityRef {
  std::string id;
  bool operator==(const EntityRef&) const = default;
};

struct Literal {
  std::string text;
  std::string lang;  // empty when untagged
  LiteralKind kind = LiteralKind::String;
  bool operator==(const Literal&) const = default;
};

struct RawTriple {
  std::string subject_id;
  std::string predicate_id;
  std::variant<EntityRef, Literal> object;
  bool operator==(const RawTriple&) const = default;
};

/// Parses `subject <TAB> predicate <TAB> object_spec`, where object_spec is
/// `E:<id>` or `L:<kind>:<lang?>:<text>`. Throws Error(InputError).
RawTriple parse_triple_line(std::string_view line);
std::string format_triple_line(const RawTriple& triple);

/// Identifiers look like `Q42`, `P569` or `bank_17`: a letter followed by
/// letters, digits, '_' or '-'. Blank nodes and IRIs are rejected.
bool is_kb_identifier(std::string_view id) noexcept;

/// Keeps identifier subjects and predicates, and objects that are identifier
/// entities or English, untagged, numeric or date literals.
bool filter_triple(const RawTriple& triple) noexcept;

enum class LabelSource { CanonicalTitle, LabelWithDescription };

struct EntityLabel {
  std::string entity_id;
  std::string display;
  LabelSource source = LabelSource::CanonicalTitle;
};

/// Title when the entity has one, otherwise `label (description)`.
/// Throws MissingLabel when neither a title nor a label with description exists.
EntityLabel label_entity(std::string_view id, const std::optional<std::string>& title,
                         std::string_view label, std::string_view description);

struct TextSpan {
  std::size_t offset = 0;
  std::size_t length = 0;
  bool operator==(const TextSpan&) const = default;
};

/// `<S> <P> <O> .` with the spans pointing at S, P and O inside `text`.
struct Fact {
  std::string text;
  TextSpan subject;
  TextSpan predicate;
  TextSpan object;

  std::string_view subject_text() const { return view(subject); }
  std::string_view predicate_text() const { return view(predicate); }
  std::string_view object_text() const { return view(object); }
  bool operator==(const Fact& other) const { return text == other.text; }

 private:
  std::string_view view(TextSpan s) const { return std::string_view(text).substr(s.offset, s.length); }
};

/// Replaces the delimiter characters '<' and '>' with their full-width forms.
std::string escape_label(std::string_view label);
Fact make_fact(std::string_view subject, std::string_view predicate, std::string_view object);
/// Throws Error(InputError) when `text` does not follow the fact grammar.
Fact parse_fact(std::string_view text);

/// ISO-8601 calendar date (`YYYY-MM-DD`) from a date literal such as
/// `+1956-10-20T00:00:00Z`. Returns nullopt when the text is not a date.
std::optional<std::string> render_date(std::string_view text);

struct LabelCollision {
  std::string display;
  std::string first_id;
  std::string second_id;
};

/// Label table: `entity_id <TAB> title? <TAB> label <TAB> description` per line.
/// Read-only after loading, so lookups are safe from any thread.
class LabelResolver {
 public:
  void add(std::string_view id, const std::optional<std::string>& title, std::string_view label,
           std::string_view description);
  void load(std::istream& in, const std::string& source_name = "<labels>");
  void load(const std::filesystem::path& path);

  /// Entity display label, or nullptr if unknown or unlabelable.
  const std::string* entity(std::string_view id) const;
  /// Predicates render with their plain label.
  const std::string* predicate(std::string_view id) const;

  const std::vector<LabelCollision>& collisions() const noexcept { return collisions_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  struct Entry {
    std::optional<std::string> display;
    std::string plain;
  };
  std::unordered_map<std::string, Entry> entries_;
  std::unordered_map<std::string, std::string> display_owner_;
  std::vector<LabelCollision> collisions_;
};

/// Renders a filtered triple. Throws Error(UnresolvableLabel) when a label is missing.
Fact verbalize(const RawTriple& triple, const LabelResolver& labels);

/// Swaps subject and object and renames the predicate.
Fact invert_fact(const Fact& fact, std::string_view inverse_predicate_name);

}  // namespace factrie
