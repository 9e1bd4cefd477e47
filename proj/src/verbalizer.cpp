// SPDX-License-Identifier: Apache-2.0

#include "factrie/verbalizer.hpp"

#include <cctype>
#include <fstream>
#include <iostream>

#include "factrie/error.hpp"

namespace factrie {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_number(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && is_digit(s[i])) ++i, ++digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && is_digit(s[i])) ++i, ++digits;
  }
  if (digits == 0) return false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp = 0;
    while (i < s.size() && is_digit(s[i])) ++i, ++exp;
    if (exp == 0) return false;
  }
  return i == s.size();
}

bool is_english(std::string_view lang) {
  return lang == "en" || (lang.size() > 3 && lang.substr(0, 3) == "en-");
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

RawTriple parse_triple_line(std::string_view line) {
  line = strip_cr(line);
  auto cols = split_tabs(line);
  if (cols.size() != 3) {
    throw Error(ErrorCode::InputError, "expected 3 tab-separated columns, got " + std::to_string(cols.size()));
  }
  if (cols[0].empty() || cols[1].empty()) {
    throw Error(ErrorCode::InputError, "empty subject or predicate");
  }
  RawTriple t;
  t.subject_id = std::string(cols[0]);
  t.predicate_id = std::string(cols[1]);
  std::string_view spec = cols[2];
  if (spec.substr(0, 2) == "E:") {
    if (spec.size() == 2) throw Error(ErrorCode::InputError, "empty entity object");
    t.object = EntityRef{std::string(spec.substr(2))};
    return t;
  }
  if (spec.substr(0, 2) != "L:") throw Error(ErrorCode::InputError, "object must start with E: or L:");
  spec.remove_prefix(2);
  std::size_t c1 = spec.find(':');
  if (c1 == std::string_view::npos) throw Error(ErrorCode::InputError, "literal missing kind");
  std::size_t c2 = spec.find(':', c1 + 1);
  if (c2 == std::string_view::npos) throw Error(ErrorCode::InputError, "literal missing language field");
  std::string_view kind = spec.substr(0, c1);
  Literal lit;
  lit.lang = std::string(spec.substr(c1 + 1, c2 - c1 - 1));
  lit.text = std::string(spec.substr(c2 + 1));
  if (kind == "string") {
    lit.kind = LiteralKind::String;
  } else if (kind == "number") {
    lit.kind = LiteralKind::Number;
    if (!is_number(lit.text)) throw Error(ErrorCode::InputError, "number literal '" + lit.text + "' is not numeric");
  } else if (kind == "date") {
    lit.kind = LiteralKind::Date;
    if (!render_date(lit.text)) throw Error(ErrorCode::InputError, "date literal '" + lit.text + "' is not a date");
  } else {
    throw Error(ErrorCode::InputError, "unknown literal kind '" + std::string(kind) + "'");
  }
  if (lit.text.empty()) throw Error(ErrorCode::InputError, "empty literal");
  t.object = std::move(lit);
  return t;
}

std::string format_triple_line(const RawTriple& triple) {
  std::string out = triple.subject_id + '\t' + triple.predicate_id + '\t';
  if (const auto* e = std::get_if<EntityRef>(&triple.object)) {
    out += "E:" + e->id;
  } else {
    const auto& lit = std::get<Literal>(triple.object);
    const char* kind = lit.kind == LiteralKind::String ? "string" : lit.kind == LiteralKind::Number ? "number" : "date";
    out += std::string("L:") + kind + ':' + lit.lang + ':' + lit.text;
  }
  return out;
}

bool is_kb_identifier(std::string_view id) noexcept {
  if (id.empty() || !std::isalpha(static_cast<unsigned char>(id[0]))) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

bool filter_triple(const RawTriple& triple) noexcept {
  if (!is_kb_identifier(triple.subject_id) || !is_kb_identifier(triple.predicate_id)) return false;
  if (const auto* e = std::get_if<EntityRef>(&triple.object)) return is_kb_identifier(e->id);
  const auto& lit = std::get<Literal>(triple.object);
  switch (lit.kind) {
    case LiteralKind::Number:
    case LiteralKind::Date:
      return true;
    case LiteralKind::String:
      return lit.lang.empty() || is_english(lit.lang);
  }
  return false;
}

EntityLabel label_entity(std::string_view id, const std::optional<std::string>& title,
                         std::string_view label, std::string_view description) {
  if (title && !title->empty()) return {std::string(id), *title, LabelSource::CanonicalTitle};
  if (label.empty()) throw Error(ErrorCode::MissingLabel, "entity " + std::string(id) + " has no title or label");
  if (description.empty()) {
    throw Error(ErrorCode::MissingLabel, "entity " + std::string(id) + " has neither title nor description");
  }
  std::string display;
  display.reserve(label.size() + description.size() + 3);
  display.append(label).append(" (").append(description).append(")");
  return {std::string(id), std::move(display), LabelSource::LabelWithDescription};
}

std::string escape_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  for (char c : label) {
    if (c == '<') {
      out += "\xEF\xBC\x9C";  // U+FF1C
    } else if (c == '>') {
      out += "\xEF\xBC\x9E";  // U+FF1E
    } else if (c == '\n' || c == '\r' || c == '\t') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

Fact make_fact(std::string_view subject, std::string_view predicate, std::string_view object) {
  Fact f;
  std::string s = escape_label(subject), p = escape_label(predicate), o = escape_label(object);
  f.text.reserve(s.size() + p.size() + o.size() + 10);
  f.text += '<';
  f.subject = {f.text.size(), s.size()};
  f.text += s;
  f.text += "> <";
  f.predicate = {f.text.size(), p.size()};
  f.text += p;
  f.text += "> <";
  f.object = {f.text.size(), o.size()};
  f.text += o;
  f.text += "> .";
  return f;
}

Fact parse_fact(std::string_view text) {
  auto fail = [&](const char* why) {
    return Error(ErrorCode::InputError, std::string("malformed fact '") + std::string(text) + "': " + why);
  };
  if (text.size() < 13 || text.front() != '<' || text.substr(text.size() - 3) != "> .") {
    throw fail("expected <S> <P> <O> .");
  }
  Fact f;
  f.text = std::string(text);
  std::size_t pos = 1;
  TextSpan* spans[3] = {&f.subject, &f.predicate, &f.object};
  for (int i = 0; i < 3; ++i) {
    std::size_t close = text.find('>', pos);
    if (close == std::string_view::npos) throw fail("unterminated constituent");
    std::string_view part = text.substr(pos, close - pos);
    if (part.empty()) throw fail("empty constituent");
    if (part.find('<') != std::string_view::npos) throw fail("nested delimiter");
    *spans[i] = {pos, close - pos};
    if (i < 2) {
      if (text.substr(close, 3) != "> <") throw fail("expected '> <' separator");
      pos = close + 3;
    } else if (close + 3 != text.size()) {
      throw fail("trailing text after object");
    }
  }
  return f;
}

std::optional<std::string> render_date(std::string_view text) {
  std::size_t i = 0;
  std::string out;
  if (!text.empty() && (text[0] == '+' || text[0] == '-')) {
    if (text[0] == '-') out += '-';
    i = 1;
  }
  std::size_t year_start = i;
  while (i < text.size() && is_digit(text[i])) ++i;
  if (i - year_start < 4 || i >= text.size() || text[i] != '-') return std::nullopt;
  out.append(text.substr(year_start, i - year_start));
  auto two = [&](int lo, int hi) -> bool {
    if (i + 3 > text.size() || text[i] != '-' || !is_digit(text[i + 1]) || !is_digit(text[i + 2])) return false;
    int v = (text[i + 1] - '0') * 10 + (text[i + 2] - '0');
    if (v < lo || v > hi) return false;
    out.append(text.substr(i, 3));
    i += 3;
    return true;
  };
  if (!two(1, 12) || !two(1, 31)) return std::nullopt;
  if (i != text.size() && text[i] != 'T') return std::nullopt;
  return out;
}

void LabelResolver::add(std::string_view id, const std::optional<std::string>& title, std::string_view label,
                        std::string_view description) {
  Entry entry;
  entry.plain = !label.empty() ? std::string(label) : title.value_or("");
  try {
    entry.display = label_entity(id, title, label, description).display;
  } catch (const Error&) {
    // still usable as a predicate label
  }
  if (entry.display) {
    auto [it, inserted] = display_owner_.emplace(*entry.display, std::string(id));
    if (!inserted && it->second != id) collisions_.push_back({*entry.display, it->second, std::string(id)});
  }
  entries_[std::string(id)] = std::move(entry);
}

void LabelResolver::load(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = strip_cr(line);
    if (view.empty()) continue;
    auto cols = split_tabs(view);
    if (cols.size() != 4 || cols[0].empty()) {
      throw Error(ErrorCode::InputError,
                  source_name + ":" + std::to_string(line_no) + ": expected id, title, label, description");
    }
    std::optional<std::string> title;
    if (!cols[1].empty()) title = std::string(cols[1]);
    add(cols[0], title, cols[2], cols[3]);
  }
}

void LabelResolver::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InputError, "cannot open label table " + path.string());
  load(in, path.string());
}

const std::string* LabelResolver::entity(std::string_view id) const {
  auto it = entries_.find(std::string(id));
  if (it == entries_.end() || !it->second.display) return nullptr;
  return &*it->second.display;
}

const std::string* LabelResolver::predicate(std::string_view id) const {
  auto it = entries_.find(std::string(id));
  if (it == entries_.end() || it->second.plain.empty()) return nullptr;
  return &it->second.plain;
}

Fact verbalize(const RawTriple& triple, const LabelResolver& labels) {
  const std::string* subject = labels.entity(triple.subject_id);
  if (!subject) throw Error(ErrorCode::UnresolvableLabel, "subject " + triple.subject_id);
  const std::string* predicate = labels.predicate(triple.predicate_id);
  if (!predicate) throw Error(ErrorCode::UnresolvableLabel, "predicate " + triple.predicate_id);
  if (const auto* e = std::get_if<EntityRef>(&triple.object)) {
    const std::string* object = labels.entity(e->id);
    if (!object) throw Error(ErrorCode::UnresolvableLabel, "object " + e->id);
    return make_fact(*subject, *predicate, *object);
  }
  const auto& lit = std::get<Literal>(triple.object);
  if (lit.kind == LiteralKind::Date) {
    auto date = render_date(lit.text);
    if (!date) throw Error(ErrorCode::InputError, "date literal '" + lit.text + "' is not a date");
    return make_fact(*subject, *predicate, *date);
  }
  return make_fact(*subject, *predicate, lit.text);
}

Fact invert_fact(const Fact& fact, std::string_view inverse_predicate_name) {
  return make_fact(fact.object_text(), inverse_predicate_name, fact.subject_text());
}

}  // namespace factrie
