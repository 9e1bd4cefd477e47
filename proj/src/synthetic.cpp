// SPDX-License-Identifier: Apache-2.0

#include "factrie/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "factrie/error.hpp"
#include "factrie/verbalizer.hpp"

namespace factrie {

namespace {

std::vector<std::string> make_words(std::mt19937_64& rng, std::size_t n) {
  static const char* onsets[] = {"b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                 "br", "ch", "dr", "gr", "kl", "pr", "sh", "st", "tr", "th"};
  static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "io", "ou"};
  static const char* codas[] = {"", "", "n", "r", "l", "s", "m", "th", "nd", "rk"};
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    int syllables = 1 + static_cast<int>(rng() % 3);
    for (int s = 0; s < syllables; ++s) {
      w += onsets[rng() % std::size(onsets)];
      w += vowels[rng() % std::size(vowels)];
      w += codas[rng() % std::size(codas)];
    }
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

SynthKB make_synthetic_kb(const SynthConfig& cfg) {
  if (cfg.facts == 0) return {};
  std::mt19937_64 rng(cfg.seed);
  auto words = make_words(rng, std::max<std::size_t>(cfg.words, 16));
  auto word = [&] { return words[rng() % words.size()]; };
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthKB kb;
  for (std::size_t p = 1; p <= cfg.predicates; ++p) {
    std::string label = word() + (unit(rng) < 0.6 ? " " + word() : "") + (unit(rng) < 0.3 ? " of" : "");
    kb.label_lines.push_back("P" + std::to_string(p) + "\t\t" + label + "\t");
  }

  // Facts per subject: ceil-free Pareto draw, clamped.
  std::vector<std::size_t> per_subject;
  std::size_t total = 0;
  while (total < cfg.facts) {
    double u = 1.0 - unit(rng);
    auto k = static_cast<std::size_t>(std::floor(std::pow(u, -1.0 / cfg.tail)));
    k = std::clamp<std::size_t>(k, 1, cfg.max_per_subject);
    k = std::min(k, cfg.facts - total);
    per_subject.push_back(k);
    total += k;
  }
  std::size_t subjects = per_subject.size();
  std::size_t entities = subjects + subjects / 4 + 8;
  for (std::size_t e = 1; e <= entities; ++e) {
    std::string id = "Q" + std::to_string(e);
    if (unit(rng) < 0.7) {
      std::string title = capitalize(word()) + " " + capitalize(word());
      kb.label_lines.push_back(id + "\t" + title + "\t" + title + "\t" + word() + " " + word());
    } else {
      kb.label_lines.push_back(id + "\t\t" + capitalize(word()) + "\t" + word() + " " + word());
    }
  }

  std::uniform_int_distribution<std::size_t> pick_pred(1, cfg.predicates);
  std::uniform_int_distribution<std::size_t> pick_entity(1, entities);
  char buf[64];
  for (std::size_t s = 0; s < subjects; ++s) {
    std::string subj = "Q" + std::to_string(s + 1);
    for (std::size_t i = 0; i < per_subject[s]; ++i) {
      std::string pred = "P" + std::to_string(pick_pred(rng));
      double r = unit(rng);
      std::string obj;
      if (r < 0.65) {
        obj = "E:Q" + std::to_string(pick_entity(rng));
      } else if (r < 0.78) {
        std::snprintf(buf, sizeof buf, "L:date::+%04d-%02d-%02dT00:00:00Z", 1000 + static_cast<int>(rng() % 1025),
                      1 + static_cast<int>(rng() % 12), 1 + static_cast<int>(rng() % 28));
        obj = buf;
      } else if (r < 0.9) {
        obj = "L:number::" + std::to_string(rng() % 100000);
      } else {
        obj = std::string("L:string:") + (unit(rng) < 0.5 ? "en" : "") + ":" + word() + " " + word();
      }
      kb.triple_lines.push_back(subj + "\t" + pred + "\t" + obj);
      if (unit(rng) < 0.05) {
        kb.triple_lines.push_back(subj + "\t" + pred + "\tL:string:fr:" + word());
      }
    }
  }
  return kb;
}

void write_synthetic_kb(const SynthConfig& cfg, const std::filesystem::path& triples,
                        const std::filesystem::path& labels) {
  SynthKB kb = make_synthetic_kb(cfg);
  std::ofstream t(triples, std::ios::trunc), l(labels, std::ios::trunc);
  if (!t || !l) throw Error(ErrorCode::InputError, "cannot write synthetic KB files");
  for (const auto& line : kb.triple_lines) t << line << '\n';
  for (const auto& line : kb.label_lines) l << line << '\n';
}

std::vector<std::string> synthetic_fact_texts(const SynthConfig& cfg) {
  SynthKB kb = make_synthetic_kb(cfg);
  LabelResolver labels;
  std::string joined;
  for (const auto& line : kb.label_lines) joined += line + "\n";
  std::istringstream in(joined);
  labels.load(in);
  std::vector<std::string> out;
  for (const auto& line : kb.triple_lines) {
    RawTriple t = parse_triple_line(line);
    if (!filter_triple(t)) continue;
    try {
      out.push_back(verbalize(t, labels).text);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnresolvableLabel) throw;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace factrie
