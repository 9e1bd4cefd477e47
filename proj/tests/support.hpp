// SPDX-License-Identifier: Apache-2.0

// Shared fixtures and brute-force oracles for the test binaries.

#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "factrie/tokenizer.hpp"
#include "factrie/trie.hpp"
#include "factrie/verbalizer.hpp"

namespace factrie::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("factrie-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline const std::vector<std::string>& euro_countries() {
  static const std::vector<std::string> names = {
      "Austria",   "Belgium",     "Croatia",  "Cyprus",     "Estonia",  "Finland",  "France",
      "Germany",   "Greece",      "Ireland",  "Italy",      "Latvia",   "Lithuania", "Luxembourg",
      "Malta",     "Netherlands", "Portugal", "Slovakia",   "Slovenia", "Spain",    "Andorra",
      "Monaco",    "San Marino",  "Vatican City", "Kosovo", "Montenegro"};
  return names;
}

inline std::vector<std::string> euro_facts() {
  std::vector<std::string> out;
  for (const auto& c : euro_countries()) out.push_back(make_fact("Euro", "country", c).text);
  return out;
}

/// Vocabulary where "Slovakia" and "Slovenia" both begin with the single-byte
/// token "S" and no other country does.
inline std::shared_ptr<Tokenizer> euro_tokenizer() {
  return std::make_shared<Tokenizer>(std::vector<std::string>{
      " <", "> <", "> .", "Euro", "country", "lovakia", "lovenia", "Spain", "San Marino", "Fact:", "Answer:"});
}

inline std::vector<std::string> danny_facts() {
  return {
      make_fact("Danny Boyle", "date of birth", "1956-10-20").text,
      make_fact("Danny Boyle", "given name", "Danny").text,
      make_fact("Slumdog Millionaire", "director", "Danny Boyle").text,
      make_fact("Slumdog Millionaire", "publication date", "2008-08-30").text,
      make_fact("Trainspotting", "director", "Danny Boyle").text,
  };
}

/// "date", "given" and "born" are pieces; only the first two continue
/// "<Danny Boyle> <" in the fixture KB.
inline std::shared_ptr<Tokenizer> danny_tokenizer() {
  return std::make_shared<Tokenizer>(std::vector<std::string>{
      " <", "> <", "> .", "Danny Boyle", "Danny", "date", " of", " birth", "given", " name", "born", "Slumdog",
      " Millionaire", "director", "publication", "Trainspotting", "Fact:", "Answer:", "Question:", "1956", "2008",
      "-10", "-20", "-08", "-30", " don't", " know", "\n", " the"});
}

inline std::vector<TokenSequence> tokenize_all(const Tokenizer& tok, const std::vector<std::string>& facts) {
  std::vector<TokenSequence> out;
  for (const auto& f : facts) out.push_back(tok.encode_fact(f));
  return out;
}

inline FactTree tree_of(const Tokenizer& tok, const std::vector<std::string>& facts) {
  return build_tree(tokenize_all(tok, facts), tok.fingerprint());
}

/// Brute-force next-token table: scans every fact with the given prefix.
inline std::map<TokenId, std::uint64_t> oracle_next(const std::vector<TokenSequence>& facts, TokenSpan prefix,
                                                    const std::vector<TokenSequence>& consumed = {}) {
  std::map<TokenId, std::uint64_t> out;
  for (const auto& f : facts) {
    if (f.size() <= prefix.size() || !std::equal(prefix.begin(), prefix.end(), f.begin())) continue;
    if (std::find(consumed.begin(), consumed.end(), f) != consumed.end()) continue;
    ++out[f[prefix.size()]];
  }
  return out;
}

/// Every distinct proper prefix of every fact, including the empty one.
inline std::vector<TokenSequence> all_prefixes(std::vector<TokenSequence> facts) {
  std::sort(facts.begin(), facts.end());
  std::vector<TokenSequence> out;
  for (const auto& f : facts) {
    for (std::size_t n = 0; n < f.size(); ++n) out.emplace_back(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace factrie::testing
