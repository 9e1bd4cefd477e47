// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "factrie/error.hpp"
#include "factrie/synthetic.hpp"
#include "factrie/trie.hpp"
#include "support.hpp"

using namespace factrie;
using testing::oracle_next;

namespace {

TokenSequence prefix_of(const Tokenizer& tok, std::string_view text) { return tok.encode(text); }

void check_leaf_sums(const TrieNode& n) {
  if (n.is_leaf()) {
    CHECK(n.num_leaves() == 1);
    return;
  }
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < n.child_count(); ++i) {
    CHECK(n.child_leaves()[i] == n.child_at(i).num_leaves());
    CHECK(n.child_at(i).num_leaves() > 0);
    sum += n.child_at(i).num_leaves();
    check_leaf_sums(n.child_at(i));
  }
  CHECK(n.num_leaves() == sum);
}

}  // namespace

TEST_CASE("insert into an empty tree") {
  FactTree t;
  CHECK(t.insert(TokenSequence{1, 2, 3}));
  CHECK(t.root_node().num_leaves() == 1);
  CHECK(t.fact_count() == 1);
}

TEST_CASE("duplicate insert is a no-op") {
  FactTree t;
  CHECK(t.insert(TokenSequence{1, 2, 3}));
  CHECK_FALSE(t.insert(TokenSequence{1, 2, 3}));
  CHECK(t.fact_count() == 1);
}

TEST_CASE("prefix conflicts are rejected") {
  FactTree t;
  t.insert(TokenSequence{1, 2, 3});
  CHECK_THROWS_AS(t.insert(TokenSequence{1, 2}), Error);
  CHECK_THROWS_AS(t.insert(TokenSequence{1, 2, 3, 4}), Error);
  try {
    t.insert(TokenSequence{1, 2});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PrefixConflict);
  }
  CHECK(t.fact_count() == 1);
  CHECK_THROWS_AS(t.insert(TokenSequence{}), Error);
}

TEST_CASE("26 euro countries share the node after <Euro> <country> <") {
  auto tok = testing::euro_tokenizer();
  FactTree t = testing::tree_of(*tok, testing::euro_facts());
  CHECK(t.fact_count() == 26);
  auto node = t.resolve(prefix_of(*tok, " <Euro> <country> <"));
  CHECK(node->num_leaves() == 26);
  check_leaf_sums(t.root_node());
}

TEST_CASE("next tokens after <Danny Boyle> < are date and given, never born") {
  auto tok = testing::danny_tokenizer();
  FactTree t = testing::tree_of(*tok, testing::danny_facts());
  auto next = next_tokens(t, prefix_of(*tok, " <Danny Boyle> <"));
  std::set<std::string> pieces;
  for (auto [id, n] : next) pieces.insert(std::string(tok->piece(id)));
  CHECK(pieces == std::set<std::string>{"date", "given"});
}

TEST_CASE("a node with one child reports count 1") {
  auto tok = testing::danny_tokenizer();
  FactTree t = testing::tree_of(*tok, testing::danny_facts());
  auto fact = tok->encode_fact(testing::danny_facts()[0]);
  TokenSpan parent(fact.data(), fact.size() - 1);
  auto next = next_tokens(t, parent);
  REQUIRE(next.size() == 1);
  CHECK(next.begin()->first == fact.back());
  CHECK(next.begin()->second == 1);
}

TEST_CASE("unknown prefixes raise UnknownPrefix") {
  FactTree t;
  t.insert(TokenSequence{1, 2, 3});
  try {
    next_tokens(t, TokenSequence{1, 9});
    FAIL("expected UnknownPrefix");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownPrefix);
  }
}

TEST_CASE("consuming Slovakia then Slovenia removes the S branch") {
  auto tok = testing::euro_tokenizer();
  FactTree t = testing::tree_of(*tok, testing::euro_facts());
  auto s_prefix = prefix_of(*tok, " <Euro> <country> <S");
  TokenSequence parent(s_prefix.begin(), s_prefix.end() - 1);
  TokenId s_token = s_prefix.back();
  CHECK(next_tokens(t, parent).at(s_token) == 2);

  ConsumedOverlay ov;
  ov = consume_fact(t, ov, tok->encode_fact("<Euro> <country> <Slovakia> ."));
  CHECK(remaining_leaves(t, s_prefix, ov) == 1);
  CHECK(next_tokens(t, parent, ov).at(s_token) == 1);

  ov = consume_fact(t, ov, tok->encode_fact("<Euro> <country> <Slovenia> ."));
  CHECK(next_tokens(t, parent, ov).count(s_token) == 0);
  // The base tree is untouched.
  CHECK(next_tokens(t, parent).at(s_token) == 2);
}

TEST_CASE("consume_fact errors") {
  auto tok = testing::euro_tokenizer();
  FactTree t = testing::tree_of(*tok, testing::euro_facts());
  auto fact = tok->encode_fact("<Euro> <country> <Malta> .");
  ConsumedOverlay ov = consume_fact(t, {}, fact);
  try {
    consume_fact(t, ov, fact);
    FAIL("expected AlreadyConsumed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AlreadyConsumed);
  }
  TokenSequence partial(fact.begin(), fact.end() - 1);
  CHECK_THROWS_AS(consume_fact(t, ov, partial), Error);
}

TEST_CASE("consuming every fact empties the root") {
  auto tok = testing::euro_tokenizer();
  FactTree t = testing::tree_of(*tok, testing::euro_facts());
  ConsumedOverlay ov;
  for (const auto& f : t.facts()) ov = consume_fact(t, ov, f);
  CHECK(next_tokens(t, {}, ov).empty());
  CHECK(ov.consumed_facts() == 26);
}

TEST_CASE("overlay forks do not affect each other") {
  auto tok = testing::euro_tokenizer();
  FactTree t = testing::tree_of(*tok, testing::euro_facts());
  auto facts = t.facts();
  ConsumedOverlay base = consume_fact(t, {}, facts[0]);
  ConsumedOverlay a = consume_fact(t, base, facts[1]);
  ConsumedOverlay b = consume_fact(t, base, facts[2]);
  CHECK(base.consumed_facts() == 1);
  CHECK(a.consumed(facts[2]) == 0);
  CHECK(b.consumed(facts[1]) == 0);
  CHECK(a.consumed(facts[1]) == 1);
}

TEST_CASE("next_tokens matches the brute-force oracle on random trees with random consumption") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 5; ++round) {
    SynthConfig cfg;
    cfg.seed = 100 + static_cast<std::uint64_t>(round);
    cfg.facts = 600;
    cfg.words = 80;
    auto texts = synthetic_fact_texts(cfg);
    Tokenizer tok = Tokenizer::train(texts, 60);
    auto seqs = testing::tokenize_all(tok, texts);
    FactTree t = build_tree(seqs, tok.fingerprint());
    check_leaf_sums(t.root_node());

    std::vector<TokenSequence> consumed;
    ConsumedOverlay ov;
    for (int i = 0; i < 50; ++i) {
      const auto& f = seqs[rng() % seqs.size()];
      if (std::find(consumed.begin(), consumed.end(), f) != consumed.end()) continue;
      ov = consume_fact(t, ov, f);
      consumed.push_back(f);
    }
    for (const auto& p : testing::all_prefixes(seqs)) {
      auto got = next_tokens(t, p, ov);
      auto want = oracle_next(seqs, p, consumed);
      REQUIRE(got == want);
    }
  }
}

TEST_CASE("walking any policy with consumption enumerates each fact once then exhausts") {
  auto tok = testing::euro_tokenizer();
  FactTree t = testing::tree_of(*tok, testing::euro_facts());
  std::mt19937 rng(5);
  ConsumedOverlay ov;
  std::set<TokenSequence> seen;
  while (true) {
    auto first = next_tokens(t, {}, ov);
    if (first.empty()) break;
    TokenSequence path;
    while (true) {
      auto next = next_tokens(t, path, ov);
      if (next.empty()) break;
      auto it = next.begin();
      std::advance(it, static_cast<long>(rng() % next.size()));
      path.push_back(it->first);
    }
    CHECK(seen.insert(path).second);
    ov = consume_fact(t, ov, path);
  }
  CHECK(seen.size() == 26);
}
