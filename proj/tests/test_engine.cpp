// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "factrie/engine.hpp"
#include "factrie/error.hpp"
#include "factrie/index_store.hpp"
#include "factrie/pipeline.hpp"
#include "support.hpp"

using namespace factrie;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::EngineError;
}

struct Fixture {
  std::shared_ptr<Tokenizer> tok;
  std::shared_ptr<FactTree> tree;
  std::shared_ptr<ConstraintEngine> engine;

  Fixture(std::shared_ptr<Tokenizer> t, const std::vector<std::string>& facts, EngineConfig cfg = {})
      : tok(std::move(t)), tree(std::make_shared<FactTree>(testing::tree_of(*tok, facts))),
        engine(std::make_shared<ConstraintEngine>(tree, tok, std::move(cfg))) {}

  void feed(DecodingSession& s, std::string_view text) const {
    for (TokenId id : tok->encode(text)) engine->step(s, id);
  }
};

std::vector<float> random_logits(std::mt19937& rng, std::size_t n) {
  std::normal_distribution<float> d(0.f, 3.f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool same_bits(float a, float b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("after <Danny Boyle> < only date and given keep finite scores") {
  Fixture fx(testing::danny_tokenizer(), testing::danny_facts());
  auto s = fx.engine->create_session();
  fx.feed(s, "Fact:");
  REQUIRE(s.mode() == Mode::Constrained);
  fx.feed(s, " <Danny Boyle> <");

  std::mt19937 rng(1);
  auto logits = random_logits(rng, fx.tok->vocab_size());
  auto masked = fx.engine->mask_logits(s, logits);
  std::set<std::string> finite;
  for (std::size_t t = 0; t < masked.size(); ++t) {
    if (std::isfinite(masked[t])) {
      finite.insert(std::string(fx.tok->piece(static_cast<TokenId>(t))));
      CHECK(same_bits(masked[t], logits[t]));
    } else {
      CHECK(masked[t] == kMasked);
    }
  }
  CHECK(finite == std::set<std::string>{"date", "given"});
}

TEST_CASE("masking is the identity in Normal mode") {
  Fixture fx(testing::danny_tokenizer(), testing::danny_facts());
  auto s = fx.engine->create_session();
  std::mt19937 rng(2);
  auto logits = random_logits(rng, fx.tok->vocab_size());
  auto masked = fx.engine->mask_logits(s, logits);
  for (std::size_t i = 0; i < logits.size(); ++i) CHECK(same_bits(masked[i], logits[i]));
  CHECK(fx.engine->allowed(s).empty());
}

TEST_CASE("logits of the wrong length are an engine error") {
  Fixture fx(testing::danny_tokenizer(), testing::danny_facts());
  auto s = fx.engine->create_session();
  std::vector<float> short_logits(fx.tok->vocab_size() - 1);
  CHECK(code_of([&] { fx.engine->mask_logits(s, short_logits); }) == ErrorCode::EngineError);
}

TEST_CASE("a mismatched tokenizer is rejected") {
  auto tok = testing::danny_tokenizer();
  auto tree = std::make_shared<FactTree>(testing::tree_of(*tok, testing::danny_facts()));
  auto other = testing::euro_tokenizer();
  CHECK(code_of([&] { ConstraintEngine(tree, other); }) == ErrorCode::TokenizerMismatch);
}

TEST_CASE("the argmax of masked scores is always an allowed continuation") {
  Fixture fx(testing::euro_tokenizer(), testing::euro_facts());
  std::mt19937 rng(9);
  auto facts = testing::tokenize_all(*fx.tok, testing::euro_facts());
  for (int trial = 0; trial < 500; ++trial) {
    auto s = fx.engine->create_session();
    fx.engine->enter_constrained(s);
    while (s.mode() == Mode::Constrained) {
      auto want = testing::oracle_next(facts, s.cursor());
      auto masked = fx.engine->mask_logits(s, random_logits(rng, fx.tok->vocab_size()));
      auto best = static_cast<TokenId>(std::max_element(masked.begin(), masked.end()) - masked.begin());
      REQUIRE(want.count(best) == 1);
      std::size_t finite = 0;
      for (float x : masked) finite += std::isfinite(x) ? 1 : 0;
      REQUIRE(finite == want.size());
      fx.engine->step(s, best);
    }
    CHECK(s.report().facts.size() == 1);
  }
}

TEST_CASE("stepping a whole fact records it and returns to Normal mode") {
  Fixture fx(testing::euro_tokenizer(), testing::euro_facts());
  auto s = fx.engine->create_session();
  fx.feed(s, "Some text. Fact:");
  CHECK(s.mode() == Mode::Constrained);
  fx.feed(s, " <Euro> <country> <S");
  auto allow = fx.engine->allowed(s);
  std::set<std::string> next;
  for (auto [id, n] : allow) {
    next.insert(std::string(fx.tok->piece(id)));
    CHECK(n == 1);
  }
  CHECK(next == std::set<std::string>{"lovakia", "lovenia"});
  fx.feed(s, "lovakia> .");
  CHECK(s.mode() == Mode::Normal);
  REQUIRE(s.report().facts.size() == 1);
  CHECK(s.report().facts[0].text == "<Euro> <country> <Slovakia> .");
  CHECK(s.report().transitions == 1);
  CHECK(s.report().facts[0].end == s.report().tokens);
  CHECK(s.overlay().consumed_facts() == 1);
}

TEST_CASE("after Slovakia and Slovenia the S branch is masked out") {
  Fixture fx(testing::euro_tokenizer(), testing::euro_facts());
  auto s = fx.engine->create_session();
  fx.feed(s, "Fact: <Euro> <country> <Slovakia> .\nFact: <Euro> <country> <");
  auto allow = fx.engine->allowed(s);
  auto s_token = fx.tok->encode("S");
  auto it = std::find_if(allow.begin(), allow.end(), [&](auto& p) { return p.first == s_token[0]; });
  REQUIRE(it != allow.end());
  CHECK(it->second == 1);
  fx.feed(s, "Slovenia> .\nFact: <Euro> <country> <");
  allow = fx.engine->allowed(s);
  CHECK(std::none_of(allow.begin(), allow.end(), [&](auto& p) { return p.first == s_token[0]; }));
  CHECK(code_of([&] { fx.engine->step(s, s_token[0]); }) == ErrorCode::IllegalToken);
}

TEST_CASE("the trigger is detected across token boundaries") {
  Fixture fx(testing::euro_tokenizer(), testing::euro_facts());
  auto s = fx.engine->create_session();
  for (char c : std::string("Fact")) fx.engine->step(s, static_cast<unsigned char>(c));
  CHECK(s.mode() == Mode::Normal);
  fx.engine->step(s, static_cast<unsigned char>(':'));
  CHECK(s.mode() == Mode::Constrained);
}

TEST_CASE("enumerating every fact ends in a recorded exhaustion") {
  Fixture fx(testing::euro_tokenizer(), testing::euro_facts());
  auto s = fx.engine->create_session();
  std::mt19937 rng(3);
  for (int i = 0; i < 26; ++i) {
    fx.feed(s, "\nFact:");
    REQUIRE(s.mode() == Mode::Constrained);
    while (s.mode() == Mode::Constrained) {
      auto allow = fx.engine->allowed(s);
      fx.engine->step(s, allow[rng() % allow.size()].first);
    }
  }
  std::set<std::string> seen;
  for (const auto& f : s.report().facts) seen.insert(f.text);
  CHECK(seen.size() == 26);
  CHECK(s.report().exhaustion.empty());
  fx.feed(s, "\nFact:");
  CHECK(s.mode() == Mode::Normal);
  REQUIRE(s.report().exhaustion.size() == 1);
  CHECK(s.report().exhaustion[0].position == s.report().tokens - 1);
  auto fresh = s;
  CHECK(code_of([&] { fx.engine->enter_constrained(fresh); }) == ErrorCode::ExhaustedBranch);
}

TEST_CASE("disallowed and out-of-vocabulary tokens are illegal") {
  Fixture fx(testing::euro_tokenizer(), testing::euro_facts());
  auto s = fx.engine->create_session();
  CHECK(code_of([&] { fx.engine->step(s, static_cast<TokenId>(fx.tok->vocab_size())); }) == ErrorCode::IllegalToken);
  fx.feed(s, "Fact:");
  CHECK(code_of([&] { fx.engine->step(s, fx.tok->encode("Euro")[0]); }) == ErrorCode::IllegalToken);
  CHECK(s.cursor().empty());
}

TEST_CASE("the budget counts every committed token") {
  EngineConfig cfg;
  cfg.max_new_tokens = 3;
  Fixture fx(testing::euro_tokenizer(), testing::euro_facts(), cfg);
  auto s = fx.engine->create_session();
  for (int i = 0; i < 3; ++i) fx.engine->step(s, 'a');
  CHECK(s.budget() == 0);
  CHECK(code_of([&] { fx.engine->step(s, 'a'); }) == ErrorCode::EngineError);
}

TEST_CASE("forked sessions consume facts independently") {
  Fixture fx(testing::euro_tokenizer(), testing::euro_facts());
  auto s = fx.engine->create_session();
  fx.feed(s, "Fact: <Euro> <country> <Malta> .\nFact: <Euro> <country> <");
  auto beams = fx.engine->fork_beams(s, 3);
  REQUIRE(beams.size() == 3);
  fx.feed(beams[0], "Spain> .");
  fx.feed(beams[1], "Italy> .");
  CHECK(beams[0].overlay().consumed_facts() == 2);
  CHECK(beams[1].overlay().consumed_facts() == 2);
  CHECK(beams[2].overlay().consumed_facts() == 1);
  CHECK(beams[2].mode() == Mode::Constrained);
  fx.feed(beams[2], "Spain> .");
  CHECK(beams[2].report().facts.back().text == "<Euro> <country> <Spain> .");
  CHECK(code_of([&] { fx.engine->fork_beams(s, 0); }) == ErrorCode::InputError);
}

TEST_CASE("preamble tokens are forced before the fact") {
  auto tok = testing::euro_tokenizer();
  EngineConfig cfg;
  cfg.preamble = tok->encode("\n");
  Fixture fx(tok, testing::euro_facts(), cfg);
  auto s = fx.engine->create_session();
  fx.feed(s, "Fact:");
  auto allow = fx.engine->allowed(s);
  REQUIRE(allow.size() == 1);
  CHECK(allow[0].first == static_cast<TokenId>('\n'));
  CHECK(code_of([&] { fx.engine->step(s, tok->encode(" <")[0]); }) == ErrorCode::IllegalToken);
  fx.feed(s, "\n <Euro> <country> <Malta> .");
  REQUIRE(s.report().facts.size() == 1);
  CHECK(s.report().facts[0].text == "<Euro> <country> <Malta> .");
}

TEST_CASE("a disk index drives the engine like the in-memory tree") {
  testing::TempDir dir;
  auto tok = testing::danny_tokenizer();
  IndexConfig icfg;
  icfg.cutoff_depth = 3;
  build_index(testing::danny_facts(), *tok, dir / "d.ftrx", icfg);
  auto reader = IndexReader::open(dir / "d.ftrx");
  ConstraintEngine disk(reader, tok);
  Fixture mem(tok, testing::danny_facts());
  auto a = disk.create_session();
  auto b = mem.engine->create_session();
  for (TokenId t : tok->encode("Fact: <Slumdog Millionaire> <")) {
    disk.step(a, t);
    mem.engine->step(b, t);
  }
  CHECK(disk.allowed(a) == mem.engine->allowed(b));
  CHECK(a.report().facts.empty());
}

TEST_CASE("transitions equal the number of completed facts") {
  Fixture fx(testing::danny_tokenizer(), testing::danny_facts());
  auto s = fx.engine->create_session();
  fx.feed(s, "Fact: <Danny Boyle> <given name> <Danny> .\nFact: <Trainspotting> <director> <Danny Boyle> .\nFact: <Danny Boyle");
  CHECK(s.report().transitions == s.report().facts.size());
  CHECK(s.report().facts.size() == 2);
  nlohmann::json j = s.report();
  CHECK(j["facts"].size() == 2);
  CHECK(j["transitions"] == 2);
}
