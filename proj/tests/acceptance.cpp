// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion. Arguments, if any, name
// the criteria to run; by default all of them run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "bench.hpp"
#include "factrie/engine.hpp"
#include "factrie/error.hpp"
#include "factrie/metrics.hpp"
#include "factrie/model.hpp"
#include "factrie/orchestrator.hpp"
#include "factrie/pipeline.hpp"
#include "factrie/synthetic.hpp"
#include "support.hpp"

using namespace factrie;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr std::size_t kOracleKbs = 20;
constexpr std::size_t kOracleMaxFacts = 10'000;
constexpr std::size_t kGroundedSessions = 1'000;
constexpr std::size_t kPartitions = 10;
constexpr std::size_t kPartitionFacts = 10'000;
constexpr std::size_t kMaskPairs = 10'000;
constexpr std::size_t kRandomMetricFixtures = 100;
constexpr std::size_t kBigFacts = 1'000'000;
constexpr std::uint64_t kBigBatch = 200'000;
constexpr std::size_t kBenchTokens = 4'000;
constexpr double kBenchDelayMs = 75.0;
constexpr double kMaxOverhead = 0.05;
constexpr double kMaxP99LookupMs = 5.0;
constexpr double kMinRecordReduction = 0.30;

const fs::path kData = fs::path(FACTRIE_DATA_DIR) / "slumdog";

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Facts sorted by token sequence; every prefix owns a contiguous range.
struct SortedFacts {
  std::vector<TokenSequence> facts;

  explicit SortedFacts(std::vector<TokenSequence> f) : facts(std::move(f)) { std::sort(facts.begin(), facts.end()); }

  /// Brute-force next-token counts for `prefix`, minus the `consumed` facts.
  std::map<TokenId, std::uint64_t> next(TokenSpan prefix, const std::vector<TokenSequence>& consumed = {}) const {
    auto below = [](const TokenSequence& f, TokenSpan p) {
      return std::lexicographical_compare(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(std::min(f.size(), p.size())),
                                          p.begin(), p.end());
    };
    std::map<TokenId, std::uint64_t> out;
    for (auto it = std::lower_bound(facts.begin(), facts.end(), prefix, below); it != facts.end(); ++it) {
      if (it->size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), it->begin())) break;
      if (it->size() == prefix.size()) continue;
      if (std::find(consumed.begin(), consumed.end(), *it) != consumed.end()) continue;
      ++out[(*it)[prefix.size()]];
    }
    return out;
  }
};

std::vector<TokenSequence> tokenize(const Tokenizer& tok, const std::vector<std::string>& texts) {
  std::vector<TokenSequence> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tok.encode_fact(t));
  return out;
}

/// Synthetic KB ingested to disk; `facts` are its verbalized texts.
struct DiskKb {
  OpenedIndex index;
  std::vector<std::string> facts;
  IngestStats stats;
};

DiskKb ingest_synthetic(const fs::path& dir, const SynthConfig& cfg, IngestOptions opts) {
  fs::create_directories(dir);
  write_synthetic_kb(cfg, dir / "triples.tsv", dir / "labels.tsv");
  DiskKb kb;
  kb.stats = ingest(dir / "triples.tsv", dir / "labels.tsv", dir / "kb.ftrx", std::move(opts));
  kb.index = open_index(dir / "kb.ftrx");
  kb.facts = synthetic_fact_texts(cfg);
  return kb;
}

Outcome oracle_equivalence(const fs::path& scratch) {
  std::size_t prefixes = 0, facts_total = 0;
  for (std::size_t i = 0; i < kOracleKbs; ++i) {
    SynthConfig cfg;
    cfg.seed = 100 + i;
    cfg.facts = std::min(kOracleMaxFacts, 500 + i * 500);
    IngestOptions opts;
    opts.index.cutoff_depth = 2 + static_cast<std::uint32_t>(i % 6);
    opts.index.compaction = i % 3 != 0;
    opts.index.batch_size = cfg.facts / (1 + i % 4) + 1;
    opts.vocab_pieces = 1000 + 500 * (i % 5);
    auto kb = ingest_synthetic(scratch / ("oracle" + std::to_string(i)), cfg, opts);
    SortedFacts oracle(tokenize(*kb.index.tokenizer, kb.facts));
    if (kb.index.reader->meta().fact_count != oracle.facts.size()) {
      return {false, "KB " + std::to_string(i) + ": index holds " + std::to_string(kb.index.reader->meta().fact_count) +
                         " facts, oracle " + std::to_string(oracle.facts.size())};
    }
    for (const auto& p : testing::all_prefixes(oracle.facts)) {
      if (next_tokens(*kb.index.reader, p) != oracle.next(p)) {
        return {false, "KB " + std::to_string(i) + ": mismatch at " + format_tokens(p)};
      }
      ++prefixes;
    }
    facts_total += oracle.facts.size();
    fs::remove_all(scratch / ("oracle" + std::to_string(i)));
  }
  return {true, std::to_string(kOracleKbs) + " KBs, " + std::to_string(facts_total) + " facts, " +
                    std::to_string(prefixes) + " prefixes, exact"};
}

Script script_of(std::vector<ScriptRule> rules) {
  Script s;
  s.rules = std::move(rules);
  return s;
}

Outcome groundedness(const fs::path& scratch) {
  PromptConfig base;
  base.few_shot = load_few_shot(kData / "few_shot.txt");
  std::size_t sessions = 0, emissions = 0, adversarial = 0;
  std::string failure;

  auto check = [&](const Transcript& t, const std::unordered_set<std::string>& kb) {
    ++sessions;
    for (const auto& f : t.facts) {
      ++emissions;
      if (!kb.count(f.text) && failure.empty()) failure = "non-member fact emitted: " + f.text;
      if (t.text.find("Fact: " + f.text) == std::string::npos && failure.empty()) {
        failure = "fact not spelled in the transcript: " + f.text;
      }
    }
  };

  // Scripted fixture KB with its honest, silent and adversarial models.
  {
    fs::create_directories(scratch / "slumdog");
    IngestOptions opts;
    opts.index.cutoff_depth = 4;
    ingest(kData / "triples.tsv", kData / "labels.tsv", scratch / "slumdog" / "kb.ftrx", opts);
    auto index = open_index(scratch / "slumdog" / "kb.ftrx");
    std::unordered_set<std::string> kb;
    for (const auto& f : index.reader->facts()) {
      auto text = index.tokenizer->decode(f);
      kb.insert(text.substr(1));
    }
    auto dataset = load_dataset(kData / "dataset.jsonl");
    for (const char* script : {"script_qa.json", "script_never_trigger.json", "script_adversarial.json"}) {
      ScriptedModel model(index.tokenizer, Script::load(kData / script));
      for (std::size_t beams : {1, 2, 3}) {
        for (const auto& q : dataset) {
          auto cfg = base;
          cfg.beams = beams;
          check(run_question(q.question, model, index.reader, index.tokenizer, cfg), kb);
          adversarial += std::string(script) == "script_adversarial.json";
        }
      }
    }
  }

  // Synthetic KB probed by scripts that mostly ask for facts it does not hold.
  SynthConfig cfg;
  cfg.seed = 2024;
  cfg.facts = 5000;
  IngestOptions opts;
  opts.index.cutoff_depth = 4;
  opts.vocab_pieces = 2000;
  auto kb = ingest_synthetic(scratch / "grounded", cfg, opts);
  std::unordered_set<std::string> members(kb.facts.begin(), kb.facts.end());
  std::mt19937_64 rng(7);
  auto any_fact = [&] { return kb.facts[rng() % kb.facts.size()]; };
  for (std::size_t s = 0; sessions < kGroundedSessions + 36; ++s) {
    std::string question = "Probe " + std::to_string(s) + "?";
    std::vector<ScriptRule> rules;
    auto real = parse_fact(any_fact());
    switch (s % 4) {
      case 0:  // invented entities
        rules = {{question, "\nFact: <Nobody " + std::to_string(s) + "> <invented relation> <Nothing> .\n"},
                 {"> .", "\nFact: <Made Up> <fake> <x> .\n"}};
        break;
      case 1:  // real subject and predicate, wrong object
        rules = {{question, "\nFact: <" + std::string(real.subject_text()) + "> <" + std::string(real.predicate_text()) + "> <Wrong " +
                                std::to_string(s) + "> .\n"},
                 {"> .", "\nFact: <" + std::string(real.subject_text()) + "> <no such predicate> <x> .\n"}};
        break;
      case 2:  // honest lookup of a stored fact, then an answer
        rules = {{question, "\nFact: " + real.text + "\nAnswer: " + std::string(real.object_text()) + "\n"}};
        break;
      default:  // stored fact followed by a corrupted repeat
        rules = {{question, "\nFact: " + real.text + "\n"},
                 {"> .", "\nFact: " + real.text.substr(0, real.text.size() / 2) + "zzz> .\n"}};
        break;
    }
    ScriptedModel model(kb.index.tokenizer, script_of(std::move(rules)));
    auto pc = base;
    pc.beams = 1 + s % 3;
    pc.max_new_tokens = 120;
    check(run_question(question, model, kb.index.reader, kb.index.tokenizer, pc), members);
    adversarial += s % 4 != 2;
  }
  if (!failure.empty()) return {false, failure};
  if (emissions == 0) return {false, "no constrained emissions to check"};
  return {sessions >= kGroundedSessions,
          std::to_string(sessions) + " sessions (" + std::to_string(adversarial) + " adversarial), " +
              std::to_string(emissions) + " emissions, 100% KB members"};
}

Outcome euro_no_repeat(const fs::path& scratch) {
  auto tok = testing::euro_tokenizer();
  auto facts = testing::euro_facts();
  auto tree = std::make_shared<FactTree>(testing::tree_of(*tok, facts));
  IndexConfig icfg;
  icfg.cutoff_depth = 3;
  build_index(facts, *tok, scratch / "euro.ftrx", icfg);
  auto disk = IndexReader::open(scratch / "euro.ftrx");

  std::vector<std::shared_ptr<const FactSource>> sources = {tree, disk};
  std::string detail;
  for (const auto& source : sources) {
    ConstraintEngine engine(source, tok);
    TokenSequence trigger = tok->encode("Fact:");
    auto enter = [&](DecodingSession& s) {
      for (TokenId t : trigger) engine.step(s, t);
    };

    // Exhaustive generation with random scores under the mask.
    auto s = engine.create_session();
    std::mt19937 rng(26);
    std::normal_distribution<float> score;
    std::vector<float> logits(tok->vocab_size());
    while (true) {
      std::size_t before = s.report().exhaustion.size();
      enter(s);
      if (s.mode() == Mode::Normal) {
        if (s.report().exhaustion.size() != before + 1) return {false, "trigger ignored without exhaustion"};
        break;
      }
      while (s.mode() == Mode::Constrained) {
        for (auto& v : logits) v = score(rng);
        auto masked = engine.mask_logits(s, logits);
        engine.step(s, static_cast<TokenId>(std::max_element(masked.begin(), masked.end()) - masked.begin()));
      }
    }
    std::set<std::string> emitted;
    for (const auto& f : s.report().facts) emitted.insert(f.text);
    if (s.report().facts.size() != 26 || emitted != std::set<std::string>(facts.begin(), facts.end())) {
      return {false, "emitted " + std::to_string(s.report().facts.size()) + " facts, " +
                         std::to_string(emitted.size()) + " distinct"};
    }
    bool exhausted = false;
    try {
      engine.enter_constrained(s);
    } catch (const Error& e) {
      exhausted = e.code() == ErrorCode::ExhaustedBranch;
    }
    if (!exhausted) return {false, "no ExhaustedBranch after 26 facts"};

    // The "S" branch: two facts, then one, then gone.
    TokenSequence stem = tok->encode_fact(make_fact("Euro", "country", "S").text);
    stem.resize(stem.size() - 2);  // drop "S", "> ."
    TokenId s_tok = static_cast<TokenId>('S');
    auto count_s = [&](const DecodingSession& d) -> std::optional<std::uint64_t> {
      for (auto [t, n] : engine.allowed(d)) {
        if (t == s_tok) return n;
      }
      return std::nullopt;
    };
    auto at_stem = [&](DecodingSession d) {
      enter(d);
      for (TokenId t : stem) engine.step(d, t);
      return d;
    };
    auto emit = [&](DecodingSession& d, const std::string& country) {
      enter(d);
      for (TokenId t : tok->encode_fact(make_fact("Euro", "country", country).text)) engine.step(d, t);
    };
    auto d = engine.create_session();
    auto c0 = count_s(at_stem(d));
    emit(d, "Slovakia");
    auto c1 = count_s(at_stem(d));
    emit(d, "Slovenia");
    auto gone = at_stem(d);
    auto c2 = count_s(gone);
    bool illegal = false;
    try {
      engine.step(gone, s_tok);
    } catch (const Error& e) {
      illegal = e.code() == ErrorCode::IllegalToken;
    }
    if (c0 != 2u || c1 != 1u || c2 || !illegal) return {false, "S-branch counts do not follow 2, 1, gone"};
  }
  return {true, "26 distinct facts then ExhaustedBranch; S count 2 -> 1 -> forbidden (memory and disk)"};
}

Outcome batch_merge(const fs::path& scratch) {
  SynthConfig cfg;
  cfg.seed = 31;
  cfg.facts = kPartitionFacts;
  IngestOptions opts;
  opts.vocab_pieces = 3000;
  auto kb = ingest_synthetic(scratch / "merge", cfg, opts);
  auto facts = tokenize(*kb.index.tokenizer, kb.facts);
  auto prefixes = testing::all_prefixes(facts);
  std::mt19937_64 rng(99);
  std::size_t lookups = 0;
  for (std::size_t p = 0; p < kPartitions; ++p) {
    IndexConfig icfg;
    icfg.cutoff_depth = 3 + static_cast<std::uint32_t>(p % 5);
    icfg.compaction = p % 4 != 3;
    icfg.tokenizer_fingerprint = kb.index.tokenizer->fingerprint();
    auto single_path = scratch / "merge" / ("single" + std::to_string(p) + ".ftrx");
    build_index_batches({facts}, single_path, icfg);

    auto shuffled = facts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::size_t k = 2 + rng() % 15;
    std::vector<std::size_t> cuts;
    for (std::size_t c = 0; c + 1 < k; ++c) cuts.push_back(rng() % shuffled.size());
    cuts.push_back(0);
    cuts.push_back(shuffled.size());
    std::sort(cuts.begin(), cuts.end());
    std::vector<std::vector<TokenSequence>> batches;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      if (cuts[c] == cuts[c + 1]) continue;
      batches.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(cuts[c]),
                           shuffled.begin() + static_cast<std::ptrdiff_t>(cuts[c + 1]));
    }
    auto multi_path = scratch / "merge" / ("multi" + std::to_string(p) + ".ftrx");
    build_index_batches(batches, multi_path, icfg);

    auto single = IndexReader::open(single_path);
    auto multi = IndexReader::open(multi_path);
    for (const auto& prefix : prefixes) {
      if (multi->lookup(prefix) != single->lookup(prefix)) {
        return {false, "partition " + std::to_string(p) + ": lookup differs at " + format_tokens(prefix)};
      }
      ++lookups;
    }
    if (multi->facts() != single->facts()) return {false, "partition " + std::to_string(p) + ": fact lists differ"};
    fs::remove(single_path);
    fs::remove(multi_path);
  }
  return {true, std::to_string(kPartitions) + " partitions of " + std::to_string(facts.size()) + " facts, " +
                    std::to_string(lookups) + " lookups, exact"};
}

Outcome masking_contract(const fs::path& scratch) {
  SynthConfig cfg;
  cfg.seed = 5;
  cfg.facts = 10'000;
  IngestOptions opts;
  opts.vocab_pieces = 3000;
  auto kb = ingest_synthetic(scratch / "mask", cfg, opts);
  const auto& tok = *kb.index.tokenizer;
  auto facts = tokenize(tok, kb.facts);
  SortedFacts oracle(facts);
  ConstraintEngine engine(kb.index.reader, kb.index.tokenizer);
  TokenSequence trigger = tok.encode("Fact:");
  std::mt19937_64 rng(10'000);
  std::normal_distribution<float> score(0.0f, 5.0f);
  std::vector<float> logits(tok.vocab_size());
  std::size_t masked_entries = 0, with_consumed = 0;

  for (std::size_t i = 0; i < kMaskPairs; ++i) {
    const auto& f = facts[rng() % facts.size()];
    std::size_t cut = rng() % f.size();
    TokenSequence prefix(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<TokenSequence> consumed;
    auto s = engine.create_session();
    if (rng() % 5 == 0) {
      const auto& other = facts[rng() % facts.size()];
      if (other != f) {
        for (TokenId t : trigger) engine.step(s, t);
        for (TokenId t : other) engine.step(s, t);
        consumed.push_back(other);
        ++with_consumed;
      }
    }
    for (TokenId t : trigger) engine.step(s, t);
    for (TokenId t : prefix) engine.step(s, t);

    for (auto& v : logits) v = score(rng);
    if (i % 10 == 0) std::fill(logits.begin(), logits.begin() + 300, 1.0f);  // ties
    auto masked = engine.mask_logits(s, logits);
    auto allowed = oracle.next(prefix, consumed);
    for (std::size_t t = 0; t < logits.size(); ++t) {
      if (allowed.count(static_cast<TokenId>(t))) {
        if (std::memcmp(&masked[t], &logits[t], sizeof(float)) != 0) {
          return {false, "allowed entry altered at pair " + std::to_string(i)};
        }
      } else {
        if (!(std::isinf(masked[t]) && masked[t] < 0)) {
          return {false, "disallowed entry kept at pair " + std::to_string(i)};
        }
        ++masked_entries;
      }
    }
    auto best = static_cast<TokenId>(std::max_element(masked.begin(), masked.end()) - masked.begin());
    if (!allowed.count(best)) return {false, "argmax outside the allowed set at pair " + std::to_string(i)};
  }
  return {true, std::to_string(kMaskPairs) + " pairs (" + std::to_string(with_consumed) + " after a consumed fact), " +
                    std::to_string(masked_entries) + " masked entries, exact"};
}

Outcome metrics(const fs::path&) {
  std::vector<Prediction> preds;
  std::vector<GoldRecord> gold;
  auto add = [&](ParsedAnswer::Kind kind, const std::string& text, const std::string& answer) {
    std::string id = "q" + std::to_string(preds.size());
    preds.push_back({id, {kind, text}});
    gold.push_back({id, {answer}, AnswerType::Generic, "single-hop"});
  };
  using K = ParsedAnswer::Kind;
  for (int i = 0; i < 2; ++i) add(K::IDontKnow, "", "x");
  add(K::NotGiven, "", "x");
  for (int i = 0; i < 5; ++i) add(K::Answer, "right", "right");
  for (int i = 0; i < 2; ++i) add(K::Answer, "wrong", "right");
  auto r = aggregate(preds, gold).overall;
  if (r.accuracy() != 0.5 || !r.precision() || *r.precision() != 5.0 / 7.0) {
    return {false, "hand fixture gave A=" + std::to_string(r.accuracy())};
  }

  std::mt19937_64 rng(100);
  for (std::size_t f = 0; f < kRandomMetricFixtures; ++f) {
    preds.clear();
    gold.clear();
    std::size_t n = 1 + rng() % 50;
    for (std::size_t q = 0; q < n; ++q) {
      switch (rng() % 4) {
        case 0: add(K::IDontKnow, "", "a"); break;
        case 1: add(K::NotGiven, "", "a"); break;
        case 2: add(K::Answer, "a", "a"); break;
        default: add(K::Answer, "b", "a"); break;
      }
    }
    auto c = aggregate(preds, gold).overall;
    if (c.precision() && *c.precision() < c.accuracy()) return {false, "P < A on random fixture " + std::to_string(f)};
    if (!c.precision() && c.given != 0) return {false, "null precision with answers given"};
  }
  return {true, "A=0.5 P=5/7 exact; P >= A on " + std::to_string(kRandomMetricFixtures) + " random fixtures"};
}

/// 1M-fact synthetic KB built twice (with and without single-leaf compaction).
struct BigKb {
  fs::path dir;
  fs::path compacted;
  fs::path plain;
};

std::optional<BigKb> g_big;

const BigKb& big_kb(const fs::path& scratch) {
  if (g_big) return *g_big;
  BigKb kb{scratch / "big", scratch / "big" / "kb.ftrx", scratch / "big" / "plain.ftrx"};
  fs::create_directories(kb.dir);
  SynthConfig cfg;
  cfg.seed = 42;
  cfg.facts = kBigFacts;
  write_synthetic_kb(cfg, kb.dir / "triples.tsv", kb.dir / "labels.tsv");
  IngestOptions opts;
  opts.index.batch_size = kBigBatch;
  ingest(kb.dir / "triples.tsv", kb.dir / "labels.tsv", kb.compacted, opts);
  IngestOptions plain = opts;
  plain.index.compaction = false;
  plain.vocab_path = vocab_path_for(kb.compacted);
  ingest(kb.dir / "triples.tsv", kb.dir / "labels.tsv", kb.plain, plain);
  g_big = kb;
  return *g_big;
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

Outcome overhead(const fs::path& scratch) {
  const auto& kb = big_kb(scratch);
  auto index = open_index(kb.compacted);
  cli::BenchOptions opts;
  opts.tokens = kBenchTokens;
  opts.delay_ms = kBenchDelayMs;
  auto r = cli::run_bench(index, opts);
  if (!r.overhead()) return {false, "no tokens timed"};
  std::string detail = fixed(r.unconstrained_total_s, 2) + " s -> " + fixed(r.constrained_total_s, 2) +
                       " s, overhead " + fixed(*r.overhead() * 100, 3) + "% (max " + fixed(kMaxOverhead * 100, 0) +
                       "%), lookup p50 " + fixed(r.engine_p50_ms, 4) + " ms p99 " + fixed(r.engine_p99_ms, 4) +
                       " ms (max " + fixed(kMaxP99LookupMs, 0) + "), " + std::to_string(r.facts) + " facts over " +
                       std::to_string(index.reader->meta().fact_count) + "-fact disk index";
  return {*r.overhead() <= kMaxOverhead && r.engine_p99_ms <= kMaxP99LookupMs, detail};
}

Outcome big_stats(const fs::path& scratch) {
  const auto& kb = big_kb(scratch);
  IndexFile compacted(kb.compacted);
  IndexFile plain(kb.plain);
  auto cs = compute_stats(compacted, compacted.meta(), compacted.file_bytes());
  auto ps = compute_stats(plain, plain.meta(), plain.file_bytes());
  if (cs.blob_sizes.empty() || cs.duplicate_histogram.empty()) return {false, "no blob sizes or histogram"};
  double reduction = 1.0 - static_cast<double>(cs.record_count) / static_cast<double>(ps.record_count);
  std::string hist;
  for (auto [dups, n] : cs.duplicate_histogram) hist += " " + std::to_string(dups) + ":" + std::to_string(n);
  std::string detail = std::to_string(cs.meta.fact_count) + " facts; blob bytes p50=" +
                       std::to_string(cs.blob_percentile(50)) + " p90=" + std::to_string(cs.blob_percentile(90)) +
                       " p99=" + std::to_string(cs.blob_percentile(99)) + " max=" +
                       std::to_string(cs.blob_percentile(100)) + "; duplicate prefixes" + hist + "; records " +
                       std::to_string(ps.record_count) + " -> " + std::to_string(cs.record_count) + " (-" +
                       fixed(reduction * 100, 1) + "%, min " + fixed(kMinRecordReduction * 100, 0) + "%)";
  return {reduction >= kMinRecordReduction, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::pair<std::string, std::function<Outcome(const fs::path&)>>> criteria = {
      {"oracle-equivalence", oracle_equivalence},
      {"groundedness", groundedness},
      {"euro-no-repeat", euro_no_repeat},
      {"batch-merge", batch_merge},
      {"masking-contract", masking_contract},
      {"metrics", metrics},
      {"overhead-1m", overhead},
      {"stats-1m", big_stats},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  testing::TempDir scratch;
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn(scratch.path());
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fixed(secs, 1) << " s]"
              << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
