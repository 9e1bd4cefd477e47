// SPDX-License-Identifier: Apache-2.0

#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>

#include "factrie/engine.hpp"
#include "factrie/model.hpp"

namespace factrie::cli {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string bench_question(std::uint64_t seed) { return "Question: benchmark " + std::to_string(seed); }

Script bench_script(std::uint64_t seed, double delay_ms) {
  Script s;
  s.rules = {
      {bench_question(seed), "\nFact:"},
      {"> .", "\nFact:"},
      {"Fact:", " <Bench> <loop> <x> ."},
  };
  s.delay_ms = delay_ms;
  return s;
}

TokenId argmax(const std::vector<float>& v) {
  return static_cast<TokenId>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// One generation run; `engine` is null for the unconstrained baseline.
std::vector<double> generate(const ScriptedModel& model, const ConstraintEngine* engine, TokenSequence context,
                             std::size_t tokens, std::vector<double>* engine_ms, std::size_t* facts) {
  std::vector<double> per_token;
  per_token.reserve(tokens);
  std::vector<float> logits;
  DecodingSession session;
  if (engine) session = engine->create_session();
  for (std::size_t i = 0; i < tokens; ++i) {
    auto t0 = Clock::now();
    model.next_logits(context, logits);
    logits[Tokenizer::kEos] = kMasked;
    TokenId next;
    if (engine) {
      auto e0 = Clock::now();
      engine->mask_in_place(session, logits);
      next = argmax(logits);
      engine->step(session, next);
      if (engine_ms) engine_ms->push_back(ms_since(e0));
    } else {
      next = argmax(logits);
    }
    context.push_back(next);
    per_token.push_back(ms_since(t0));
  }
  if (engine && facts) *facts = session.report().facts.size();
  return per_token;
}

std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
  std::vector<double> out(v.size());
  double sum = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= window) sum -= v[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

double percentile(std::vector<double> v, double pct) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

BenchResult run_bench(const OpenedIndex& index, const BenchOptions& opts) {
  BenchResult r;
  r.options = opts;
  EngineConfig ecfg;
  ecfg.max_new_tokens = std::max<std::size_t>(1, opts.tokens + opts.warmup);
  auto engine = std::make_shared<ConstraintEngine>(index.reader, index.tokenizer, ecfg);
  TokenSequence prompt = index.tokenizer->encode(bench_question(opts.seed));

  // Warm the page cache and the node caches before anything is timed.
  std::uint64_t touched = 0;
  index.reader->store().scan([&](const RawEntry& e) { touched += e.value.size(); });
  if (opts.warmup > 0) {
    ScriptedModel fast(index.tokenizer, bench_script(opts.seed, 0.0));
    generate(fast, engine.get(), prompt, opts.warmup, nullptr, nullptr);
  }

  ScriptedModel model(index.tokenizer, bench_script(opts.seed, opts.delay_ms));
  std::vector<double> engine_ms;
  auto plain = generate(model, nullptr, prompt, opts.tokens, nullptr, nullptr);
  auto constrained = generate(model, engine.get(), prompt, opts.tokens, &engine_ms, &r.facts);

  auto plain_avg = moving_average(plain, opts.window);
  auto constrained_avg = moving_average(constrained, opts.window);
  for (std::size_t i = 0; i < opts.tokens; ++i) {
    r.rows.push_back({plain[i], constrained[i], engine_ms[i], plain_avg[i], constrained_avg[i]});
    r.unconstrained_total_s += plain[i] / 1000.0;
    r.constrained_total_s += constrained[i] / 1000.0;
  }
  if (r.unconstrained_total_s > 0) r.ratio = r.constrained_total_s / r.unconstrained_total_s;
  r.engine_p50_ms = percentile(engine_ms, 50);
  r.engine_p99_ms = percentile(engine_ms, 99);
  r.engine_max_ms = engine_ms.empty() ? 0 : *std::max_element(engine_ms.begin(), engine_ms.end());
  return r;
}

nlohmann::json to_json(const BenchResult& r, bool with_rows) {
  nlohmann::json j = {{"tokens", r.options.tokens},
                      {"delay_ms", r.options.delay_ms},
                      {"warmup", r.options.warmup},
                      {"seed", r.options.seed},
                      {"window", r.options.window},
                      {"unconstrained_total_s", r.unconstrained_total_s},
                      {"constrained_total_s", r.constrained_total_s},
                      {"ratio", r.ratio ? nlohmann::json(*r.ratio) : nlohmann::json(nullptr)},
                      {"overhead", r.overhead() ? nlohmann::json(*r.overhead()) : nlohmann::json(nullptr)},
                      {"engine_p50_ms", r.engine_p50_ms},
                      {"engine_p99_ms", r.engine_p99_ms},
                      {"engine_max_ms", r.engine_max_ms},
                      {"facts", r.facts}};
  if (with_rows) {
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
      rows.push_back({row.unconstrained_ms, row.constrained_ms, row.engine_ms, row.unconstrained_avg_ms,
                      row.constrained_avg_ms});
    }
    j["row_columns"] = {"unconstrained_ms", "constrained_ms", "engine_ms", "unconstrained_avg_ms",
                        "constrained_avg_ms"};
  }
  return j;
}

void write_table(std::ostream& out, const BenchResult& r) {
  out << "token,unconstrained_ms,constrained_ms,engine_ms,unconstrained_avg_ms,constrained_avg_ms\n";
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    out << i << ',' << row.unconstrained_ms << ',' << row.constrained_ms << ',' << row.engine_ms << ','
        << row.unconstrained_avg_ms << ',' << row.constrained_avg_ms << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

}  // namespace factrie::cli
