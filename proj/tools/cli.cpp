// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "bench.hpp"
#include "factrie/error.hpp"
#include "factrie/index_store.hpp"
#include "factrie/metrics.hpp"
#include "factrie/model.hpp"
#include "factrie/orchestrator.hpp"
#include "factrie/pipeline.hpp"
#include "factrie/synthetic.hpp"
#include "manifest.hpp"
#include "service.hpp"

#ifndef FACTRIE_VERSION
#define FACTRIE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace factrie::cli {

namespace {

/// Generated text and pieces are arbitrary bytes; invalid UTF-8 is replaced on output.
std::string dump(const json& j, int indent = -1) {
  return j.dump(indent, ' ', false, json::error_handler_t::replace);
}

std::string show_string(std::string_view s) { return dump(json(std::string(s))); }

struct DfsState {
  const FactSource& source;
  const Tokenizer& tok;
  std::string_view text;
  std::size_t budget = 200'000;  // nodes visited before giving up on exotic texts
  std::size_t nearest = 0;
  std::optional<TokenSequence> exact;
  std::optional<TokenSequence> partial_path;
  std::size_t partial_pos = 0;
};

bool dfs(DfsState& st, const NodeHandle& node, TokenSequence& path, std::size_t pos) {
  st.nearest = std::max(st.nearest, pos);
  if (pos == st.text.size()) {
    st.exact = path;
    return true;
  }
  if (st.budget == 0) return false;
  --st.budget;
  std::string_view rest = st.text.substr(pos);
  for (TokenId t : node->child_tokens()) {
    std::string_view piece = st.tok.piece(t);
    if (piece.size() > rest.size() && piece.starts_with(rest)) {
      if (!st.partial_path || pos > st.partial_pos) {
        st.partial_path = path;
        st.partial_pos = pos;
      }
      continue;
    }
    if (!rest.starts_with(piece)) continue;
    auto child = st.source.child(node, t);
    path.push_back(t);
    if (dfs(st, child, path, pos + piece.size())) return true;
    path.pop_back();
  }
  return false;
}

std::vector<std::pair<TokenId, std::uint64_t>> sorted_rows(const FactSource& source, TokenSpan prefix) {
  auto next = next_tokens(source, prefix);
  std::vector<std::pair<TokenId, std::uint64_t>> rows(next.begin(), next.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return rows;
}

TokenSequence parse_token_list(const std::string& text) {
  TokenSequence out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      unsigned long v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<TokenId>(v));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InputError, "bad token id '" + item + "'");
    }
  }
  return out;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::InputError, "cannot write " + path.string());
  out << dump(j, 2) << '\n';
  if (!out) throw Error(ErrorCode::InputError, "failed writing " + path.string());
}

json stats_json(const IndexStats& s) {
  json kinds = {{"standard", 0}, {"compacted", 0}, {"blob_bearing", 0}};
  for (auto [k, n] : s.kinds) {
    kinds[k == RecordKind::Standard ? "standard" : k == RecordKind::Compacted ? "compacted" : "blob_bearing"] = n;
  }
  json hist = json::object();
  for (auto [dups, n] : s.duplicate_histogram) hist[std::to_string(dups)] = n;
  return {{"facts", s.meta.fact_count},
          {"records", s.record_count},
          {"bytes", s.total_bytes},
          {"batches", s.meta.batch_count},
          {"cutoff_depth", s.meta.cutoff_depth},
          {"compaction", s.meta.compaction},
          {"tokenizer_fingerprint", s.meta.tokenizer_fingerprint},
          {"kinds", kinds},
          {"blob_sizes",
           {{"count", s.blob_sizes.size()},
            {"p50", s.blob_percentile(50)},
            {"p90", s.blob_percentile(90)},
            {"p99", s.blob_percentile(99)},
            {"max", s.blob_percentile(100)}}},
          {"duplicate_prefix_histogram", hist}};
}

void print_stats(std::ostream& out, const json& s) {
  out << "facts " << s["facts"] << "\nrecords " << s["records"] << "\nbytes " << s["bytes"] << "\nbatches "
      << s["batches"] << "\ncutoff_depth " << s["cutoff_depth"] << "\ncompaction " << s["compaction"] << '\n';
  const auto& k = s["kinds"];
  out << "kinds standard=" << k["standard"] << " compacted=" << k["compacted"] << " blob_bearing="
      << k["blob_bearing"] << '\n';
  const auto& b = s["blob_sizes"];
  out << "blob_bytes count=" << b["count"] << " p50=" << b["p50"] << " p90=" << b["p90"] << " p99=" << b["p99"]
      << " max=" << b["max"] << '\n';
  out << "duplicate_prefixes";
  for (const auto& [dups, n] : s["duplicate_prefix_histogram"].items()) out << ' ' << dups << ':' << n;
  out << '\n';
}

IndexStats index_stats(const fs::path& index) {
  IndexFile file(index);
  return compute_stats(file, file.meta(), file.file_bytes());
}

/// Options shared by decode and eval.
struct PromptFlags {
  std::string script;
  std::string model_url;
  std::string model_path = "/logits";
  std::string few_shot;
  std::string system_prompt_file;
  std::size_t beams = 3;
  std::size_t max_new_tokens = 1000;
  std::string trigger = "Fact:";
  bool relation_addendum = false;

  void add_to(CLI::App& app) {
    auto* s = app.add_option("--script", script, "Scripted model rules (JSON)")->check(CLI::ExistingFile);
    auto* u = app.add_option("--model-url", model_url, "Remote model base URL, e.g. http://127.0.0.1:8000");
    s->excludes(u);
    app.add_option("--model-path", model_path, "Remote model endpoint path")->capture_default_str();
    app.add_option("--few-shot", few_shot, "Worked examples separated by === lines")->check(CLI::ExistingFile);
    app.add_option("--system-prompt-file", system_prompt_file, "Replaces the built-in instructions")
        ->check(CLI::ExistingFile);
    app.add_option("--beams", beams, "Beam count; 1 decodes greedily")->capture_default_str();
    app.add_option("--max-new-tokens", max_new_tokens)->capture_default_str();
    app.add_option("--trigger", trigger)->capture_default_str();
    app.add_flag("--relation-addendum", relation_addendum, "Ask for one relation per Fact command");
  }

  PromptConfig prompt() const {
    PromptConfig cfg;
    if (!system_prompt_file.empty()) {
      std::ifstream in(system_prompt_file);
      std::stringstream ss;
      ss << in.rdbuf();
      cfg.system_prompt = ss.str();
    }
    if (few_shot.empty()) throw Error(ErrorCode::InputError, "--few-shot is required for decoding");
    cfg.few_shot = load_few_shot(few_shot);
    cfg.beams = beams;
    cfg.max_new_tokens = max_new_tokens;
    cfg.trigger = trigger;
    cfg.relation_addendum = relation_addendum;
    cfg.validate();
    return cfg;
  }

  std::unique_ptr<LanguageModel> model(const OpenedIndex& index) const {
    if (!script.empty()) return std::make_unique<ScriptedModel>(index.tokenizer, Script::load(script));
    if (!model_url.empty()) {
      return std::make_unique<HttpModel>(model_url, model_path, index.tokenizer->vocab_size(),
                                         index.tokenizer->fingerprint());
    }
    throw Error(ErrorCode::InputError, "one of --script or --model-url is required");
  }

  void record(RunManifest& m) const {
    if (!script.empty()) m.input(script);
    if (!few_shot.empty()) m.input(few_shot);
    if (!system_prompt_file.empty()) m.input(system_prompt_file);
    m.config("model", script.empty() ? json{{"url", model_url}, {"path", model_path}} : json{{"script", script}});
    m.config("beams", beams);
    m.config("max_new_tokens", max_new_tokens);
    m.config("trigger", trigger);
    m.config("relation_addendum", relation_addendum);
  }
};

void print_transcript(std::ostream& out, const Transcript& t) {
  out << t.text;
  if (!t.text.ends_with('\n')) out << '\n';
  out << "--\n";
  for (const auto& f : t.facts) out << "fact " << f.text << '\n';
  for (const auto& e : t.exhaustion) out << "exhausted at " << e.position << '\n';
  out << "terminal " << to_string(t.terminal) << " tokens " << t.new_tokens << '\n';
}

std::string_view kind_name(ParsedAnswer::Kind k) {
  switch (k) {
    case ParsedAnswer::Kind::Answer:
      return "answer";
    case ParsedAnswer::Kind::IDontKnow:
      return "i_dont_know";
    case ParsedAnswer::Kind::NotGiven:
      return "not_given";
  }
  return "not_given";
}

/// Decodes every question, `jobs` at a time; results keep dataset order.
std::vector<Transcript> decode_all(const std::vector<DatasetRecord>& dataset, const LanguageModel& model,
                                   const OpenedIndex& index, const PromptConfig& cfg, std::size_t jobs) {
  std::vector<Transcript> out(dataset.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      try {
        out[i] = run_question(dataset[i].question, model, index.reader, index.tokenizer, cfg);
        out[i].id = dataset[i].id;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = dataset.size();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, dataset.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

struct Commands {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;

  int ingest(const std::string& triples, const std::string& labels, const std::string& index, IngestOptions opts,
             const std::vector<std::string>& inverse) {
    RunManifest m("ingest", argv);
    for (const auto& spec : inverse) {
      auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
        throw Error(ErrorCode::InputError, "--inverse expects PREDICATE=name, got '" + spec + "'");
      }
      opts.inverse[spec.substr(0, eq)] = spec.substr(eq + 1);
    }
    m.input(triples);
    m.input(labels);
    if (opts.vocab_path) m.input(*opts.vocab_path);
    m.config("cutoff_depth", opts.index.cutoff_depth);
    m.config("batch_size", opts.index.batch_size);
    m.config("compaction", opts.index.compaction);
    m.config("vocab_pieces", opts.vocab_pieces);
    m.config("vocab_sample", opts.vocab_sample);
    m.config("inverse", opts.inverse);
    opts.log = &err;

    auto st = factrie::ingest(triples, labels, index, std::move(opts));
    auto s = stats_json(index_stats(index));
    out << "triples_read " << st.triples_read << "\nfiltered_out " << st.filtered_out << "\nunresolved "
        << st.unresolved << "\nunique_facts " << st.unique_facts << "\nlabel_collisions " << st.collisions.size()
        << '\n';
    print_stats(out, s);
    m.output(index);
    m.output(vocab_path_for(index));
    m.stat("triples_read", st.triples_read);
    m.stat("filtered_out", st.filtered_out);
    m.stat("unresolved", st.unresolved);
    m.stat("unique_facts", st.unique_facts);
    m.stat("index", s);
    m.write(index);
    return 0;
  }

  int query(const std::string& index_path, const std::optional<std::string>& prefix,
            const std::optional<std::string>& tokens, bool as_json) {
    auto index = open_index(index_path);
    TokenSequence path;
    std::string partial;
    if (tokens) {
      path = parse_token_list(*tokens);
      index.reader->resolve(path);
    } else {
      auto r = resolve_text_prefix(*index.reader, *index.tokenizer, prefix.value_or(""));
      if (!r.tokens) {
        throw Error(ErrorCode::UnknownPrefix,
                    "no fact starts with " + show_string(*prefix) + "; nearest valid prefix: " + show_string(r.nearest));
      }
      path = *r.tokens;
      partial = r.partial;
    }
    auto rows = sorted_rows(*index.reader, path);
    if (!partial.empty()) {
      std::erase_if(rows, [&](const auto& row) { return !index.tokenizer->piece(row.first).starts_with(partial); });
    }
    if (as_json) {
      json j = {{"prefix_tokens", path}, {"prefix_text", index.tokenizer->decode(path)}, {"rows", json::array()}};
      for (auto [t, n] : rows) {
        j["rows"].push_back({{"token", t}, {"piece", std::string(index.tokenizer->piece(t))}, {"leaves", n}});
      }
      out << dump(j) << '\n';
    } else {
      out << "token\tpiece\tleaves\n";
      for (auto [t, n] : rows) out << t << '\t' << show_string(index.tokenizer->piece(t)) << '\t' << n << '\n';
    }
    return 0;
  }

  int decode(const std::string& index_path, const PromptFlags& flags, const std::string& question,
             const std::string& output, bool as_json) {
    RunManifest m("decode", argv);
    auto index = open_index(index_path);
    auto cfg = flags.prompt();
    auto model = flags.model(index);
    m.input(index_path);
    flags.record(m);
    m.config("question", question);
    Transcript t = run_question(question, *model, index.reader, index.tokenizer, cfg);
    if (as_json) {
      out << dump(json(t)) << '\n';
    } else {
      print_transcript(out, t);
    }
    if (!output.empty()) {
      json j = t;
      j["manifest"] = manifest_path_for(output).string();
      write_json_file(output, j);
      m.output(output);
      m.stat("terminal", to_string(t.terminal));
      m.stat("facts", t.facts.size());
      m.stat("new_tokens", t.new_tokens);
      m.write(output);
    }
    return 0;
  }

  int eval(const std::string& index_path, const PromptFlags& flags, const std::string& dataset_path,
           const std::string& transcripts_in, const std::string& transcripts_out, const std::string& report,
           std::size_t jobs, bool strict, char delimiter) {
    RunManifest m("eval", argv);
    auto dataset = load_dataset(dataset_path);
    m.input(dataset_path);
    std::vector<Transcript> transcripts;
    if (!transcripts_in.empty()) {
      m.input(transcripts_in);
      transcripts = load_transcripts(transcripts_in);
    } else {
      auto index = open_index(index_path);
      auto cfg = flags.prompt();
      auto model = flags.model(index);
      m.input(index_path);
      flags.record(m);
      m.config("jobs", jobs);
      transcripts = decode_all(dataset, *model, index, cfg, jobs);
    }
    if (!transcripts_out.empty()) write_transcripts(transcripts_out, transcripts);

    MatchOptions opts{strict, delimiter};
    m.config("strict_enum_match", strict);
    m.config("delimiter", std::string(1, delimiter));
    std::vector<Prediction> preds;
    std::vector<GoldRecord> gold;
    std::map<std::string, const GoldRecord*> gold_by_id;
    for (const auto& r : dataset) {
      gold.push_back(r.gold);
      gold_by_id[r.id] = &r.gold;
    }
    json questions = json::array();
    for (const auto& t : transcripts) {
      auto answer = parse_answer(t);
      preds.push_back({t.id, answer});
      auto g = gold_by_id.find(t.id);
      bool correct = answer.kind == ParsedAnswer::Kind::Answer && g != gold_by_id.end() &&
                     exact_match(answer.text, g->second->answers, g->second->answer_type, opts);
      questions.push_back({{"id", t.id},
                           {"kind", kind_name(answer.kind)},
                           {"answer", answer.text},
                           {"correct", correct},
                           {"facts", t.facts.size()},
                           {"terminal", to_string(t.terminal)}});
    }
    // Only the questions that were decoded are scored.
    std::vector<GoldRecord> scored;
    for (const auto& p : preds) {
      auto g = gold_by_id.find(p.id);
      if (g == gold_by_id.end()) throw Error(ErrorCode::MissingGold, "no gold record for " + p.id);
      scored.push_back(*g->second);
    }
    auto result = aggregate(preds, scored, opts);
    out << summary_text(result);
    json rep = {{"metrics", to_json(result)},
                {"summary", summary_text(result)},
                {"questions", questions},
                {"manifest", manifest_path_for(report).string()}};
    write_json_file(report, rep);
    m.output(report);
    if (!transcripts_out.empty()) m.output(transcripts_out);
    m.stat("questions", result.overall.questions);
    m.stat("given", result.overall.given);
    m.stat("correct", result.overall.correct);
    m.write(report);
    return 0;
  }

  int bench(const std::string& index_path, const BenchOptions& opts, const std::string& output,
            const std::string& table, bool print_table) {
    RunManifest m("bench", argv);
    auto index = open_index(index_path);
    m.input(index_path);
    m.config("tokens", opts.tokens);
    m.config("delay_ms", opts.delay_ms);
    m.config("warmup", opts.warmup);
    m.config("seed", opts.seed);
    m.config("window", opts.window);
    auto r = run_bench(index, opts);
    auto summary = to_json(r, false);
    out << "tokens " << opts.tokens << "\nunconstrained_total_s " << r.unconstrained_total_s
        << "\nconstrained_total_s " << r.constrained_total_s << "\nratio " << summary["ratio"] << "\noverhead "
        << summary["overhead"] << "\nengine_p50_ms " << r.engine_p50_ms << "\nengine_p99_ms " << r.engine_p99_ms
        << "\nengine_max_ms " << r.engine_max_ms << "\nfacts " << r.facts << '\n';
    if (print_table) write_table(out, r);
    if (!table.empty()) {
      std::ofstream t(table, std::ios::trunc);
      if (!t) throw Error(ErrorCode::InputError, "cannot write " + table);
      write_table(t, r);
    }
    if (!output.empty()) {
      auto j = to_json(r, true);
      j["manifest"] = manifest_path_for(output).string();
      write_json_file(output, j);
      m.output(output);
      if (!table.empty()) m.output(table);
      m.stat("result", summary);
      m.write(output);
    }
    return 0;
  }

  int stats(const std::string& index_path, bool as_json, const std::string& output) {
    auto s = stats_json(index_stats(index_path));
    if (as_json) {
      out << dump(s) << '\n';
    } else {
      print_stats(out, s);
    }
    if (!output.empty()) {
      RunManifest m("stats", argv);
      m.input(index_path);
      s["manifest"] = manifest_path_for(output).string();
      write_json_file(output, s);
      m.output(output);
      m.write(output);
    }
    return 0;
  }

  int compact(const std::string& index_path, const std::string& output) {
    RunManifest m("compact", argv);
    m.input(index_path);
    compact_index(index_path, output);
    auto s = stats_json(index_stats(output));
    print_stats(out, s);
    m.output(output);
    m.output(vocab_path_for(output));
    m.stat("index", s);
    m.write(output);
    return 0;
  }

  int synth(const SynthConfig& cfg, const std::string& triples, const std::string& labels) {
    RunManifest m("synth", argv);
    m.config("facts", cfg.facts);
    m.config("seed", cfg.seed);
    m.config("predicates", cfg.predicates);
    m.config("words", cfg.words);
    write_synthetic_kb(cfg, triples, labels);
    m.output(triples);
    m.output(labels);
    m.write(triples);
    out << "wrote " << triples << " and " << labels << '\n';
    return 0;
  }

  int golden(const std::string& index_path, const GoldenOptions& opts, const std::string& output) {
    RunManifest m("export-golden", argv);
    auto index = open_index(index_path);
    m.input(index_path);
    m.config("count", opts.count);
    m.config("seed", opts.seed);
    auto n = export_golden(index, opts, output);
    m.output(output);
    m.stat("fixtures", n);
    m.write(output);
    out << "fixtures " << n << '\n';
    return 0;
  }

  int serve(const std::string& index_path, const std::string& host, int port, const EngineConfig& cfg) {
    SessionServer server(open_index(index_path), cfg);
    int bound = server.bind(host, port);
    if (bound < 0) throw Error(ErrorCode::InputError, "cannot bind " + host + ":" + std::to_string(port));
    out << "listening on " << host << ':' << bound << std::endl;
    server.serve();
    return 0;
  }

  int rerun(const std::string& manifest_path, bool check_inputs) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorCode::InputError, "cannot read " + manifest_path);
    json m;
    try {
      m = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InputError, manifest_path + ": " + e.what());
    }
    if (!m.contains("argv") || !m["argv"].is_array()) {
      throw Error(ErrorCode::InputError, manifest_path + ": no argv recorded");
    }
    if (check_inputs) {
      for (const auto& input : m.value("inputs", json::array())) {
        auto path = input.at("path").get<std::string>();
        if (!fs::exists(path)) throw Error(ErrorCode::InputError, "input missing: " + path);
        if (hash_file(path) != input.at("hash").get<std::string>()) {
          throw Error(ErrorCode::InputError, "input changed since the recorded run: " + path);
        }
      }
    }
    auto args = m["argv"].get<std::vector<std::string>>();
    if (!args.empty() && args.front() == "rerun") throw Error(ErrorCode::InputError, "refusing to rerun a rerun");
    return run(args, out, err);
  }
};

}  // namespace

PrefixResolution resolve_text_prefix(const FactSource& source, const Tokenizer& tokenizer, std::string_view text) {
  std::string full = text.empty() || text.front() == ' ' ? std::string(text) : " " + std::string(text);
  PrefixResolution r;
  if (text.empty()) {
    r.tokens = TokenSequence{};
    return r;
  }
  DfsState st{source, tokenizer, full, 200'000, 0, std::nullopt, std::nullopt, 0};
  TokenSequence path;
  dfs(st, source.root(), path, 0);
  std::size_t skip = full.size() - text.size();
  if (st.exact) {
    r.tokens = st.exact;
  } else if (st.partial_path) {
    r.tokens = st.partial_path;
    r.partial = full.substr(st.partial_pos);
  }
  r.nearest = full.substr(skip, st.nearest >= skip ? st.nearest - skip : 0);
  return r;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fact-constrained decoding over knowledge-graph prefix indexes", "factrie"};
  app.set_version_flag("--version", FACTRIE_VERSION);
  app.require_subcommand(1);
  Commands cmd{out, err, args};

  std::string index, triples, labels, output, table, question, dataset, report, tin, tout, manifest, host = "127.0.0.1";
  std::optional<std::string> prefix, tokens;
  bool as_json = false, no_compaction = false, strict = false, print_table = false, no_check = false;
  std::string vocab, delimiter = ",";
  std::vector<std::string> inverse;
  IngestOptions iopts;
  PromptFlags pflags;
  std::size_t jobs = 1;
  BenchOptions bopts;
  SynthConfig scfg;
  GoldenOptions gopts;
  EngineConfig ecfg;
  int port = 0;

  auto index_opt = [&](CLI::App* sub) {
    sub->add_option("--index", index, "Index file")->required()->check(CLI::ExistingFile);
  };

  auto* ingest = app.add_subcommand("ingest", "Build an index from triples and labels");
  ingest->add_option("--triples", triples)->required()->check(CLI::ExistingFile);
  ingest->add_option("--labels", labels)->required()->check(CLI::ExistingFile);
  ingest->add_option("--index", index, "Output index file")->required();
  ingest->add_option("--cutoff-depth", iopts.index.cutoff_depth)->capture_default_str();
  ingest->add_option("--batch-size", iopts.index.batch_size, "Facts per in-memory tree")->capture_default_str();
  ingest->add_flag("--no-compaction", no_compaction, "Keep single-leaf chains as per-node records");
  ingest->add_option("--vocab-pieces", iopts.vocab_pieces)->capture_default_str();
  ingest->add_option("--vocab-sample", iopts.vocab_sample)->capture_default_str();
  ingest->add_option("--vocab", vocab, "Reuse this vocabulary")->check(CLI::ExistingFile);
  ingest->add_option("--inverse", inverse, "Also store PREDICATE facts inverted, as PREDICATE=name");

  auto* query = app.add_subcommand("query", "List the tokens allowed after a fact prefix");
  index_opt(query);
  auto* qp = query->add_option("--prefix", prefix, "Prefix text; empty lists the first tokens");
  query->add_option("--tokens", tokens, "Comma-separated token ids")->excludes(qp);
  query->add_flag("--json", as_json);

  auto* decode = app.add_subcommand("decode", "Answer one question with constrained decoding");
  index_opt(decode);
  pflags.add_to(*decode);
  decode->add_option("--question", question)->required();
  decode->add_option("--output", output, "Write the transcript here (JSON)");
  decode->add_flag("--json", as_json);

  auto* eval = app.add_subcommand("eval", "Decode a dataset and score it");
  eval->add_option("--index", index, "Index file")->check(CLI::ExistingFile);
  pflags.add_to(*eval);
  eval->add_option("--dataset", dataset)->required()->check(CLI::ExistingFile);
  eval->add_option("--transcripts-in", tin, "Score these transcripts instead of decoding")
      ->check(CLI::ExistingFile);
  eval->add_option("--transcripts-out", tout);
  eval->add_option("--report", report, "Report file (JSON)")->required();
  eval->add_option("--jobs", jobs, "Questions decoded in parallel")->capture_default_str();
  eval->add_flag("--strict-enum-match", strict, "Compare enumerations as whole strings");
  eval->add_option("--delimiter", delimiter, "Enumeration item separator")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Time unconstrained against constrained generation");
  index_opt(bench);
  bench->add_option("--tokens", bopts.tokens)->capture_default_str();
  bench->add_option("--delay-ms", bopts.delay_ms, "Model forward delay per token")->capture_default_str();
  bench->add_option("--warmup", bopts.warmup)->capture_default_str();
  bench->add_option("--seed", bopts.seed)->capture_default_str();
  bench->add_option("--window", bopts.window, "Moving average window")->capture_default_str();
  bench->add_option("--output", output, "Result with per-token rows (JSON)");
  bench->add_option("--table", table, "Per-token table (CSV)");
  bench->add_flag("--print-table", print_table);

  auto* stats = app.add_subcommand("stats", "Record, blob and duplicate-prefix statistics");
  index_opt(stats);
  stats->add_flag("--json", as_json);
  stats->add_option("--output", output, "Also write the statistics here (JSON)");

  auto* compact = app.add_subcommand("compact", "Rewrite an index as a single batch");
  index_opt(compact);
  compact->add_option("--output", output)->required();

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic knowledge base");
  synth->add_option("--facts", scfg.facts)->capture_default_str();
  synth->add_option("--seed", scfg.seed)->capture_default_str();
  synth->add_option("--predicates", scfg.predicates)->capture_default_str();
  synth->add_option("--words", scfg.words)->capture_default_str();
  synth->add_option("--triples", triples)->required();
  synth->add_option("--labels", labels)->required();

  auto* golden = app.add_subcommand("export-golden", "Write masking fixtures for host adapters");
  index_opt(golden);
  golden->add_option("--count", gopts.count)->capture_default_str();
  golden->add_option("--seed", gopts.seed)->capture_default_str();
  golden->add_option("--output", output)->required();

  auto* serve = app.add_subcommand("serve", "Serve engine sessions over HTTP");
  index_opt(serve);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "0 picks a free port")->capture_default_str();
  serve->add_option("--trigger", ecfg.trigger)->capture_default_str();
  serve->add_option("--max-new-tokens", ecfg.max_new_tokens)->capture_default_str();

  auto* rerun = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
  rerun->add_option("manifest", manifest)->required()->check(CLI::ExistingFile);
  rerun->add_flag("--no-check", no_check, "Skip the input hash check");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      iopts.index.compaction = !no_compaction;
      if (!vocab.empty()) iopts.vocab_path = vocab;
      return cmd.ingest(triples, labels, index, iopts, inverse);
    }
    if (*query) return cmd.query(index, prefix, tokens, as_json);
    if (*decode) return cmd.decode(index, pflags, question, output, as_json);
    if (*eval) {
      if (delimiter.size() != 1) throw Error(ErrorCode::InputError, "--delimiter must be one character");
      if (tin.empty() && index.empty()) throw Error(ErrorCode::InputError, "--index is required unless --transcripts-in is given");
      return cmd.eval(index, pflags, dataset, tin, tout, report, jobs, strict, delimiter[0]);
    }
    if (*bench) return cmd.bench(index, bopts, output, table, print_table);
    if (*stats) return cmd.stats(index, as_json, output);
    if (*compact) return cmd.compact(index, output);
    if (*synth) return cmd.synth(scfg, triples, labels);
    if (*golden) return cmd.golden(index, gopts, output);
    if (*serve) return cmd.serve(index, host, port, ecfg);
    if (*rerun) return cmd.rerun(manifest, !no_check);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  }
  return 2;
}

}  // namespace factrie::cli
