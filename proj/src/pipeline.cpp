// SPDX-License-Identifier: Apache-2.0

#include "factrie/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <random>

#include "factrie/error.hpp"
#include "factrie/trie.hpp"

namespace factrie {

ExternalSorter::ExternalSorter(std::filesystem::path scratch, std::size_t run_size)
    : scratch_(std::move(scratch)), run_size_(std::max<std::size_t>(1, run_size)) {}

ExternalSorter::~ExternalSorter() {
  std::error_code ec;
  for (const auto& r : runs_) std::filesystem::remove(r, ec);
}

void ExternalSorter::add(std::string line) {
  pending_.push_back(std::move(line));
  if (pending_.size() >= run_size_) spill();
}

void ExternalSorter::spill() {
  std::sort(pending_.begin(), pending_.end());
  pending_.erase(std::unique(pending_.begin(), pending_.end()), pending_.end());
  auto path = scratch_;
  path += ".sort" + std::to_string(runs_.size()) + ".tmp";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::BackendWrite, "cannot create " + path.string());
  runs_.push_back(path);
  for (const auto& s : pending_) out << s << '\n';
  out.close();
  if (!out) throw Error(ErrorCode::BackendWrite, "failed writing " + path.string());
  pending_.clear();
}

std::uint64_t ExternalSorter::for_each_unique(const std::function<void(const std::string&)>& visit) {
  if (!pending_.empty()) spill();
  struct Run {
    std::ifstream in;
    std::string line;
    bool valid = false;
    void next() { valid = static_cast<bool>(std::getline(in, line)); }
  };
  std::vector<std::unique_ptr<Run>> runs;
  for (const auto& p : runs_) {
    auto r = std::make_unique<Run>();
    r->in.open(p, std::ios::binary);
    if (!r->in) throw Error(ErrorCode::BackendRead, "cannot reopen " + p.string());
    r->next();
    runs.push_back(std::move(r));
  }
  auto greater = [&](std::size_t a, std::size_t b) { return runs[a]->line > runs[b]->line; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> heap(greater);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i]->valid) heap.push(i);
  }
  std::uint64_t count = 0;
  std::string last;
  bool have_last = false;
  while (!heap.empty()) {
    std::size_t i = heap.top();
    heap.pop();
    if (!have_last || runs[i]->line != last) {
      last = runs[i]->line;
      have_last = true;
      visit(last);
      ++count;
    }
    runs[i]->next();
    if (runs[i]->valid) heap.push(i);
  }
  return count;
}

std::filesystem::path vocab_path_for(const std::filesystem::path& index_path) {
  auto p = index_path;
  p += ".vocab.json";
  return p;
}

namespace {

/// Feeds facts into an index writer, cutting a batch every `batch_size` facts.
class Batcher {
 public:
  Batcher(IndexWriter& writer, const Tokenizer& tok, std::uint64_t batch_size, std::string fingerprint)
      : writer_(writer), tok_(tok), batch_size_(batch_size), fingerprint_(std::move(fingerprint)) {}

  void add(std::string_view fact_text) {
    batch_.push_back(tok_.encode_fact(fact_text));
    if (batch_.size() >= batch_size_) flush();
  }
  void flush() {
    if (batch_.empty()) return;
    writer_.add_batch(build_tree(std::move(batch_), fingerprint_));
    batch_.clear();
  }

 private:
  IndexWriter& writer_;
  const Tokenizer& tok_;
  std::uint64_t batch_size_;
  std::string fingerprint_;
  std::vector<TokenSequence> batch_;
};

void remove_partial(const std::filesystem::path& index_path) {
  std::error_code ec;
  auto tmp = index_path;
  tmp += ".tmp";
  std::filesystem::remove(tmp, ec);
}

}  // namespace

IngestStats ingest(const std::filesystem::path& triples, const std::filesystem::path& labels,
                   const std::filesystem::path& index_path, IngestOptions opts) {
  opts.index.validate();
  IngestStats st;
  LabelResolver resolver;
  resolver.load(labels);
  st.collisions = resolver.collisions();
  if (opts.log) {
    constexpr std::size_t kShown = 20;
    for (std::size_t i = 0; i < std::min(kShown, st.collisions.size()); ++i) {
      const auto& c = st.collisions[i];
      *opts.log << "warning: entities " << c.first_id << " and " << c.second_id << " share the label '" << c.display
                << "'\n";
    }
    if (st.collisions.size() > kShown) {
      *opts.log << "warning: " << st.collisions.size() - kShown << " more label collisions not shown\n";
    }
  }

  std::ifstream in(triples);
  if (!in) throw Error(ErrorCode::InputError, "cannot read triples " + triples.string());
  ExternalSorter sorter(index_path.string() + ".facts",
                        static_cast<std::size_t>(std::min<std::uint64_t>(opts.index.batch_size, 1'000'000)));
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    ++st.triples_read;
    RawTriple t;
    try {
      t = parse_triple_line(line);
    } catch (const Error& e) {
      throw Error(e.code(), triples.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!filter_triple(t)) {
      ++st.filtered_out;
      continue;
    }
    Fact f;
    try {
      f = verbalize(t, resolver);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnresolvableLabel) throw;
      ++st.unresolved;
      continue;
    }
    if (auto inv = opts.inverse.find(t.predicate_id);
        inv != opts.inverse.end() && std::holds_alternative<EntityRef>(t.object)) {
      sorter.add(invert_fact(f, escape_label(inv->second)).text);
      ++st.facts_emitted;
    }
    sorter.add(std::move(f.text));
    ++st.facts_emitted;
  }

  std::vector<std::string> sample;
  std::mt19937_64 rng(0x5eed);
  std::uint64_t seen = 0;
  st.unique_facts = sorter.for_each_unique([&](const std::string& fact) {
    if (opts.vocab_path) return;
    ++seen;
    if (sample.size() < opts.vocab_sample) {
      sample.push_back(fact);
    } else {
      std::uniform_int_distribution<std::uint64_t> pick(0, seen - 1);
      if (auto j = pick(rng); j < sample.size()) sample[j] = fact;
    }
  });
  if (st.unique_facts == 0) throw Error(ErrorCode::InputError, "no facts after filtering");

  Tokenizer tok = opts.vocab_path ? Tokenizer::load(*opts.vocab_path) : Tokenizer::train(sample, opts.vocab_pieces);
  sample.clear();
  sample.shrink_to_fit();
  opts.index.tokenizer_fingerprint = tok.fingerprint();
  if (opts.log) {
    *opts.log << "facts: " << st.unique_facts << " unique of " << st.facts_emitted << ", vocabulary "
              << tok.vocab_size() << " tokens\n";
  }

  try {
    IndexWriter writer(index_path, opts.index);
    Batcher batcher(writer, tok, opts.index.batch_size, tok.fingerprint());
    sorter.for_each_unique([&](const std::string& fact) { batcher.add(fact); });
    batcher.flush();
    st.meta = writer.finalize();
  } catch (...) {
    remove_partial(index_path);
    throw;
  }
  tok.save(vocab_path_for(index_path));
  st.file_bytes = std::filesystem::file_size(index_path);
  return st;
}

IndexMeta build_index(const std::vector<std::string>& fact_texts, const Tokenizer& tokenizer,
                      const std::filesystem::path& index_path, IndexConfig cfg) {
  cfg.tokenizer_fingerprint = tokenizer.fingerprint();
  cfg.validate();
  std::vector<std::string> sorted = fact_texts;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  IndexWriter writer(index_path, cfg);
  Batcher batcher(writer, tokenizer, cfg.batch_size, cfg.tokenizer_fingerprint);
  for (const auto& f : sorted) batcher.add(f);
  batcher.flush();
  return writer.finalize();
}

IndexMeta build_index_batches(const std::vector<std::vector<TokenSequence>>& batches,
                              const std::filesystem::path& index_path, IndexConfig cfg) {
  cfg.validate();
  IndexWriter writer(index_path, cfg);
  for (const auto& b : batches) {
    if (!b.empty()) writer.add_batch(build_tree(b, cfg.tokenizer_fingerprint));
  }
  return writer.finalize();
}

OpenedIndex open_index(const std::filesystem::path& index_path, std::size_t cache_bytes) {
  OpenedIndex out;
  out.reader = IndexReader::open(index_path, cache_bytes);
  auto vocab = vocab_path_for(index_path);
  if (!std::filesystem::exists(vocab)) throw Error(ErrorCode::InputError, "missing vocabulary " + vocab.string());
  out.tokenizer = std::make_shared<Tokenizer>(Tokenizer::load(vocab));
  if (out.tokenizer->fingerprint() != out.reader->tokenizer_fingerprint()) {
    throw Error(ErrorCode::TokenizerMismatch, "index " + index_path.string() + " was built with " +
                                                  out.reader->tokenizer_fingerprint() + " but " + vocab.string() +
                                                  " is " + out.tokenizer->fingerprint());
  }
  return out;
}

IndexMeta compact_index(const std::filesystem::path& src, const std::filesystem::path& dst) {
  auto opened = open_index(src);
  const IndexMeta& m = opened.reader->meta();
  IndexConfig cfg;
  cfg.cutoff_depth = m.cutoff_depth;
  cfg.compaction = m.compaction;
  cfg.tokenizer_fingerprint = m.tokenizer_fingerprint;
  cfg.batch_size = UINT64_MAX;
  auto facts = opened.reader->facts();
  IndexMeta out = build_index_batches({facts}, dst, cfg);
  opened.tokenizer->save(vocab_path_for(dst));
  return out;
}

}  // namespace factrie
