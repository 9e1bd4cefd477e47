// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "factrie/index_store.hpp"
#include "factrie/tokenizer.hpp"
#include "factrie/verbalizer.hpp"

namespace factrie {

/// Sorts and deduplicates a stream of strings without holding it in memory:
/// sorted runs of at most `run_size` lines are spilled next to `scratch`.
/// Strings must not contain newlines.
class ExternalSorter {
 public:
  ExternalSorter(std::filesystem::path scratch, std::size_t run_size);
  ~ExternalSorter();
  ExternalSorter(const ExternalSorter&) = delete;
  ExternalSorter& operator=(const ExternalSorter&) = delete;

  void add(std::string line);
  /// Visits every distinct line in byte order. May be called repeatedly.
  std::uint64_t for_each_unique(const std::function<void(const std::string&)>& visit);

 private:
  void spill();

  std::filesystem::path scratch_;
  std::size_t run_size_;
  std::vector<std::string> pending_;
  std::vector<std::filesystem::path> runs_;
};

struct IngestOptions {
  IndexConfig index;  // tokenizer_fingerprint is filled in by ingest
  std::size_t vocab_pieces = 8000;
  /// Facts sampled (reservoir, fixed seed) to learn the vocabulary.
  std::size_t vocab_sample = 500'000;
  /// Reuse an existing vocabulary instead of learning one.
  std::optional<std::filesystem::path> vocab_path;
  /// predicate id -> inverse predicate name; matching facts are also stored inverted.
  std::map<std::string, std::string> inverse;
  std::ostream* log = nullptr;
};

struct IngestStats {
  std::uint64_t triples_read = 0;
  std::uint64_t filtered_out = 0;
  std::uint64_t unresolved = 0;
  std::uint64_t facts_emitted = 0;
  std::uint64_t unique_facts = 0;
  std::vector<LabelCollision> collisions;
  IndexMeta meta;
  std::uint64_t file_bytes = 0;
};

/// Sidecar holding the vocabulary an index was built with.
std::filesystem::path vocab_path_for(const std::filesystem::path& index_path);

/// Verbalizes, deduplicates, tokenizes and persists a triple file. Throws
/// InputError "no facts after filtering" (and writes nothing) when no fact survives.
IngestStats ingest(const std::filesystem::path& triples, const std::filesystem::path& labels,
                   const std::filesystem::path& index_path, IngestOptions opts);

/// Writes fact texts (deduplicated) as an index, in batches of cfg.batch_size.
IndexMeta build_index(const std::vector<std::string>& fact_texts, const Tokenizer& tokenizer,
                      const std::filesystem::path& index_path, IndexConfig cfg);
/// Writes pre-partitioned token batches, one index batch each. Facts must be
/// globally unique across batches.
IndexMeta build_index_batches(const std::vector<std::vector<TokenSequence>>& batches,
                              const std::filesystem::path& index_path, IndexConfig cfg);

struct OpenedIndex {
  std::shared_ptr<IndexReader> reader;
  std::shared_ptr<Tokenizer> tokenizer;
};

/// Opens an index and its vocabulary sidecar. Throws TokenizerMismatch when
/// they disagree.
OpenedIndex open_index(const std::filesystem::path& index_path,
                       std::size_t cache_bytes = IndexReader::default_cache_bytes());

/// Rewrites an index as a single batch, so no prefix has duplicate records.
IndexMeta compact_index(const std::filesystem::path& src, const std::filesystem::path& dst);

}  // namespace factrie
