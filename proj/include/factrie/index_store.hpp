// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factrie/trie.hpp"
#include "factrie/types.hpp"

namespace factrie {

struct IndexConfig {
  /// Prefix length at which per-node records stop and subtrees are stored whole.
  std::uint32_t cutoff_depth = 7;
  std::uint64_t batch_size = 5'000'000;
  std::string tokenizer_fingerprint;
  /// Store single-leaf chains as one record carrying the remaining suffix.
  bool compaction = true;

  /// Throws InputError unless cutoff_depth >= 2 and batch_size >= 1.
  void validate() const;
};

enum class RecordKind : std::uint8_t { Standard = 0, Compacted = 1, BlobBearing = 2 };

/// One persisted row. For Compacted records `next_tokens` holds the whole
/// remaining suffix and `children_num_leaves` is empty.
struct NodeRecord {
  TokenSequence prefix;
  RecordKind kind = RecordKind::Standard;
  std::uint32_t batch = 0;
  std::uint64_t num_leaves = 0;
  TokenSequence next_tokens;
  std::vector<std::uint64_t> children_num_leaves;
  std::vector<std::uint8_t> subtree_blob;

  bool operator==(const NodeRecord&) const = default;
};

/// Keys are big-endian 4-byte token ids, so byte order equals token order.
std::string encode_key(TokenSpan prefix);
TokenSequence decode_key(std::string_view key);

std::vector<std::uint8_t> encode_record_value(const NodeRecord& record);
NodeRecord decode_record(std::string_view key, std::span<const std::uint8_t> value);

inline constexpr std::uint8_t kSubtreeBlobVersion = 1;

/// Versioned preorder encoding with varint token ids. Counts are not stored;
/// they are recomputed on load.
std::vector<std::uint8_t> encode_subtree(const TrieNode& node);
/// Throws CorruptRecord or UnsupportedVersion.
TrieNode load_subtree(std::span<const std::uint8_t> blob);

/// Write side of an ordered key-value backend. Duplicate keys are allowed.
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual void put(std::string key, std::vector<std::uint8_t> value) = 0;
};

struct RawEntry {
  std::string_view key;
  std::span<const std::uint8_t> value;
};

/// Read side: point lookup returning every duplicate, plus ordered scan.
class RecordStore {
 public:
  virtual ~RecordStore() = default;
  virtual std::vector<RawEntry> get(std::string_view key) const = 0;
  virtual void scan(const std::function<void(const RawEntry&)>& visit) const = 0;
  virtual std::uint64_t record_count() const = 0;
};

/// Writes the records of one batch tree in key order. Returns the record count.
std::uint64_t persist_batch(const FactTree& tree, const IndexConfig& cfg, std::uint32_t batch, RecordSink& sink);
std::vector<NodeRecord> batch_records(const FactTree& tree, const IndexConfig& cfg, std::uint32_t batch = 0);

/// Simple in-memory backend (sorted multimap), mostly for tests.
class MemoryStore final : public RecordSink, public RecordStore {
 public:
  void put(std::string key, std::vector<std::uint8_t> value) override;
  std::vector<RawEntry> get(std::string_view key) const override;
  void scan(const std::function<void(const RawEntry&)>& visit) const override;
  std::uint64_t record_count() const override { return entries_.size(); }

 private:
  std::multimap<std::string, std::vector<std::uint8_t>, std::less<>> entries_;
};

struct IndexMeta {
  std::uint32_t format_version = 1;
  std::string tokenizer_fingerprint;
  std::uint32_t cutoff_depth = 7;
  std::uint32_t batch_count = 0;
  std::uint64_t fact_count = 0;
  std::uint64_t record_count = 0;
  bool compaction = true;
};

inline constexpr std::uint32_t kIndexFormatVersion = 1;

/// Builds an index file batch by batch. Each batch is spilled as a sorted run
/// next to the output and the runs are merged when finalized.
class IndexWriter {
 public:
  IndexWriter(std::filesystem::path path, IndexConfig cfg);
  ~IndexWriter();
  IndexWriter(const IndexWriter&) = delete;
  IndexWriter& operator=(const IndexWriter&) = delete;

  void add_batch(const FactTree& tree);
  IndexMeta finalize();

 private:
  std::filesystem::path path_;
  IndexConfig cfg_;
  std::vector<std::filesystem::path> runs_;
  std::uint64_t fact_count_ = 0;
  bool finalized_ = false;
};

/// Memory-mapped index file. Read-only and safe for concurrent lookups.
class IndexFile final : public RecordStore {
 public:
  explicit IndexFile(const std::filesystem::path& path);
  ~IndexFile() override;
  IndexFile(const IndexFile&) = delete;
  IndexFile& operator=(const IndexFile&) = delete;

  const IndexMeta& meta() const noexcept { return meta_; }
  std::uint64_t file_bytes() const noexcept { return size_; }

  std::vector<RawEntry> get(std::string_view key) const override;
  void scan(const std::function<void(const RawEntry&)>& visit) const override;
  std::uint64_t record_count() const override { return meta_.record_count; }

 private:
  RawEntry entry_at(std::uint64_t i) const;

  const std::uint8_t* data_ = nullptr;
  std::uint64_t size_ = 0;
  IndexMeta meta_;
  std::uint64_t table_offset_ = 0;
};

struct IndexStats {
  IndexMeta meta;
  std::uint64_t record_count = 0;
  std::uint64_t total_bytes = 0;
  std::map<RecordKind, std::uint64_t> kinds;
  /// records-per-prefix -> number of prefixes with that many records
  std::map<std::uint64_t, std::uint64_t> duplicate_histogram;
  std::vector<std::uint64_t> blob_sizes;  // sorted ascending

  /// Nearest-rank percentile of blob sizes, 0 when there are no blobs.
  std::uint64_t blob_percentile(double pct) const;
};

IndexStats compute_stats(const RecordStore& store, const IndexMeta& meta, std::uint64_t total_bytes);

/// Merge-on-read view over a record store: duplicate prefixes from different
/// batches are combined, compacted chains and subtree blobs are walked
/// transparently. Resolved nodes and decoded subtrees are cached (LRU, bounded
/// by `cache_bytes` each).
class IndexReader final : public FactSource {
 public:
  IndexReader(std::shared_ptr<const RecordStore> store, IndexMeta meta,
              std::size_t cache_bytes = default_cache_bytes());
  ~IndexReader() override;

  static std::shared_ptr<IndexReader> open(const std::filesystem::path& path,
                                           std::size_t cache_bytes = default_cache_bytes());
  /// FACTRIE_CACHE_BYTES, or 256 MiB.
  static std::size_t default_cache_bytes();

  NodeHandle root() const override;
  NodeHandle child(const NodeHandle& parent, TokenId token) const override;
  const std::string& tokenizer_fingerprint() const override { return meta_.tokenizer_fingerprint; }

  const IndexMeta& meta() const noexcept { return meta_; }
  const RecordStore& store() const noexcept { return *store_; }

  /// Raw records stored under exactly this prefix, one per batch that wrote it.
  std::vector<NodeRecord> records_at(TokenSpan prefix) const;
  /// Merged, normalized record for `prefix`: identical whatever the batch
  /// partition used at build time. Throws NotFound.
  NodeRecord lookup(TokenSpan prefix) const;
  /// Every fact in token order (walks the whole index).
  std::vector<TokenSequence> facts() const;

 private:
  struct Caches;

  std::shared_ptr<const RecordStore> store_;
  IndexMeta meta_;
  std::unique_ptr<Caches> caches_;
};

}  // namespace factrie
