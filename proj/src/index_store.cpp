// SPDX-License-Identifier: Apache-2.0

#include "factrie/index_store.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <queue>

#include "codec.hpp"
#include "factrie/error.hpp"
#include "lru_cache.hpp"

namespace factrie {

void IndexConfig::validate() const {
  if (cutoff_depth < 2) throw Error(ErrorCode::InputError, "cutoff depth must be at least 2");
  if (batch_size < 1) throw Error(ErrorCode::InputError, "batch size must be at least 1");
}

// ---------------------------------------------------------------------------
// Keys and record values

std::string encode_key(TokenSpan prefix) {
  std::string key(prefix.size() * 4, '\0');
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    key[4 * i] = static_cast<char>(prefix[i] >> 24);
    key[4 * i + 1] = static_cast<char>(prefix[i] >> 16);
    key[4 * i + 2] = static_cast<char>(prefix[i] >> 8);
    key[4 * i + 3] = static_cast<char>(prefix[i]);
  }
  return key;
}

TokenSequence decode_key(std::string_view key) {
  if (key.size() % 4 != 0) throw Error(ErrorCode::CorruptRecord, "key length is not a multiple of 4");
  TokenSequence out(key.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto b = [&](std::size_t j) { return static_cast<TokenId>(static_cast<unsigned char>(key[4 * i + j])); };
    out[i] = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  }
  return out;
}

std::vector<std::uint8_t> encode_record_value(const NodeRecord& r) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + r.next_tokens.size() * 3 + r.children_num_leaves.size() * 2 + r.subtree_blob.size());
  out.push_back(static_cast<std::uint8_t>(r.kind));
  codec::put_varint(out, r.batch);
  codec::put_varint(out, r.num_leaves);
  codec::put_varint(out, r.next_tokens.size());
  for (TokenId t : r.next_tokens) codec::put_varint(out, t);
  codec::put_varint(out, r.children_num_leaves.size());
  for (auto c : r.children_num_leaves) codec::put_varint(out, c);
  if (r.kind == RecordKind::BlobBearing) {
    codec::put_varint(out, r.subtree_blob.size());
    out.insert(out.end(), r.subtree_blob.begin(), r.subtree_blob.end());
  }
  return out;
}

NodeRecord decode_record(std::string_view key, std::span<const std::uint8_t> value) {
  NodeRecord r;
  r.prefix = decode_key(key);
  codec::Reader in(value);
  std::uint8_t kind = in.byte();
  if (kind > 2) throw Error(ErrorCode::CorruptRecord, "unknown record kind " + std::to_string(kind));
  r.kind = static_cast<RecordKind>(kind);
  std::uint64_t batch = in.varint();
  if (batch > UINT32_MAX) throw Error(ErrorCode::CorruptRecord, "batch id out of range");
  r.batch = static_cast<std::uint32_t>(batch);
  r.num_leaves = in.varint();
  std::uint64_t n = in.varint();
  if (n > in.remaining()) throw Error(ErrorCode::CorruptRecord, "token count exceeds record size");
  r.next_tokens.resize(n);
  for (auto& t : r.next_tokens) {
    std::uint64_t v = in.varint();
    if (v > UINT32_MAX) throw Error(ErrorCode::CorruptRecord, "token id out of range");
    t = static_cast<TokenId>(v);
  }
  std::uint64_t m = in.varint();
  if (m > in.remaining()) throw Error(ErrorCode::CorruptRecord, "child count exceeds record size");
  r.children_num_leaves.resize(m);
  for (auto& c : r.children_num_leaves) c = in.varint();
  if (r.kind == RecordKind::BlobBearing) {
    auto blob = in.take(in.varint());
    r.subtree_blob.assign(blob.begin(), blob.end());
  }
  if (!in.done()) throw Error(ErrorCode::CorruptRecord, "trailing bytes in record");

  if (r.kind == RecordKind::Compacted) {
    if (r.num_leaves != 1 || m != 0) throw Error(ErrorCode::CorruptRecord, "malformed compacted record");
  } else {
    if (m != n || n == 0) throw Error(ErrorCode::CorruptRecord, "next tokens and child counts disagree");
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && r.next_tokens[i] <= r.next_tokens[i - 1]) {
        throw Error(ErrorCode::CorruptRecord, "next tokens not strictly increasing");
      }
      if (r.children_num_leaves[i] == 0) throw Error(ErrorCode::CorruptRecord, "zero-leaf child");
      sum += r.children_num_leaves[i];
    }
    if (sum != r.num_leaves) throw Error(ErrorCode::CorruptRecord, "leaf counts do not sum");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Subtree blobs

namespace {

void encode_node(const TrieNode& node, std::vector<std::uint8_t>& out) {
  codec::put_varint(out, node.child_count());
  for (std::size_t i = 0; i < node.child_count(); ++i) {
    codec::put_varint(out, node.child_tokens()[i]);
    encode_node(node.child_at(i), out);
  }
}

void decode_node(codec::Reader& in, TrieNode& node, int depth) {
  if (depth > 4096) throw Error(ErrorCode::CorruptRecord, "subtree too deep");
  std::uint64_t n = in.varint();
  if (n > in.remaining()) throw Error(ErrorCode::CorruptRecord, "child count exceeds blob size");
  std::uint64_t last = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t t = in.varint();
    if (t > UINT32_MAX || (i > 0 && t <= last)) throw Error(ErrorCode::CorruptRecord, "bad token order in subtree");
    last = t;
    decode_node(in, node.append_child(static_cast<TokenId>(t)), depth + 1);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_subtree(const TrieNode& node) {
  std::vector<std::uint8_t> out;
  out.push_back(kSubtreeBlobVersion);
  encode_node(node, out);
  return out;
}

TrieNode load_subtree(std::span<const std::uint8_t> blob) {
  codec::Reader in(blob);
  std::uint8_t version = in.byte();
  if (version != kSubtreeBlobVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "subtree blob version " + std::to_string(version));
  }
  TrieNode root;
  decode_node(in, root, 0);
  if (!in.done()) throw Error(ErrorCode::CorruptRecord, "trailing bytes in subtree blob");
  root.recount();
  return root;
}

// ---------------------------------------------------------------------------
// Batch persistence

namespace {

void emit(const TrieNode& node, TokenSequence& prefix, const IndexConfig& cfg, std::uint32_t batch,
          RecordSink& sink, std::uint64_t& count) {
  if (node.num_leaves() == 0) return;
  if (!prefix.empty() && node.is_leaf()) return;

  NodeRecord r;
  r.batch = batch;
  r.num_leaves = node.num_leaves();
  if (cfg.compaction && node.num_leaves() == 1) {
    r.kind = RecordKind::Compacted;
    for (const TrieNode* n = &node; !n->is_leaf(); n = &n->child_at(0)) r.next_tokens.push_back(n->child_tokens()[0]);
  } else {
    r.kind = prefix.size() < cfg.cutoff_depth ? RecordKind::Standard : RecordKind::BlobBearing;
    r.next_tokens.assign(node.child_tokens().begin(), node.child_tokens().end());
    r.children_num_leaves.assign(node.child_leaves().begin(), node.child_leaves().end());
    if (r.kind == RecordKind::BlobBearing) r.subtree_blob = encode_subtree(node);
  }
  sink.put(encode_key(prefix), encode_record_value(r));
  ++count;
  if (r.kind != RecordKind::Standard) return;
  for (std::size_t i = 0; i < node.child_count(); ++i) {
    prefix.push_back(node.child_tokens()[i]);
    emit(node.child_at(i), prefix, cfg, batch, sink, count);
    prefix.pop_back();
  }
}

class VectorSink final : public RecordSink {
 public:
  std::vector<NodeRecord> records;
  void put(std::string key, std::vector<std::uint8_t> value) override {
    records.push_back(decode_record(key, value));
  }
};

}  // namespace

std::uint64_t persist_batch(const FactTree& tree, const IndexConfig& cfg, std::uint32_t batch, RecordSink& sink) {
  cfg.validate();
  TokenSequence prefix;
  std::uint64_t count = 0;
  emit(tree.root_node(), prefix, cfg, batch, sink, count);
  return count;
}

std::vector<NodeRecord> batch_records(const FactTree& tree, const IndexConfig& cfg, std::uint32_t batch) {
  VectorSink sink;
  persist_batch(tree, cfg, batch, sink);
  return std::move(sink.records);
}

// ---------------------------------------------------------------------------
// Memory backend

void MemoryStore::put(std::string key, std::vector<std::uint8_t> value) {
  entries_.emplace(std::move(key), std::move(value));
}

std::vector<RawEntry> MemoryStore::get(std::string_view key) const {
  std::vector<RawEntry> out;
  auto [lo, hi] = entries_.equal_range(key);
  for (auto it = lo; it != hi; ++it) out.push_back({it->first, it->second});
  return out;
}

void MemoryStore::scan(const std::function<void(const RawEntry&)>& visit) const {
  for (const auto& [k, v] : entries_) visit({k, v});
}

// ---------------------------------------------------------------------------
// File writer

namespace {

constexpr char kMagic[4] = {'F', 'T', 'R', 'X'};

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 4);
}

class RunSink final : public RecordSink {
 public:
  explicit RunSink(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::BackendWrite, "cannot create run file " + path.string());
  }
  void put(std::string key, std::vector<std::uint8_t> value) override {
    write_u32(out_, static_cast<std::uint32_t>(key.size()));
    out_.write(key.data(), static_cast<std::streamsize>(key.size()));
    write_u32(out_, static_cast<std::uint32_t>(value.size()));
    out_.write(reinterpret_cast<const char*>(value.data()), static_cast<std::streamsize>(value.size()));
  }
  void close() {
    out_.close();
    if (!out_) throw Error(ErrorCode::BackendWrite, "failed writing run file");
  }

 private:
  std::ofstream out_;
};

class RunReader {
 public:
  explicit RunReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorCode::BackendRead, "cannot reopen run file " + path.string());
    advance();
  }
  bool valid() const noexcept { return valid_; }
  const std::string& key() const noexcept { return key_; }
  const std::string& value() const noexcept { return value_; }
  void advance() {
    std::uint32_t klen = 0;
    if (!read_u32(klen)) {
      valid_ = false;
      return;
    }
    key_.resize(klen);
    in_.read(key_.data(), klen);
    std::uint32_t vlen = 0;
    if (!in_ || !read_u32(vlen)) throw Error(ErrorCode::BackendRead, "truncated run file");
    value_.resize(vlen);
    in_.read(value_.data(), vlen);
    if (!in_) throw Error(ErrorCode::BackendRead, "truncated run file");
    valid_ = true;
  }

 private:
  bool read_u32(std::uint32_t& v) {
    unsigned char b[4];
    if (!in_.read(reinterpret_cast<char*>(b), 4)) return false;
    v = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
  }

  std::ifstream in_;
  std::string key_, value_;
  bool valid_ = false;
};

}  // namespace

IndexWriter::IndexWriter(std::filesystem::path path, IndexConfig cfg) : path_(std::move(path)), cfg_(std::move(cfg)) {
  cfg_.validate();
}

IndexWriter::~IndexWriter() {
  std::error_code ec;
  for (const auto& run : runs_) std::filesystem::remove(run, ec);
}

void IndexWriter::add_batch(const FactTree& tree) {
  if (finalized_) throw Error(ErrorCode::BackendWrite, "index already finalized");
  auto batch = static_cast<std::uint32_t>(runs_.size());
  auto run_path = path_;
  run_path += ".run" + std::to_string(batch) + ".tmp";
  RunSink sink(run_path);
  runs_.push_back(run_path);
  persist_batch(tree, cfg_, batch, sink);
  sink.close();
  fact_count_ += tree.fact_count();
}

IndexMeta IndexWriter::finalize() {
  if (finalized_) throw Error(ErrorCode::BackendWrite, "index already finalized");
  finalized_ = true;
  IndexMeta meta;
  meta.format_version = kIndexFormatVersion;
  meta.tokenizer_fingerprint = cfg_.tokenizer_fingerprint;
  meta.cutoff_depth = cfg_.cutoff_depth;
  meta.batch_count = static_cast<std::uint32_t>(runs_.size());
  meta.fact_count = fact_count_;
  meta.compaction = cfg_.compaction;

  auto tmp = path_;
  tmp += ".tmp";
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::BackendWrite, "cannot create " + tmp.string());

  auto write_header = [&](std::uint64_t record_count, std::uint64_t table_offset) {
    std::vector<std::uint8_t> h(kMagic, kMagic + 4);
    codec::put_le<std::uint32_t>(h, meta.format_version);
    codec::put_le<std::uint16_t>(h, static_cast<std::uint16_t>(meta.tokenizer_fingerprint.size()));
    h.insert(h.end(), meta.tokenizer_fingerprint.begin(), meta.tokenizer_fingerprint.end());
    codec::put_le<std::uint32_t>(h, meta.cutoff_depth);
    codec::put_le<std::uint32_t>(h, meta.batch_count);
    codec::put_le<std::uint64_t>(h, meta.fact_count);
    codec::put_le<std::uint64_t>(h, record_count);
    codec::put_le<std::uint64_t>(h, table_offset);
    h.push_back(meta.compaction ? 1 : 0);
    out.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
  };
  if (meta.tokenizer_fingerprint.size() > UINT16_MAX) throw Error(ErrorCode::BackendWrite, "fingerprint too long");
  write_header(0, 0);

  std::vector<std::unique_ptr<RunReader>> readers;
  for (const auto& run : runs_) readers.push_back(std::make_unique<RunReader>(run));
  auto greater = [&](std::size_t a, std::size_t b) {
    int c = readers[a]->key().compare(readers[b]->key());
    return c != 0 ? c > 0 : a > b;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> heap(greater);
  for (std::size_t i = 0; i < readers.size(); ++i) {
    if (readers[i]->valid()) heap.push(i);
  }
  std::vector<std::uint64_t> offsets;
  while (!heap.empty()) {
    std::size_t i = heap.top();
    heap.pop();
    offsets.push_back(static_cast<std::uint64_t>(out.tellp()));
    const auto& k = readers[i]->key();
    const auto& v = readers[i]->value();
    write_u32(out, static_cast<std::uint32_t>(k.size()));
    out.write(k.data(), static_cast<std::streamsize>(k.size()));
    write_u32(out, static_cast<std::uint32_t>(v.size()));
    out.write(v.data(), static_cast<std::streamsize>(v.size()));
    readers[i]->advance();
    if (readers[i]->valid()) heap.push(i);
  }
  auto table_offset = static_cast<std::uint64_t>(out.tellp());
  std::vector<std::uint8_t> table;
  table.reserve(offsets.size() * 8);
  for (auto o : offsets) codec::put_le<std::uint64_t>(table, o);
  out.write(reinterpret_cast<const char*>(table.data()), static_cast<std::streamsize>(table.size()));
  out.seekp(0);
  write_header(offsets.size(), table_offset);
  out.close();
  if (!out) throw Error(ErrorCode::BackendWrite, "failed writing " + tmp.string());
  readers.clear();

  std::error_code ec;
  std::filesystem::rename(tmp, path_, ec);
  if (ec) throw Error(ErrorCode::BackendWrite, "cannot move index into place: " + ec.message());
  for (const auto& run : runs_) std::filesystem::remove(run, ec);
  runs_.clear();
  meta.record_count = offsets.size();
  return meta;
}

// ---------------------------------------------------------------------------
// File reader

IndexFile::IndexFile(const std::filesystem::path& path) {
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw Error(ErrorCode::BackendRead, "cannot open index " + path.string());
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw Error(ErrorCode::BackendRead, "cannot stat index " + path.string());
  }
  size_ = static_cast<std::uint64_t>(st.st_size);
  if (size_ < 4) {
    ::close(fd);
    throw Error(ErrorCode::CorruptRecord, path.string() + " is not a factrie index");
  }
  void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) throw Error(ErrorCode::BackendRead, "cannot map index " + path.string());
  data_ = static_cast<const std::uint8_t*>(p);

  try {
    codec::Reader in(std::span<const std::uint8_t>(data_, size_));
    auto magic = in.take(4);
    if (!std::equal(magic.begin(), magic.end(), kMagic)) {
      throw Error(ErrorCode::CorruptRecord, path.string() + " is not a factrie index");
    }
    meta_.format_version = in.le<std::uint32_t>();
    if (meta_.format_version != kIndexFormatVersion) {
      throw Error(ErrorCode::UnsupportedVersion, "index format version " + std::to_string(meta_.format_version));
    }
    auto fp = in.take(in.le<std::uint16_t>());
    meta_.tokenizer_fingerprint.assign(fp.begin(), fp.end());
    meta_.cutoff_depth = in.le<std::uint32_t>();
    meta_.batch_count = in.le<std::uint32_t>();
    meta_.fact_count = in.le<std::uint64_t>();
    meta_.record_count = in.le<std::uint64_t>();
    table_offset_ = in.le<std::uint64_t>();
    meta_.compaction = in.byte() != 0;
    if (table_offset_ > size_ || (size_ - table_offset_) / 8 != meta_.record_count ||
        (size_ - table_offset_) % 8 != 0) {
      throw Error(ErrorCode::CorruptRecord, "record table does not match file size");
    }
  } catch (...) {
    ::munmap(const_cast<std::uint8_t*>(data_), size_);
    throw;
  }
}

IndexFile::~IndexFile() {
  if (data_) ::munmap(const_cast<std::uint8_t*>(data_), size_);
}

RawEntry IndexFile::entry_at(std::uint64_t i) const {
  const std::uint8_t* slot = data_ + table_offset_ + 8 * i;
  std::uint64_t off = 0;
  for (int b = 0; b < 8; ++b) off |= static_cast<std::uint64_t>(slot[b]) << (8 * b);
  if (off >= table_offset_) throw Error(ErrorCode::CorruptRecord, "record offset out of range");
  codec::Reader in(std::span<const std::uint8_t>(data_ + off, table_offset_ - off));
  auto key = in.take(in.le<std::uint32_t>());
  auto value = in.take(in.le<std::uint32_t>());
  return {std::string_view(reinterpret_cast<const char*>(key.data()), key.size()), value};
}

std::vector<RawEntry> IndexFile::get(std::string_view key) const {
  std::uint64_t lo = 0, hi = meta_.record_count;
  while (lo < hi) {
    std::uint64_t mid = lo + (hi - lo) / 2;
    if (entry_at(mid).key < key) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  std::vector<RawEntry> out;
  for (std::uint64_t i = lo; i < meta_.record_count; ++i) {
    RawEntry e = entry_at(i);
    if (e.key != key) break;
    out.push_back(e);
  }
  return out;
}

void IndexFile::scan(const std::function<void(const RawEntry&)>& visit) const {
  for (std::uint64_t i = 0; i < meta_.record_count; ++i) visit(entry_at(i));
}

// ---------------------------------------------------------------------------
// Stats

std::uint64_t IndexStats::blob_percentile(double pct) const {
  if (blob_sizes.empty()) return 0;
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(blob_sizes.size())));
  rank = std::clamp<std::size_t>(rank, 1, blob_sizes.size());
  return blob_sizes[rank - 1];
}

IndexStats compute_stats(const RecordStore& store, const IndexMeta& meta, std::uint64_t total_bytes) {
  IndexStats s;
  s.meta = meta;
  s.total_bytes = total_bytes;
  std::string last_key;
  std::uint64_t run = 0;
  bool first = true;
  store.scan([&](const RawEntry& e) {
    ++s.record_count;
    if (!first && e.key == last_key) {
      ++run;
    } else {
      if (!first) ++s.duplicate_histogram[run];
      last_key.assign(e.key);
      run = 1;
      first = false;
    }
    NodeRecord r = decode_record(e.key, e.value);
    ++s.kinds[r.kind];
    if (r.kind == RecordKind::BlobBearing) s.blob_sizes.push_back(r.subtree_blob.size());
  });
  if (!first) ++s.duplicate_histogram[run];
  std::sort(s.blob_sizes.begin(), s.blob_sizes.end());
  return s;
}

// ---------------------------------------------------------------------------
// Merge-on-read

namespace {

/// One batch's share of a resolved node.
struct Contribution {
  enum class Kind { Standard, Blob, Compacted, Subtree, Leaf };
  Kind kind = Kind::Leaf;
  std::uint32_t batch = 0;
  std::shared_ptr<const NodeRecord> record;
  std::size_t offset = 0;
  std::shared_ptr<const TrieNode> subtree_owner;
  const TrieNode* subtree = nullptr;
};

class DiskNode final : public SourceNode {
 public:
  TokenSequence prefix;
  std::vector<Contribution> contribs;

  void finish() {
    std::vector<std::pair<TokenId, std::uint64_t>> pairs;
    std::uint64_t total = 0;
    bool ends_here = false;
    for (const auto& c : contribs) {
      switch (c.kind) {
        case Contribution::Kind::Standard:
        case Contribution::Kind::Blob:
          total += c.record->num_leaves;
          for (std::size_t i = 0; i < c.record->next_tokens.size(); ++i) {
            pairs.emplace_back(c.record->next_tokens[i], c.record->children_num_leaves[i]);
          }
          break;
        case Contribution::Kind::Compacted:
          total += 1;
          if (c.offset < c.record->next_tokens.size()) {
            pairs.emplace_back(c.record->next_tokens[c.offset], 1);
          } else {
            ends_here = true;
          }
          break;
        case Contribution::Kind::Subtree:
          total += c.subtree->num_leaves();
          for (std::size_t i = 0; i < c.subtree->child_count(); ++i) {
            pairs.emplace_back(c.subtree->child_tokens()[i], c.subtree->child_leaves()[i]);
          }
          if (c.subtree->is_leaf()) ends_here = true;
          break;
        case Contribution::Kind::Leaf:
          total += 1;
          ends_here = true;
          break;
      }
    }
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [t, n] : pairs) {
      if (!tokens.empty() && tokens.back() == t) {
        counts.back() += n;
      } else {
        tokens.push_back(t);
        counts.push_back(n);
      }
    }
    if (ends_here && !tokens.empty()) {
      throw Error(ErrorCode::CorruptRecord, "prefix " + format_tokens(prefix) + " is both a fact and a fact prefix");
    }
    num_leaves_ = total;
    tokens_ = tokens;
    leaves_ = counts;
  }

  std::size_t approx_bytes() const {
    return sizeof(*this) + prefix.size() * 4 + tokens.size() * 12 + contribs.size() * sizeof(Contribution);
  }

 private:
  std::vector<TokenId> tokens;
  std::vector<std::uint64_t> counts;
};

bool lists(const NodeRecord& r, TokenId t, std::uint64_t& count) {
  auto it = std::lower_bound(r.next_tokens.begin(), r.next_tokens.end(), t);
  if (it == r.next_tokens.end() || *it != t) return false;
  count = r.children_num_leaves[static_cast<std::size_t>(it - r.next_tokens.begin())];
  return true;
}

Contribution contribution_for(std::shared_ptr<const NodeRecord> rec) {
  Contribution c;
  c.batch = rec->batch;
  switch (rec->kind) {
    case RecordKind::Standard: c.kind = Contribution::Kind::Standard; break;
    case RecordKind::BlobBearing: c.kind = Contribution::Kind::Blob; break;
    case RecordKind::Compacted: c.kind = Contribution::Kind::Compacted; break;
  }
  c.record = std::move(rec);
  return c;
}

}  // namespace

struct IndexReader::Caches {
  explicit Caches(std::size_t bytes) : nodes(bytes), blobs(bytes) {}
  detail::SingleFlightLru<std::shared_ptr<const DiskNode>> nodes;
  detail::SingleFlightLru<std::shared_ptr<const TrieNode>> blobs;
};

IndexReader::IndexReader(std::shared_ptr<const RecordStore> store, IndexMeta meta, std::size_t cache_bytes)
    : store_(std::move(store)), meta_(std::move(meta)), caches_(std::make_unique<Caches>(cache_bytes)) {}

IndexReader::~IndexReader() = default;

std::shared_ptr<IndexReader> IndexReader::open(const std::filesystem::path& path, std::size_t cache_bytes) {
  auto file = std::make_shared<IndexFile>(path);
  IndexMeta meta = file->meta();
  return std::make_shared<IndexReader>(std::move(file), std::move(meta), cache_bytes);
}

std::size_t IndexReader::default_cache_bytes() {
  if (const char* env = std::getenv("FACTRIE_CACHE_BYTES")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && end != env) return static_cast<std::size_t>(v);
  }
  return std::size_t{256} << 20;
}

std::vector<NodeRecord> IndexReader::records_at(TokenSpan prefix) const {
  std::string key = encode_key(prefix);
  std::vector<NodeRecord> out;
  for (const auto& e : store_->get(key)) out.push_back(decode_record(e.key, e.value));
  return out;
}

NodeHandle IndexReader::root() const {
  return caches_->nodes.get_or_load(
      std::string(),
      [&] {
        auto node = std::make_shared<DiskNode>();
        for (auto& r : records_at({})) node->contribs.push_back(contribution_for(std::make_shared<NodeRecord>(std::move(r))));
        node->finish();
        return std::shared_ptr<const DiskNode>(node);
      },
      [](const auto& n) { return n->approx_bytes(); });
}

NodeHandle IndexReader::child(const NodeHandle& parent_handle, TokenId token) const {
  const auto& parent = static_cast<const DiskNode&>(*parent_handle);
  if (!parent.find(token)) return nullptr;
  TokenSequence prefix = parent.prefix;
  prefix.push_back(token);
  std::string key = encode_key(prefix);
  return caches_->nodes.get_or_load(
      key,
      [&] {
        auto node = std::make_shared<DiskNode>();
        node->prefix = prefix;
        std::vector<std::pair<std::uint32_t, std::uint64_t>> listing;  // batch, listed leaves
        for (const auto& c : parent.contribs) {
          std::uint64_t listed = 0;
          switch (c.kind) {
            case Contribution::Kind::Standard:
              if (lists(*c.record, token, listed)) listing.emplace_back(c.batch, listed);
              break;
            case Contribution::Kind::Blob:
              if (lists(*c.record, token, listed)) {
                auto owner = caches_->blobs.get_or_load(
                    encode_key(parent.prefix) + '#' + std::to_string(c.batch),
                    [&] { return std::shared_ptr<const TrieNode>(std::make_shared<TrieNode>(load_subtree(c.record->subtree_blob))); },
                    [&](const auto&) { return c.record->subtree_blob.size() * 8; });
                const TrieNode* next = owner->child(token);
                if (!next || next->num_leaves() != listed) {
                  throw Error(ErrorCode::CorruptRecord, "subtree blob disagrees with its record");
                }
                Contribution sub;
                sub.kind = Contribution::Kind::Subtree;
                sub.batch = c.batch;
                sub.subtree_owner = owner;
                sub.subtree = next;
                node->contribs.push_back(std::move(sub));
              }
              break;
            case Contribution::Kind::Compacted:
              if (c.offset < c.record->next_tokens.size() && c.record->next_tokens[c.offset] == token) {
                Contribution next = c;
                ++next.offset;
                node->contribs.push_back(std::move(next));
              }
              break;
            case Contribution::Kind::Subtree:
              if (const TrieNode* next = c.subtree->child(token)) {
                Contribution sub = c;
                sub.subtree = next;
                node->contribs.push_back(std::move(sub));
              }
              break;
            case Contribution::Kind::Leaf:
              break;
          }
        }
        if (!listing.empty()) {
          std::vector<std::shared_ptr<const NodeRecord>> found;
          for (auto& r : records_at(prefix)) found.push_back(std::make_shared<NodeRecord>(std::move(r)));
          for (const auto& [batch, listed] : listing) {
            auto it = std::find_if(found.begin(), found.end(), [b = batch](const auto& r) { return r->batch == b; });
            if (it == found.end()) {
              if (listed != 1) {
                throw Error(ErrorCode::CorruptRecord, "missing record for " + format_tokens(prefix) + " in batch " +
                                                          std::to_string(batch));
              }
              Contribution leaf;
              leaf.kind = Contribution::Kind::Leaf;
              leaf.batch = batch;
              node->contribs.push_back(std::move(leaf));
              continue;
            }
            if ((*it)->num_leaves != listed) {
              throw Error(ErrorCode::CorruptRecord, "leaf count mismatch at " + format_tokens(prefix));
            }
            node->contribs.push_back(contribution_for(*it));
            found.erase(it);
          }
          if (!found.empty()) {
            throw Error(ErrorCode::CorruptRecord, "orphan record at " + format_tokens(prefix));
          }
        }
        if (node->contribs.empty()) throw Error(ErrorCode::CorruptRecord, "no source for " + format_tokens(prefix));
        node->finish();
        if (node->num_leaves() != parent.child_leaves()[*parent.find(token)]) {
          throw Error(ErrorCode::CorruptRecord, "merged leaf count mismatch at " + format_tokens(prefix));
        }
        return std::shared_ptr<const DiskNode>(node);
      },
      [](const auto& n) { return n->approx_bytes(); });
}

namespace {

void copy_subtree(const IndexReader& reader, const NodeHandle& node, TrieNode& out) {
  for (TokenId t : node->child_tokens()) copy_subtree(reader, reader.child(node, t), out.append_child(t));
}

}  // namespace

NodeRecord IndexReader::lookup(TokenSpan prefix) const {
  NodeHandle node;
  try {
    node = resolve(prefix);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnknownPrefix) throw;
    throw Error(ErrorCode::NotFound, "no record for prefix " + format_tokens(prefix));
  }
  if (node->num_leaves() == 0) throw Error(ErrorCode::NotFound, "index is empty");
  NodeRecord r;
  r.prefix.assign(prefix.begin(), prefix.end());
  r.num_leaves = node->num_leaves();
  if (r.num_leaves == 1) {
    r.kind = RecordKind::Compacted;
    for (NodeHandle n = node; !n->is_leaf();) {
      TokenId t = n->child_tokens()[0];
      r.next_tokens.push_back(t);
      n = child(n, t);
    }
    return r;
  }
  r.kind = prefix.size() == meta_.cutoff_depth ? RecordKind::BlobBearing : RecordKind::Standard;
  r.next_tokens.assign(node->child_tokens().begin(), node->child_tokens().end());
  r.children_num_leaves.assign(node->child_leaves().begin(), node->child_leaves().end());
  if (r.kind == RecordKind::BlobBearing) {
    TrieNode merged;
    copy_subtree(*this, node, merged);
    merged.recount();
    r.subtree_blob = encode_subtree(merged);
  }
  return r;
}

std::vector<TokenSequence> IndexReader::facts() const {
  std::vector<TokenSequence> out;
  NodeHandle r = root();
  if (r->num_leaves() == 0) return out;
  TokenSequence path;
  auto walk = [&](auto&& self, const NodeHandle& n) -> void {
    if (n->is_leaf()) {
      out.push_back(path);
      return;
    }
    for (TokenId t : n->child_tokens()) {
      path.push_back(t);
      self(self, child(n, t));
      path.pop_back();
    }
  };
  walk(walk, r);
  return out;
}

}  // namespace factrie
