#pragma once

// Exact cosine top-k retrieval over a flat list of embedded chunks.
//
// Index file layout (little-endian):
//   magic "AMRIDX1" (7 bytes)
//   u32 version = 1
//   str embedder tag | u32 dimension | u64 entry count | u64 checksum
//   records: u64 id, str label, str source_title, str text, 384 x f64
// str = u32 length + UTF-8 bytes. The checksum is FNV-1a over the record bytes.

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "amr/rag.hpp"

namespace amr {

struct IndexEntry {
  DocChunk chunk;
  EmbeddingVector vector;
};

struct RetrievalHit {
  std::uint64_t id = 0;
  std::string label;
  double score = 0.0;

  bool operator==(const RetrievalHit&) const = default;
};

class VectorIndex {
 public:
  explicit VectorIndex(std::string embedder_tag) : tag_(std::move(embedder_tag)) {}

  const std::string& embedder_tag() const noexcept { return tag_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  const IndexEntry* find(std::uint64_t id) const noexcept;

  /// Appends a chunk with a precomputed vector; the id is assigned sequentially.
  /// Throws DuplicateLabel, EmptyText (empty body) or EmbedderMismatch (vector not unit norm).
  std::uint64_t add(DocChunk chunk, const EmbeddingVector& vector);

  /// Top-k by cosine, score descending then id ascending. Throws EmptyIndex and
  /// EmbedderMismatch when `query_tag` differs from the index tag.
  std::vector<RetrievalHit> query(const EmbeddingVector& q, std::string_view query_tag,
                                  std::size_t k = 3) const;

  bool operator==(const VectorIndex& o) const;

 private:
  std::string tag_;
  std::vector<IndexEntry> entries_;
};

/// Embeds the chunk body and appends it.
std::uint64_t index_add(VectorIndex& idx, DocChunk chunk, const Embedder& embedder);

/// Embeds the question and returns the top-k hits.
std::vector<RetrievalHit> query(const VectorIndex& idx, const Embedder& embedder,
                                const std::string& question, std::size_t k = 3);

/// Builds an index from chunks, embedding in one batch.
VectorIndex build_index(const std::vector<DocChunk>& chunks, const Embedder& embedder);

std::string serialize_index(const VectorIndex& idx);
/// Throws CorruptIndex on bad magic, version, checksum or truncation.
VectorIndex deserialize_index(std::string_view bytes);
void save_index(const VectorIndex& idx, const std::string& path);
VectorIndex load_index(const std::string& path);

namespace kernels {

/// Cosine of `q` with every entry, serial reference.
std::vector<double> score_all_serial(const std::vector<IndexEntry>& entries, const EmbeddingVector& q);
/// Same scores computed with an OpenMP parallel loop; bit-identical to the serial path.
std::vector<double> score_all_parallel(const std::vector<IndexEntry>& entries, const EmbeddingVector& q);
/// Positions of the k best scores, score descending then position ascending.
std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k);

}  // namespace kernels

/// Many concurrent readers or one writer: readers take an immutable snapshot,
/// writers copy, modify and publish under a lock.
class SharedIndex {
 public:
  explicit SharedIndex(VectorIndex initial);

  std::shared_ptr<const VectorIndex> snapshot() const;
  std::uint64_t add(DocChunk chunk, const Embedder& embedder);

 private:
  mutable std::mutex publish_mutex_;
  std::mutex write_mutex_;
  std::shared_ptr<const VectorIndex> current_;
};

}  // namespace amr
