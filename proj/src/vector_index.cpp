#include "amr/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amr/binary_io.hpp"
#include "amr/error.hpp"

namespace amr {

namespace {

constexpr std::string_view kIndexMagic = "AMRIDX1";
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

const IndexEntry* VectorIndex::find(std::uint64_t id) const noexcept {
  return id < entries_.size() ? &entries_[id] : nullptr;
}

std::uint64_t VectorIndex::add(DocChunk chunk, const EmbeddingVector& vector) {
  if (chunk.text.empty()) throw Error(ErrorCode::EmptyText, "chunk '" + chunk.label + "' has no text");
  for (const auto& e : entries_) {
    if (e.chunk.label == chunk.label) throw Error(ErrorCode::DuplicateLabel, "label '" + chunk.label + "' already indexed");
  }
  double sq = 0.0;
  for (double x : vector) sq += x * x;
  if (!(std::abs(std::sqrt(sq) - 1.0) <= 1e-9)) {
    throw Error(ErrorCode::EmbedderMismatch, "vector for '" + chunk.label + "' is not unit norm");
  }
  chunk.id = entries_.size();
  entries_.push_back({std::move(chunk), vector});
  return entries_.back().chunk.id;
}

std::vector<RetrievalHit> VectorIndex::query(const EmbeddingVector& q, std::string_view query_tag,
                                             std::size_t k) const {
  if (query_tag != tag_) {
    throw Error(ErrorCode::EmbedderMismatch,
                "index built with '" + tag_ + "', query embedded with '" + std::string(query_tag) + "'");
  }
  if (entries_.empty()) throw Error(ErrorCode::EmptyIndex, "index has no entries");
  const auto scores = kernels::score_all_parallel(entries_, q);
  std::vector<RetrievalHit> hits;
  for (auto i : kernels::top_k(scores, k)) hits.push_back({entries_[i].chunk.id, entries_[i].chunk.label, scores[i]});
  return hits;
}

bool VectorIndex::operator==(const VectorIndex& o) const {
  if (tag_ != o.tag_ || entries_.size() != o.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!(entries_[i].chunk == o.entries_[i].chunk)) return false;
    // bitwise comparison so that a round trip is checked exactly
    for (std::size_t d = 0; d < kEmbeddingDim; ++d)
      if (std::bit_cast<std::uint64_t>(entries_[i].vector[d]) != std::bit_cast<std::uint64_t>(o.entries_[i].vector[d]))
        return false;
  }
  return true;
}

std::uint64_t index_add(VectorIndex& idx, DocChunk chunk, const Embedder& embedder) {
  if (embedder.tag() != idx.embedder_tag()) {
    throw Error(ErrorCode::EmbedderMismatch, "embedder '" + embedder.tag() + "' does not match index");
  }
  const auto v = embedder.embed(chunk.text);
  return idx.add(std::move(chunk), v);
}

std::vector<RetrievalHit> query(const VectorIndex& idx, const Embedder& embedder,
                                const std::string& question, std::size_t k) {
  if (idx.empty()) throw Error(ErrorCode::EmptyIndex, "index has no entries");
  return idx.query(embedder.embed(question), embedder.tag(), k);
}

VectorIndex build_index(const std::vector<DocChunk>& chunks, const Embedder& embedder) {
  VectorIndex idx(embedder.tag());
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  const auto vectors = texts.empty() ? std::vector<EmbeddingVector>{} : embedder.embed_batch(texts);
  for (std::size_t i = 0; i < chunks.size(); ++i) idx.add(chunks[i], vectors[i]);
  return idx;
}

namespace kernels {

std::vector<double> score_all_serial(const std::vector<IndexEntry>& entries, const EmbeddingVector& q) {
  std::vector<double> scores(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) scores[i] = cosine(entries[i].vector, q);
  return scores;
}

std::vector<double> score_all_parallel(const std::vector<IndexEntry>& entries, const EmbeddingVector& q) {
  std::vector<double> scores(entries.size());
  const auto n = static_cast<std::ptrdiff_t>(entries.size());
#pragma omp parallel for schedule(static) if (n >= 2048)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    scores[static_cast<std::size_t>(i)] = cosine(entries[static_cast<std::size_t>(i)].vector, q);
  }
  return scores;
}

std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  order.resize(take);
  return order;
}

}  // namespace kernels

std::string serialize_index(const VectorIndex& idx) {
  ByteWriter records;
  for (const auto& e : idx.entries()) {
    records.u64(e.chunk.id);
    records.str(e.chunk.label);
    records.str(e.chunk.source_title);
    records.str(e.chunk.text);
    for (double x : e.vector) records.f64(x);
  }
  ByteWriter w;
  w.raw(kIndexMagic);
  w.u32(kIndexVersion);
  w.str(idx.embedder_tag());
  w.u32(static_cast<std::uint32_t>(kEmbeddingDim));
  w.u64(idx.size());
  w.u64(fnv1a64(records.bytes()));
  w.raw(records.bytes());
  return std::move(w).take();
}

VectorIndex deserialize_index(std::string_view bytes) {
  ByteReader r(bytes, ErrorCode::CorruptIndex);
  if (r.raw(kIndexMagic.size()) != kIndexMagic) r.fail("bad magic");
  if (const auto v = r.u32(); v != kIndexVersion) r.fail("unsupported index version " + std::to_string(v));
  VectorIndex idx(r.str());
  if (r.u32() != kEmbeddingDim) r.fail("unexpected embedding dimension");
  const auto count = r.u64();
  const auto checksum = r.u64();
  if (fnv1a64(bytes.substr(r.position())) != checksum) r.fail("checksum mismatch");
  for (std::uint64_t i = 0; i < count; ++i) {
    DocChunk c;
    c.id = r.u64();
    c.label = r.str();
    c.source_title = r.str();
    c.text = r.str();
    EmbeddingVector v{};
    for (auto& x : v) x = r.f64();
    if (c.id != i) r.fail("record ids are not sequential");
    try {
      idx.add(std::move(c), v);
    } catch (const Error& e) {
      r.fail(std::string("invalid record: ") + e.what());
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes after records");
  return idx;
}

void save_index(const VectorIndex& idx, const std::string& path) { write_file(path, serialize_index(idx)); }

VectorIndex load_index(const std::string& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::ArtifactMissing, "no index at '" + path + "'; run `amr index` first");
  }
  return deserialize_index(bytes);
}

SharedIndex::SharedIndex(VectorIndex initial)
    : current_(std::make_shared<const VectorIndex>(std::move(initial))) {}

std::shared_ptr<const VectorIndex> SharedIndex::snapshot() const {
  std::lock_guard lock(publish_mutex_);
  return current_;
}

std::uint64_t SharedIndex::add(DocChunk chunk, const Embedder& embedder) {
  std::lock_guard writer(write_mutex_);
  auto next = std::make_shared<VectorIndex>(*snapshot());
  const auto id = index_add(*next, std::move(chunk), embedder);
  std::lock_guard lock(publish_mutex_);
  current_ = std::move(next);
  return id;
}

}  // namespace amr
