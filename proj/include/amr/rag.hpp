#pragma once

// Knowledge-base plumbing: chunking, embedders, and the on-disk corpus format.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace amr {

inline constexpr std::size_t kEmbeddingDim = 384;
using EmbeddingVector = std::array<double, kEmbeddingDim>;

struct DocChunk {
  std::uint64_t id = 0;
  std::string label;  // unique within an index, e.g. "GAP-AMR-1"
  std::string source_title;
  std::string text;

  bool operator==(const DocChunk&) const = default;
};

/// Splits `text` into chunks of at most `max_chars` code points. A chunk ends at
/// the last sentence boundary inside the window when one exists; consecutive
/// chunks share `overlap` code points, so dropping each chunk's leading
/// overlap and concatenating reproduces the input. Throws EmptyDocument.
std::vector<std::string> chunk_document(std::string_view text, std::size_t max_chars = 800,
                                        std::size_t overlap = 100);

/// Maps texts to unit-norm 384-dimensional vectors.
class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Identity recorded in an index; queries must come from the same embedder.
  virtual std::string tag() const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const = 0;

  EmbeddingVector embed(const std::string& text) const;
};

/// Signed feature hashing of lowercased word tokens (FNV-1a bucket and sign
/// hashes), common English function words dropped, then L2 normalization.
class HashingEmbedder final : public Embedder {
 public:
  static constexpr std::string_view kTag = "hash384-fnv1a-v1";

  std::string tag() const override { return std::string(kTag); }
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const override;

  /// Lowercased word tokens of `text`, stop words removed unless that leaves nothing.
  static std::vector<std::string> tokenize(std::string_view text);
};

/// External embedder reached over HTTP: POST {"texts": [...]} to the
/// configured URL, expecting {"vectors": [[...384 reals...], ...]}.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(std::string url, double timeout_s = 30.0);

  std::string tag() const override { return "http:" + url_; }
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const override;

 private:
  std::string url_;
  double timeout_s_;
};

/// Cosine of two unit vectors (plain dot product, index order).
double cosine(const EmbeddingVector& a, const EmbeddingVector& b) noexcept;

/// Scales to unit length; throws EmptyText for the zero vector.
void normalize(EmbeddingVector& v);

struct CorpusDocument {
  std::string label;
  std::string source_title;
  std::string text;
};

/// Reads `manifest.csv` (header `label,source_title,filename`) and the text
/// files it names, relative to `dir`. Throws BadCorpus.
std::vector<CorpusDocument> load_corpus(const std::string& dir);

/// Chunks every document; chunk k (1-based) of document L is labeled "L-k".
std::vector<DocChunk> chunk_corpus(const std::vector<CorpusDocument>& docs, std::size_t max_chars = 800,
                                   std::size_t overlap = 100);

}  // namespace amr
