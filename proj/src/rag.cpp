#include "amr/rag.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "amr/binary_io.hpp"
#include "amr/csv.hpp"
#include "amr/error.hpp"
#include "amr/http_util.hpp"

namespace amr {

std::vector<std::string> chunk_document(std::string_view text, std::size_t max_chars,
                                        std::size_t overlap) {
  if (max_chars <= overlap) throw Error(ErrorCode::InvalidSpec, "max_chars must exceed overlap");
  if (text.empty()) throw Error(ErrorCode::EmptyDocument, "cannot chunk an empty document");

  // Byte offset of every code point, plus the end.
  std::vector<std::size_t> cp;
  for (std::size_t i = 0; i < text.size(); ++i)
    if ((static_cast<unsigned char>(text[i]) & 0xC0U) != 0x80U) cp.push_back(i);
  const std::size_t n = cp.size();
  cp.push_back(text.size());

  auto char_at = [&](std::size_t p) { return text[cp[p]]; };
  auto is_space = [](char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; };
  auto boundary_at = [&](std::size_t p) {
    const char prev = char_at(p - 1);
    return (prev == '.' || prev == '!' || prev == '?') && (p == n || is_space(char_at(p)));
  };

  std::vector<std::string> chunks;
  std::size_t start = 0;
  while (true) {
    if (n - start <= max_chars) {
      chunks.emplace_back(text.substr(cp[start], cp[n] - cp[start]));
      break;
    }
    std::size_t end = start + max_chars;
    for (std::size_t p = start + max_chars; p > start + overlap; --p) {
      if (boundary_at(p)) {
        end = p;
        break;
      }
    }
    chunks.emplace_back(text.substr(cp[start], cp[end] - cp[start]));
    start = end - overlap;
  }
  return chunks;
}

EmbeddingVector Embedder::embed(const std::string& text) const {
  auto v = embed_batch({text});
  if (v.size() != 1) throw Error(ErrorCode::EmbedderFailure, "embedder returned the wrong number of vectors");
  return v.front();
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) s += a[i] * b[i];
  return s;
}

void normalize(EmbeddingVector& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) throw Error(ErrorCode::EmptyText, "vector has no magnitude");
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

namespace {

const std::unordered_set<std::string_view>& stop_words() {
  static const std::unordered_set<std::string_view> words = {
      "a",    "an",   "and",  "are",  "as",   "at",    "be",    "by",    "can",  "do",
      "does", "for",  "from", "has",  "have", "how",   "in",    "into",  "is",   "it",
      "its",  "of",   "on",   "or",   "our",  "that",  "the",   "their", "them", "these",
      "this", "those", "to",  "was",  "were", "what",  "when",  "where", "which", "while",
      "who",  "why",  "will", "with", "would", "should", "could", "there", "than", "been"};
  return words;
}

constexpr std::uint64_t kSignBasis = 0x84222325cbf29ce4ULL;

}  // namespace

std::vector<std::string> HashingEmbedder::tokenize(std::string_view text) {
  std::vector<std::string> all;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) all.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();

  std::vector<std::string> kept;
  for (const auto& t : all)
    if (!stop_words().contains(t)) kept.push_back(t);
  return kept.empty() ? all : kept;
}

std::vector<EmbeddingVector> HashingEmbedder::embed_batch(const std::vector<std::string>& texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw Error(ErrorCode::EmptyText, "text has no word tokens");
    EmbeddingVector v{};
    for (const auto& t : tokens) {
      const std::size_t bucket = fnv1a64(t) % kEmbeddingDim;
      const double sign = (fnv1a64(t, kSignBasis) >> 63) != 0 ? -1.0 : 1.0;
      v[bucket] += sign;
    }
    normalize(v);
    out.push_back(v);
  }
  return out;
}

HttpEmbedder::HttpEmbedder(std::string url, double timeout_s) : url_(std::move(url)), timeout_s_(timeout_s) {}

std::vector<EmbeddingVector> HttpEmbedder::embed_batch(const std::vector<std::string>& texts) const {
  const auto u = parse_url(url_);
  httplib::Client cli(u.origin);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);

  const nlohmann::json body = {{"texts", texts}};
  auto res = cli.Post(u.path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::EmbedderFailure, "embedder request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::EmbedderFailure, "embedder returned HTTP " + std::to_string(res->status));
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    const auto& vecs = j.at("vectors");
    if (!vecs.is_array() || vecs.size() != texts.size()) {
      throw Error(ErrorCode::EmbedderFailure, "embedder returned the wrong number of vectors");
    }
    std::vector<EmbeddingVector> out;
    for (const auto& v : vecs) {
      if (!v.is_array() || v.size() != kEmbeddingDim) {
        throw Error(ErrorCode::EmbedderFailure, "embedder vectors must have 384 components");
      }
      EmbeddingVector e{};
      for (std::size_t i = 0; i < kEmbeddingDim; ++i) e[i] = v[i].get<double>();
      try {
        normalize(e);
      } catch (const Error&) {
        throw Error(ErrorCode::EmbedderFailure, "embedder returned a zero or non-finite vector");
      }
      out.push_back(e);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::EmbedderFailure, std::string("malformed embedder response: ") + e.what());
  }
}

std::vector<CorpusDocument> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  const auto manifest_path = base / "manifest.csv";
  std::string manifest;
  try {
    manifest = read_file(manifest_path.string());
  } catch (const Error&) {
    throw Error(ErrorCode::BadCorpus, "missing corpus manifest " + manifest_path.string());
  }

  std::vector<CorpusDocument> docs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < manifest.size()) {
    auto nl = manifest.find('\n', pos);
    std::string_view line(manifest.data() + pos, (nl == std::string::npos ? manifest.size() : nl) - pos);
    pos = nl == std::string::npos ? manifest.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != "label,source_title,filename") {
        throw Error(ErrorCode::BadCorpus, "manifest header must be 'label,source_title,filename'");
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    try {
      f = csv::split_line(line, line_no);
    } catch (const Error& e) {
      throw Error(ErrorCode::BadCorpus, std::string("manifest: ") + e.what());
    }
    if (f.size() != 3 || f[0].empty() || f[2].empty()) {
      throw Error(ErrorCode::BadCorpus, "manifest line " + std::to_string(line_no) + " needs 3 fields");
    }
    CorpusDocument d{f[0], f[1], {}};
    try {
      d.text = read_file((base / f[2]).string());
    } catch (const Error&) {
      throw Error(ErrorCode::BadCorpus, "cannot read corpus document " + f[2]);
    }
    while (!d.text.empty() && (d.text.back() == '\n' || d.text.back() == ' ')) d.text.pop_back();
    docs.push_back(std::move(d));
  }
  if (docs.empty()) throw Error(ErrorCode::BadCorpus, "manifest lists no documents");
  return docs;
}

std::vector<DocChunk> chunk_corpus(const std::vector<CorpusDocument>& docs, std::size_t max_chars,
                                   std::size_t overlap) {
  std::vector<DocChunk> out;
  for (const auto& d : docs) {
    const auto pieces = chunk_document(d.text, max_chars, overlap);
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      DocChunk c;
      c.label = d.label + "-" + std::to_string(k + 1);
      c.source_title = d.source_title;
      c.text = pieces[k];
      out.push_back(std::move(c));
    }
  }
  return out;
}

ParsedUrl parse_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  ParsedUrl u;
  u.origin = url.substr(0, slash);
  u.path = slash == std::string::npos ? "/" : url.substr(slash);
  return u;
}

}  // namespace amr
