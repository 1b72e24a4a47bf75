#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "amr/binary_io.hpp"
#include "amr/pipeline.hpp"
#include "amr/rag.hpp"
#include "amr/vector_index.hpp"
#include "test_util.hpp"

using namespace amr;
using amr::test::TempDir;
using amr::test::throws_code;

namespace {

// Code points of a UTF-8 string, each kept as its byte sequence.
std::vector<std::string> code_points(std::string_view s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0U) == 0x80U) {
      out.back().push_back(s[i]);
    } else {
      out.emplace_back(1, s[i]);
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& cps, std::size_t from, std::size_t to) {
  std::string s;
  for (std::size_t i = from; i < to; ++i) s += cps[i];
  return s;
}

bool sentence_end(const std::vector<std::string>& cps, std::size_t p) {
  const auto& prev = cps[p - 1];
  const bool punct = prev == "." || prev == "!" || prev == "?";
  const bool space_after = p == cps.size() || cps[p] == " " || cps[p] == "\n" || cps[p] == "\t" || cps[p] == "\r";
  return punct && space_after;
}

// Checks chunker output against the rules it promises: size bound, overlap,
// lossless reconstruction and latest-boundary cut points.
void check_chunking(const std::string& text, std::size_t max, std::size_t overlap) {
  const auto chunks = chunk_document(text, max, overlap);
  const auto cps = code_points(text);
  REQUIRE_FALSE(chunks.empty());

  std::string rebuilt;
  std::size_t start = 0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto c = code_points(chunks[i]);
    CHECK(c.size() <= max);
    CHECK(chunks[i] == join(cps, start, start + c.size()));
    rebuilt += i == 0 ? chunks[i] : join(c, overlap, c.size());

    const std::size_t end = start + c.size();
    if (i + 1 < chunks.size()) {
      CHECK(c.size() > overlap);
      bool any_boundary = false;
      std::size_t latest = 0;
      for (std::size_t p = start + overlap + 1; p <= start + max; ++p)
        if (sentence_end(cps, p)) {
          any_boundary = true;
          latest = p;
        }
      if (any_boundary) {
        CHECK(end == latest);
      } else {
        CHECK(c.size() == max);
      }
      start = end - overlap;
    } else {
      CHECK(end == cps.size());
    }
  }
  CHECK(rebuilt == text);
}

std::string random_text(std::mt19937_64& rng, std::size_t words) {
  static const char* vocab[] = {"resistance", "é", "naïve", "AMR", "trend", "data", "Ωmega", "x", "surveillance", "rate"};
  static const char* punct[] = {" ", " ", " ", ". ", "! ", "? ", ".", ", ", "\n"};
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    s += vocab[rng() % 10];
    s += punct[rng() % 9];
  }
  return s;
}

EmbeddingVector random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  EmbeddingVector v{};
  for (auto& x : v) x = z(rng);
  normalize(v);
  return v;
}

VectorIndex random_index(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VectorIndex idx("test-tag");
  for (std::size_t i = 0; i < n; ++i) idx.add({0, "C-" + std::to_string(i), "T", "chunk " + std::to_string(i)}, random_unit(rng));
  return idx;
}

// Stub HTTP server on an ephemeral port, torn down on destruction.
struct StubServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  template <typename Setup>
  explicit StubServer(Setup setup) {
    setup(server);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubServer() {
    server.stop();
    thread.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

}  // namespace

TEST_CASE("chunker on small hand-worked inputs") {
  CHECK(chunk_document("One. Two. Three.", 10, 2) == std::vector<std::string>{"One. Two.", "o. Three."});
  CHECK(chunk_document("Short text.", 800, 100) == std::vector<std::string>{"Short text."});
  // No boundary in the window: hard cut at max_chars.
  CHECK(chunk_document("abcdefghij", 4, 1) == std::vector<std::string>{"abcd", "defg", "ghij"});
  // Multi-byte characters count once.
  CHECK(chunk_document("ééééé", 3, 1) == std::vector<std::string>{"ééé", "ééé"});
  CHECK(throws_code([] { chunk_document("", 10, 2); }, ErrorCode::EmptyDocument));
  CHECK(throws_code([] { chunk_document("abc", 5, 5); }, ErrorCode::InvalidSpec));
}

TEST_CASE("chunker satisfies its contract on random multilingual text") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 300; ++t) {
    const auto text = random_text(rng, 1 + rng() % 400);
    const std::size_t max = 5 + rng() % 200;
    const std::size_t overlap = rng() % max;
    CAPTURE(max);
    CAPTURE(overlap);
    check_chunking(text, max, overlap);
  }
}

TEST_CASE("tokenizer") {
  CHECK(HashingEmbedder::tokenize("Hello, WORLD! the AMR-2023 rate") ==
        std::vector<std::string>{"hello", "world", "amr", "2023", "rate"});
  CHECK(HashingEmbedder::tokenize("the of and") == std::vector<std::string>{"the", "of", "and"});
  CHECK(HashingEmbedder::tokenize("  ...  ").empty());
}

TEST_CASE("hashing embedder properties") {
  const HashingEmbedder e;
  const auto a = e.embed("Carbapenem resistance in Klebsiella pneumoniae");
  double sq = 0.0;
  for (double x : a) sq += x * x;
  CHECK(std::abs(sq - 1.0) < 1e-12);
  CHECK(e.embed("Carbapenem resistance in Klebsiella pneumoniae") == a);
  CHECK(cosine(a, a) == doctest::Approx(1.0));
  CHECK(cosine(a, e.embed("CARBAPENEM resistance, klebsiella PNEUMONIAE.")) == doctest::Approx(1.0));
  CHECK(throws_code([&] { e.embed(""); }, ErrorCode::EmptyText));
  CHECK(throws_code([&] { e.embed("!!! ---"); }, ErrorCode::EmptyText));
  const auto batch = e.embed_batch({"alpha beta", "gamma"});
  CHECK(batch.size() == 2);
  CHECK(batch[1] == e.embed("gamma"));
}

TEST_CASE("texts with disjoint vocabularies are nearly orthogonal") {
  const HashingEmbedder e;
  std::mt19937_64 rng(5);
  std::size_t over = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::string a, b;
    for (int w = 0; w < 20; ++w) {
      a += "wa" + std::to_string(rng() % 100000) + "x ";
      b += "wb" + std::to_string(rng() % 100000) + "y ";
    }
    if (std::abs(cosine(e.embed(a), e.embed(b))) >= 0.2) ++over;
  }
  // Hash collisions make a rare pair exceed the bound.
  CHECK(over <= trials / 50);
}

TEST_CASE("index add validates its input") {
  VectorIndex idx("t");
  std::mt19937_64 rng(1);
  const auto v = random_unit(rng);
  CHECK(idx.add({0, "A-1", "S", "text"}, v) == 0);
  CHECK(idx.add({0, "A-2", "S", "text"}, v) == 1);
  CHECK(throws_code([&] { idx.add({0, "A-1", "S", "again"}, v); }, ErrorCode::DuplicateLabel));
  CHECK(throws_code([&] { idx.add({0, "A-3", "S", ""}, v); }, ErrorCode::EmptyText));
  auto scaled = v;
  for (auto& x : scaled) x *= 2.0;
  CHECK(throws_code([&] { idx.add({0, "A-4", "S", "text"}, scaled); }, ErrorCode::EmbedderMismatch));
  CHECK(idx.size() == 2);
  CHECK(idx.find(1)->chunk.label == "A-2");
  CHECK(idx.find(7) == nullptr);
}

TEST_CASE("query errors") {
  VectorIndex empty("t");
  std::mt19937_64 rng(2);
  const auto q = random_unit(rng);
  CHECK(throws_code([&] { empty.query(q, "t"); }, ErrorCode::EmptyIndex));
  const auto idx = random_index(3, 3);
  CHECK(throws_code([&] { idx.query(q, "other"); }, ErrorCode::EmbedderMismatch));
  CHECK(idx.query(q, "test-tag", 10).size() == 3);
}

TEST_CASE("top-k equals an exhaustive sorted scan") {
  for (std::size_t n : {std::size_t{1}, std::size_t{50}, std::size_t{3000}}) {
    const auto idx = random_index(n, n);
    std::mt19937_64 rng(n + 1);
    for (int t = 0; t < 5; ++t) {
      const auto q = random_unit(rng);
      std::vector<std::pair<double, std::uint64_t>> all;
      for (const auto& e : idx.entries()) {
        double s = 0.0;
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) s += e.vector[i] * q[i];
        all.emplace_back(s, e.chunk.id);
      }
      std::sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
      for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{10}}) {
        const auto hits = idx.query(q, "test-tag", k);
        REQUIRE(hits.size() == std::min(k, n));
        for (std::size_t i = 0; i < hits.size(); ++i) {
          CHECK(hits[i].id == all[i].second);
          CHECK(hits[i].score == all[i].first);
        }
      }
    }
  }
}

TEST_CASE("serial and parallel scoring are bit-identical") {
  const auto idx = random_index(5000, 9);
  std::mt19937_64 rng(10);
  const auto q = random_unit(rng);
  const auto a = kernels::score_all_serial(idx.entries(), q);
  const auto b = kernels::score_all_parallel(idx.entries(), q);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::bit_cast<std::uint64_t>(a[i]) == std::bit_cast<std::uint64_t>(b[i]));
}

TEST_CASE("ties in score break by ascending id") {
  VectorIndex idx("t");
  std::mt19937_64 rng(4);
  const auto v = random_unit(rng);
  for (int i = 0; i < 5; ++i) idx.add({0, "D-" + std::to_string(i), "S", "same"}, v);
  const auto hits = idx.query(v, "t", 3);
  CHECK(hits[0].id == 0);
  CHECK(hits[1].id == 1);
  CHECK(hits[2].id == 2);
  CHECK(kernels::top_k({1.0, 3.0, 3.0, 2.0}, 3) == std::vector<std::size_t>{1, 2, 3});
}

TEST_CASE("every corpus chunk retrieves itself first") {
  const HashingEmbedder e;
  const auto idx = build_index(chunk_corpus(load_corpus(default_corpus_dir())), e);
  for (const auto& entry : idx.entries()) {
    const auto hits = query(idx, e, entry.chunk.text, 1);
    CHECK(hits[0].id == entry.chunk.id);
    CHECK(hits[0].score == doctest::Approx(1.0));
  }
}

TEST_CASE("index persistence") {
  TempDir dir;
  const HashingEmbedder e;
  const auto idx = build_index(chunk_corpus(load_corpus(default_corpus_dir())), e);
  REQUIRE(idx.size() == 12);
  const auto path = dir.str("index.amridx");
  save_index(idx, path);
  const auto back = load_index(path);
  CHECK(back == idx);
  CHECK(serialize_index(back) == serialize_index(idx));

  const char* probes[] = {"carbapenem resistance",
                          "What is the AWaRe classification?",
                          "surveillance in low-income countries",
                          "Global Action Plan objectives",
                          "resistance trends in Europe",
                          "Klebsiella pneumoniae",
                          "South-East Asia forecasts",
                          "antibiotic consumption growth",
                          "laboratory capacity",
                          "Watch and Reserve antibiotics"};
  for (const char* p : probes) CHECK(query(idx, e, p, 3) == query(back, e, p, 3));

  SUBCASE("empty index round trips") {
    VectorIndex empty(std::string(HashingEmbedder::kTag));
    CHECK(deserialize_index(serialize_index(empty)) == empty);
  }
  SUBCASE("corruption is detected") {
    const auto bytes = serialize_index(idx);
    for (std::size_t len : {std::size_t{0}, std::size_t{6}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
      CHECK(throws_code([&] { deserialize_index(std::string_view(bytes).substr(0, len)); }, ErrorCode::CorruptIndex));
    auto flipped = bytes;
    flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 1);
    CHECK(throws_code([&] { deserialize_index(flipped); }, ErrorCode::CorruptIndex));
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(throws_code([&] { deserialize_index(magic); }, ErrorCode::CorruptIndex));
    CHECK(throws_code([&] { deserialize_index(bytes + "junk"); }, ErrorCode::CorruptIndex));
  }
  SUBCASE("missing file") {
    CHECK(throws_code([&] { load_index(dir.str("absent.amridx")); }, ErrorCode::ArtifactMissing));
  }
  SUBCASE("queries with a different embedder are refused") {
    CHECK(throws_code([&] { back.query(e.embed("x"), "http:other"); }, ErrorCode::EmbedderMismatch));
  }
}

TEST_CASE("shared index: concurrent readers see consistent snapshots while a writer appends") {
  const HashingEmbedder e;
  SharedIndex shared(build_index(chunk_corpus(load_corpus(default_corpus_dir())), e));
  const auto q = e.embed("carbapenem resistance");
  std::atomic<bool> done{false};
  std::atomic<int> failures{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      std::size_t last = 0;
      while (!done) {
        const auto snap = shared.snapshot();
        if (snap->size() < last) ++failures;
        last = snap->size();
        const auto hits = snap->query(q, snap->embedder_tag(), 3);
        if (hits.size() != 3) ++failures;
        for (std::size_t i = 0; i < snap->size(); ++i)
          if (snap->entries()[i].chunk.id != i) ++failures;
      }
    });
  }
  std::vector<std::thread> writers;
  for (int w = 0; w < 2; ++w) {
    writers.emplace_back([&, w] {
      for (int i = 0; i < 50; ++i) shared.add({0, "W" + std::to_string(w) + "-" + std::to_string(i), "S", "note " + std::to_string(i)}, e);
    });
  }
  for (auto& t : writers) t.join();
  done = true;
  for (auto& t : readers) t.join();
  CHECK(failures == 0);
  CHECK(shared.snapshot()->size() == 112);
}

TEST_CASE("http embedder") {
  StubServer stub([](httplib::Server& s) {
    s.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json vecs = nlohmann::json::array();
      std::size_t i = 0;
      for (const auto& t : body.at("texts")) {
        std::vector<double> v(kEmbeddingDim, 0.0);
        v[(t.get<std::string>().size() + i++) % kEmbeddingDim] = 3.0;
        vecs.push_back(v);
      }
      res.set_content(nlohmann::json{{"vectors", vecs}}.dump(), "application/json");
    });
    s.Post("/short", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"vectors": [[1, 2, 3]]})", "application/json");
    });
    s.Post("/zero", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"vectors", {std::vector<double>(kEmbeddingDim, 0.0)}}}.dump(), "application/json");
    });
    s.Post("/garbage", [](const httplib::Request&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
    s.Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  });

  const HttpEmbedder good(stub.url("/embed"));
  CHECK(good.tag() == "http:" + stub.url("/embed"));
  const auto vs = good.embed_batch({"abc", "de"});
  REQUIRE(vs.size() == 2);
  CHECK(vs[0][3] == 1.0);
  CHECK(vs[1][3] == 1.0);

  for (const char* path : {"/short", "/zero", "/garbage", "/fail", "/missing"})
    CHECK(throws_code([&] { HttpEmbedder(stub.url(path)).embed("x"); }, ErrorCode::EmbedderFailure));
  CHECK(throws_code([] { HttpEmbedder("http://127.0.0.1:1/embed", 2.0).embed("x"); }, ErrorCode::EmbedderFailure));
}

TEST_CASE("corpus loading") {
  const auto docs = load_corpus(default_corpus_dir());
  REQUIRE(docs.size() == 6);
  CHECK(docs[0].label == "CARB-ESKAPE");
  for (const auto& d : docs) {
    CHECK_FALSE(d.text.empty());
    CHECK(d.text.back() != '\n');
  }
  const auto chunks = chunk_corpus(docs);
  CHECK(chunks.size() == 12);
  CHECK(chunks[0].label == "CARB-ESKAPE-1");
  CHECK(chunks[1].label == "CARB-ESKAPE-2");
  CHECK(chunks[1].source_title == docs[0].source_title);

  TempDir dir;
  CHECK(throws_code([&] { load_corpus(dir.str()); }, ErrorCode::BadCorpus));
  write_file(dir.str("manifest.csv"), "id,title,file\nA,T,a.txt\n");
  CHECK(throws_code([&] { load_corpus(dir.str()); }, ErrorCode::BadCorpus));
  write_file(dir.str("manifest.csv"), "label,source_title,filename\nA,T,a.txt\n");
  CHECK(throws_code([&] { load_corpus(dir.str()); }, ErrorCode::BadCorpus));
  write_file(dir.str("a.txt"), "Body text.\n\n");
  const auto one = load_corpus(dir.str());
  CHECK(one.size() == 1);
  CHECK(one[0].text == "Body text.");
  write_file(dir.str("manifest.csv"), "label,source_title,filename\n");
  CHECK(throws_code([&] { load_corpus(dir.str()); }, ErrorCode::BadCorpus));
}
