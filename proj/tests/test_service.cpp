#include <doctest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "amr/binary_io.hpp"
#include "amr/pipeline.hpp"
#include "amr/service.hpp"
#include "test_util.hpp"

using namespace amr;
using amr::test::TempDir;
using amr::test::throws_code;
using nlohmann::json;

namespace {

// Small but complete configuration: every stage runs in a second or two.
std::string small_config_json() {
  return R"({
    "artifacts_dir": "artifacts",
    "synth": {"n_countries": 12, "pairs_per_country": 4, "seed": 5},
    "gbt_grid": {"learning_rate": [0.1], "max_depth": [3], "n_estimators": [20], "subsample": [1.0]},
    "lstm": {"hidden_size": 4, "max_epochs": 3},
    "service": {"port": 0}
  })";
}

struct ServedService {
  std::unique_ptr<Service> service;
  int port = 0;
  std::thread thread;

  explicit ServedService(RunConfig c, std::unique_ptr<TextGenerator> gen = nullptr)
      : service(std::make_unique<Service>(std::move(c), std::move(gen))) {
    port = service->bind_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { service->listen_after_bind(); });
    while (!service->running()) std::this_thread::yield();
  }
  ~ServedService() {
    service->stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }
};

json error_of(const httplib::Result& r) { return json::parse(r->body).at("error"); }

struct EnvGuard {
  std::string name;
  explicit EnvGuard(std::string n, const char* value) : name(std::move(n)) { ::setenv(name.c_str(), value, 1); }
  ~EnvGuard() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST_CASE("configuration parsing") {
  SUBCASE("defaults") {
    const auto c = parse_config("{}", "/base");
    CHECK(c.artifacts_dir == "/base/artifacts");
    CHECK(c.resolved_data_path() == "/base/artifacts/data.csv");
    CHECK(c.index_path() == "/base/artifacts/index.amridx");
    CHECK(c.generation.model == "phi3:mini");
    CHECK_FALSE(c.generation.url.has_value());
    CHECK(c.rag.top_k == 3);
    CHECK(c.split.train_years == std::set<int>{2021, 2022});
  }
  SUBCASE("round trip through JSON") {
    const auto c = parse_config(small_config_json(), "/x");
    const auto again = parse_config(config_to_json(c), "/x");
    CHECK(config_to_json(again) == config_to_json(c));
    CHECK(again.synth.n_countries == 12);
    CHECK(again.synth_seed == 5);
    CHECK(again.gbt_grid.n_estimators == std::vector<std::size_t>{20});
  }
  SUBCASE("disjoint validation flag") {
    const auto c = parse_config(R"({"split": {"disjoint_validation": true}})");
    CHECK(c.effective_split().train_years == std::set<int>{2021});
    CHECK(c.effective_split().val_years == std::set<int>{2022});
  }
  SUBCASE("invalid documents") {
    for (const char* bad : {R"({"unknown": 1})", R"({"synth": {"colour": "red"}})", R"({"smoothing_k": -1})",
                            R"({"ridge": {"lambda_grid": []}})", R"({"rag": {"chunk_max_chars": 50, "chunk_overlap": 50}})",
                            R"({"gbt_grid": {"max_depth": [0]}})", R"({"lstm": {"hidden_size": 0}})",
                            R"({"service": {"port": 70000}})", R"({"synth": {"n_countries": "many"}})", "[1, 2]",
                            "{not json", R"({"split": {"train_years": [2021], "val_years": [], "test_years": [2023]}})"}) {
      CAPTURE(bad);
      CHECK(throws_code([&] { parse_config(bad); }, ErrorCode::ConfigInvalid));
    }
  }
  SUBCASE("missing file") {
    TempDir dir;
    CHECK(throws_code([&] { load_config(dir.str("amr.json")); }, ErrorCode::ConfigInvalid));
  }
  SUBCASE("environment overrides") {
    TempDir dir;
    write_file(dir.str("amr.json"), R"({"generation": {"url": "http://a:1", "model": "m1"}})");
    {
      EnvGuard url("AMR_LLM_URL", "http://override:11434");
      EnvGuard model("AMR_LLM_MODEL", "llama3");
      EnvGuard embed("AMR_EMBED_URL", "http://embed:9/v1");
      const auto c = load_config(dir.str("amr.json"));
      CHECK(c.generation.url == "http://override:11434");
      CHECK(c.generation.model == "llama3");
      CHECK(c.rag.embedder_url == "http://embed:9/v1");
    }
    {
      EnvGuard url("AMR_LLM_URL", "");
      CHECK_FALSE(load_config(dir.str("amr.json")).generation.url.has_value());
    }
    const auto c = load_config(dir.str("amr.json"));
    CHECK(c.generation.url == "http://a:1");
    CHECK(c.generation.model == "m1");
  }
}

TEST_CASE("service before any artifacts exist") {
  TempDir dir;
  const auto c = parse_config(small_config_json(), dir.str());
  ServedService s(c);
  CHECK_FALSE(s.service->report_loaded());
  CHECK_FALSE(s.service->index_loaded());
  auto cli = s.client();

  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body) == json{{"status", "ok"}, {"version", std::string(kVersion)}});

  auto report = cli.Get("/report");
  CHECK(report->status == 409);
  CHECK(error_of(report)["code"] == "ArtifactMissing");
  CHECK(cli.Get("/regional")->status == 409);

  auto q = cli.Post("/query", R"({"question": "anything"})", "application/json");
  CHECK(q->status == 409);
  CHECK(error_of(q)["code"] == "ArtifactMissing");
}

TEST_CASE("service over a full artifact set") {
  TempDir dir;
  const auto c = parse_config(small_config_json(), dir.str());
  run_synth(c);
  run_train(c);
  const auto report = run_evaluate(c);
  run_index(c);

  ServedService s(c);
  REQUIRE(s.service->report_loaded());
  REQUIRE(s.service->index_loaded());
  auto cli = s.client();

  SUBCASE("report is served byte for byte") {
    auto r = cli.Get("/report");
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Content-Type") == "application/json");
    CHECK(r->body == read_file(c.report_path()));
    CHECK(report_to_json(report) == r->body);
  }

  SUBCASE("regional tables") {
    auto r = cli.Get("/regional");
    CHECK(r->status == 200);
    const auto j = json::parse(r->body);
    CHECK(j["model"] == std::string(model_tag(report.best_model)));
    CHECK(j["regional"]["entries"].size() == report.regional.entries.size());
    CHECK(j["regional_by_model"].size() == kModelKindCount);
  }

  SUBCASE("query answers with at most top_k sources") {
    auto r = cli.Post("/query", R"({"question": "Which antibiotics should be preserved?"})", "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("Content-Type") == "application/json");
    const auto j = json::parse(r->body);
    CHECK(j["retrieved"].size() <= 3);
    CHECK(j["mode"] == "Extractive");
    CHECK(j["verdict"] == "Accepted");
    CHECK_FALSE(j["answer"].get<std::string>().empty());
  }

  SUBCASE("bad requests share one error shape") {
    auto empty = cli.Post("/query", R"({"question": "   "})", "application/json");
    CHECK(empty->status == 400);
    CHECK(error_of(empty)["code"] == "EmptyText");
    auto malformed = cli.Post("/query", "{oops", "application/json");
    CHECK(malformed->status == 400);
    CHECK(error_of(malformed)["code"] == "MalformedRequest");
    auto wrong = cli.Post("/query", R"({"q": 1})", "application/json");
    CHECK(wrong->status == 400);
    auto missing = cli.Get("/nope");
    CHECK(missing->status == 404);
    const auto e = error_of(missing);
    CHECK(e["code"] == "NotFound");
    CHECK(e["message"].is_string());
  }

  SUBCASE("request ids are echoed or generated") {
    auto echoed = cli.Get("/health", httplib::Headers{{"X-Request-Id", "abc-123"}});
    CHECK(echoed->get_header_value("X-Request-Id") == "abc-123");
    auto a = cli.Get("/health");
    auto b = cli.Get("/nope");
    const auto ia = a->get_header_value("X-Request-Id");
    const auto ib = b->get_header_value("X-Request-Id");
    CHECK(ia.rfind("req-", 0) == 0);
    CHECK(ib.rfind("req-", 0) == 0);
    CHECK(ia != ib);
  }

  SUBCASE("concurrent queries") {
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        httplib::Client cl("127.0.0.1", s.port);
        const auto body = json{{"question", std::string(kPolicyQuestions[static_cast<std::size_t>(t) % 5])}}.dump();
        auto r = cl.Post("/query", body, "application/json");
        if (r && r->status == 200) ++ok;
      });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 8);
  }
}

TEST_CASE("service maps generation failures to 502") {
  TempDir dir;
  auto c = parse_config(small_config_json(), dir.str());
  run_synth(c);
  run_train(c);
  run_evaluate(c);
  run_index(c);

  SUBCASE("fallback on: extractive answer travels with the error") {
    ServedService s(c, std::make_unique<FunctionGenerator>(
                           [](const PromptBundle&) -> std::string { throw Error(ErrorCode::EndpointUnreachable, "down"); }));
    auto r = s.client().Post("/query", R"({"question": "carbapenem guidance"})", "application/json");
    CHECK(r->status == 502);
    const auto j = json::parse(r->body);
    CHECK(j["error"]["code"] == "GenerationFailed");
    CHECK(j["mode"] == "Extractive");
    CHECK(j["warning"].is_string());
  }
  SUBCASE("fallback off: plain error") {
    c.generation.fallback = false;
    ServedService s(c, std::make_unique<FunctionGenerator>(
                           [](const PromptBundle&) -> std::string { throw Error(ErrorCode::Timeout, "slow"); }));
    auto r = s.client().Post("/query", R"({"question": "carbapenem guidance"})", "application/json");
    CHECK(r->status == 502);
    CHECK(error_of(r)["code"] == "Timeout");
  }
  SUBCASE("generated answers pass through") {
    ServedService s(c, std::make_unique<FunctionGenerator>(
                           [](const PromptBundle& b) { return "Answer " + citation(b.labels[0]); }));
    auto r = s.client().Post("/query", R"({"question": "carbapenem guidance"})", "application/json");
    CHECK(r->status == 200);
    const auto j = json::parse(r->body);
    CHECK(j["mode"] == "Generated");
    CHECK(j["verdict"] == "Accepted");
  }
}

TEST_CASE("pipeline steps report missing prerequisites") {
  TempDir dir;
  const auto c = parse_config(small_config_json(), dir.str());
  CHECK(throws_code([&] { run_train(c); }, ErrorCode::ArtifactMissing));
  CHECK(throws_code([&] { run_evaluate(c); }, ErrorCode::ArtifactMissing));
  CHECK(throws_code([&] { load_report(c); }, ErrorCode::ArtifactMissing));
  CHECK(throws_code([&] { run_ask(c, "question"); }, ErrorCode::ArtifactMissing));
  run_synth(c);
  run_train(c);
  run_evaluate(c);
  CHECK(throws_code([&] { run_ask(c, "question"); }, ErrorCode::ArtifactMissing));
  run_index(c);
  CHECK(throws_code([&] { run_ask(c, "  "); }, ErrorCode::EmptyText));
  CHECK(run_ask(c, "question about surveillance").retrieved.size() == 3);
  CHECK(run_eval_rag(c).size() == kPolicyQuestions.size());
}
