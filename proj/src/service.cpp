#include "amr/service.hpp"

#include <cstdio>

#include <httplib.h>
#include <json.hpp>

#include "amr/error.hpp"

namespace amr {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kJson = "application/json";

std::string error_body(std::string_view code, const std::string& message) {
  ordered_json j;
  j["error"] = {{"code", std::string(code)}, {"message", message}};
  return j.dump();
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  res.status = status;
  res.set_content(error_body(code, message), kJson);
}

std::string regional_json(const EvalReport& r) {
  auto table = [](const RegionalTable& t) {
    ordered_json entries = ordered_json::array();
    for (const auto& e : t.entries)
      entries.push_back({{"region", std::string(region_name(e.region))}, {"mae", e.mae}, {"n", e.n}});
    ordered_json excluded = ordered_json::array();
    for (auto reg : t.excluded) excluded.push_back(std::string(region_name(reg)));
    return ordered_json{{"entries", entries}, {"excluded", excluded}};
  };
  ordered_json j;
  j["model"] = std::string(model_tag(r.best_model));
  j["regional"] = table(r.regional);
  ordered_json by_model;
  for (const auto& [k, t] : r.regional_by_model) by_model[std::string(model_tag(k))] = table(t);
  j["regional_by_model"] = by_model;
  return j.dump(2);
}

}  // namespace

Service::Service(RunConfig config, std::unique_ptr<TextGenerator> generator)
    : config_(std::move(config)), generator_(std::move(generator)), server_(std::make_unique<httplib::Server>()) {
  embedder_ = make_embedder(config_);
  if (!generator_) generator_ = make_generator(config_);
  try {
    report_ = load_report(config_);
    report_body_ = report_to_json(*report_);
    regional_body_ = regional_json(*report_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ArtifactMissing) throw;
  }
  try {
    index_ = std::make_shared<const VectorIndex>(load_index(config_.index_path()));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ArtifactMissing) throw;
  }
  install_routes();
}

Service::~Service() { stop(); }

void Service::install_routes() {
  auto& s = *server_;

  s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    std::string id = req.get_header_value("X-Request-Id");
    if (id.empty()) {
      char buf[24];
      std::snprintf(buf, sizeof buf, "req-%012llx",
                    static_cast<unsigned long long>(next_request_.fetch_add(1, std::memory_order_relaxed)));
      id = buf;
    }
    res.set_header("X-Request-Id", id);
    return httplib::Server::HandlerResponse::Unhandled;
  });

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    ordered_json j;
    j["status"] = "ok";
    j["version"] = std::string(kVersion);
    res.set_content(j.dump(), kJson);
  });

  s.Get("/report", [this](const httplib::Request&, httplib::Response& res) {
    if (!report_) return send_error(res, 409, "ArtifactMissing", "no evaluation report loaded; run `amr evaluate`");
    res.set_content(report_body_, kJson);
  });

  s.Get("/regional", [this](const httplib::Request&, httplib::Response& res) {
    if (!report_) return send_error(res, 409, "ArtifactMissing", "no evaluation report loaded; run `amr evaluate`");
    res.set_content(regional_body_, kJson);
  });

  s.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return send_error(res, 400, "MalformedRequest", "request body must be JSON");
    }
    if (!body.is_object() || !body.contains("question") || !body["question"].is_string()) {
      return send_error(res, 400, "MalformedRequest", "body must be {\"question\": \"...\"}");
    }
    const auto question = body["question"].get<std::string>();
    if (question.find_first_not_of(" \t\r\n") == std::string::npos) {
      return send_error(res, 400, "EmptyText", "question must not be empty");
    }
    if (!report_ || !index_) {
      return send_error(res, 409, "ArtifactMissing", "report or index not loaded; run `amr evaluate` and `amr index`");
    }
    AnswerOptions opts;
    opts.k = config_.rag.top_k;
    opts.fallback_on_failure = config_.generation.fallback;
    try {
      const auto a = answer_question(question, *index_, *embedder_, *report_, generator_.get(), opts);
      if (a.warning) {
        // Generation failed; the extractive answer travels with the error.
        auto j = ordered_json::parse(answer_to_json(a, -1));
        j["error"] = {{"code", "GenerationFailed"}, {"message", *a.warning}};
        res.status = 502;
        res.set_content(j.dump(), kJson);
        return;
      }
      res.set_content(answer_to_json(a, -1), kJson);
    } catch (const Error& e) {
      const auto c = e.code();
      const bool upstream = c == ErrorCode::EndpointUnreachable || c == ErrorCode::Timeout ||
                            c == ErrorCode::MalformedResponse || c == ErrorCode::EmbedderFailure;
      const bool bad_input = c == ErrorCode::EmptyText;
      send_error(res, upstream ? 502 : (bad_input ? 400 : 500), to_string(c), e.what());
    }
  });

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send_error(res, 404, "NotFound", "no such route");
    } else {
      send_error(res, res.status, "HttpError", "request failed");
    }
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, 500, to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  });
}

bool Service::listen(const std::string& host, int port) { return server_->listen(host, port); }

int Service::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool Service::listen_after_bind() { return server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

bool Service::running() const { return server_->is_running(); }

}  // namespace amr
