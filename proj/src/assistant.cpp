#include "amr/assistant.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include <httplib.h>
#include <json.hpp>

#include "amr/binary_io.hpp"
#include "amr/error.hpp"
#include "amr/http_util.hpp"

namespace amr {

namespace {

std::string one_decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", round1(v));
  return buf;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; }

std::vector<std::string> leading_sentences(std::string_view text, std::size_t limit) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (out.size() < limit && i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size()) {
      const char c = text[j];
      if ((c == '.' || c == '!' || c == '?') && (j + 1 == text.size() || is_space(text[j + 1]))) {
        ++j;
        break;
      }
      ++j;
    }
    std::string s(text.substr(i, j - i));
    for (char& c : s)
      if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    out.push_back(std::move(s));
    i = j;
  }
  return out;
}

}  // namespace

std::string ForecastContext::text() const {
  std::string out = "Forecast context (held-out test year):\n";
  out += "Gain importance of forecast features:\n";
  for (const auto& l : importance_lines) out += "- " + l + "\n";
  out += "Test MAE by WHO region:\n";
  for (const auto& l : regional_lines) out += "- " + l + "\n";
  out += "Model performance comparison:\n";
  for (const auto& l : comparison_lines) out += "- " + l + "\n";
  return out;
}

ForecastContext build_context(const EvalReport& report) {
  for (auto k : kAllModelKinds) {
    if (!report.row(k)) {
      throw Error(ErrorCode::IncompleteReport, "report lacks a row for " + std::string(model_tag(k)));
    }
  }
  ForecastContext ctx;
  const std::size_t n_imp = std::min<std::size_t>(5, report.importance.size());
  for (std::size_t i = 0; i < n_imp; ++i) {
    const auto& e = report.importance[i];
    ctx.importance_lines.push_back(e.display_name + ": " + one_decimal(100.0 * e.importance) + "%");
  }
  if (ctx.importance_lines.empty()) ctx.importance_lines.emplace_back("no importance data available");

  for (const auto& e : report.regional.entries) {
    ctx.regional_lines.push_back(std::string(region_name(e.region)) + ": MAE " + one_decimal(e.mae) +
                                 "% (n=" + std::to_string(e.n) + ")");
  }
  if (ctx.regional_lines.empty()) {
    ctx.regional_lines.emplace_back("no regional breakdown available");
  } else {
    for (auto r : report.regional.excluded)
      ctx.regional_lines.push_back(std::string(region_name(r)) + ": excluded, no test observations");
  }

  for (const auto& m : report.models) {
    std::string line = std::string(model_display_name(m.kind)) + ": MAE " + one_decimal(m.mae) + ", RMSE " +
                       one_decimal(m.rmse) + ", R2 " + (m.r2 ? one_decimal(*m.r2) : std::string("n/a"));
    if (m.kind != ModelKind::Naive) {
      line += ", improvement vs naive " +
              (m.improvement_vs_naive_pct ? one_decimal(*m.improvement_vs_naive_pct) + "%" : std::string("n/a"));
    }
    if (m.kind == report.best_model) line += " (best)";
    ctx.comparison_lines.push_back(std::move(line));
  }
  return ctx;
}

std::vector<RetrievedChunk> resolve_hits(const VectorIndex& idx, const std::vector<RetrievalHit>& hits) {
  std::vector<RetrievedChunk> out;
  out.reserve(hits.size());
  for (const auto& h : hits) {
    const auto* e = idx.find(h.id);
    if (!e) throw Error(ErrorCode::CorruptIndex, "hit id " + std::to_string(h.id) + " not in index");
    out.push_back({h, e->chunk.source_title, e->chunk.text});
  }
  return out;
}

std::string citation(std::string_view label) { return "[Source: " + std::string(label) + "]"; }

std::string PromptBundle::combined() const { return system_text + "\n\n" + user_text; }

PromptBundle assemble_prompt(const std::string& question, const std::vector<RetrievedChunk>& chunks,
                             const ForecastContext& ctx) {
  if (chunks.empty()) throw Error(ErrorCode::NoHits, "no retrieved chunks to ground the answer");
  PromptBundle b;
  for (const auto& c : chunks) b.labels.push_back(c.hit.label);
  const std::string allowed = "{" + join(b.labels, ", ") + "}";

  b.system_text =
      "You are an antimicrobial resistance policy assistant. Answer using only the source excerpts and "
      "the forecast context provided. Cite every claim drawn from an excerpt with its token in the exact "
      "form [Source: LABEL], one label per token. Permitted labels: " +
      allowed + ". Do not cite any source label outside " + allowed +
      ". Never invent sources, reports or publications. If the excerpts do not answer the question, say so.";

  b.user_text = question + "\n\n" + ctx.text() + "\nSource excerpts:\n";
  for (const auto& c : chunks) b.user_text += "\n" + citation(c.hit.label) + "\n" + c.text + "\n";
  return b;
}

HttpGenerator::HttpGenerator(std::string base_url, std::string model, double timeout_s)
    : base_url_(std::move(base_url)), model_(std::move(model)), timeout_s_(timeout_s) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string HttpGenerator::generate(const PromptBundle& bundle) const {
  std::lock_guard lock(in_flight_);
  const auto u = parse_url(base_url_ + "/api/generate");
  httplib::Client cli(u.origin);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);

  const nlohmann::json body = {{"model", model_}, {"prompt", bundle.combined()}, {"stream", false}};
  const auto started = std::chrono::steady_clock::now();
  auto res = cli.Post(u.path, body.dump(), "application/json");
  if (!res) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout ||
        ((err == httplib::Error::Read || err == httplib::Error::Write) && elapsed >= 0.9 * timeout_s_)) {
      throw Error(ErrorCode::Timeout, "generation endpoint timed out after " + one_decimal(elapsed) + " s");
    }
    throw Error(ErrorCode::EndpointUnreachable,
                "generation endpoint " + base_url_ + " unreachable: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::MalformedResponse, "generation endpoint returned HTTP " + std::to_string(res->status));
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::MalformedResponse, "generation endpoint returned invalid JSON");
  }
  if (!j.is_object() || !j.contains("response") || !j["response"].is_string()) {
    throw Error(ErrorCode::MalformedResponse, "generation response lacks a \"response\" text field");
  }
  return j["response"].get<std::string>();
}

std::string_view verdict_name(Verdict v) noexcept {
  switch (v) {
    case Verdict::Accepted: return "Accepted";
    case Verdict::Rejected: return "Rejected";
    case Verdict::Uncited: return "Uncited";
  }
  return "Uncited";
}

std::string_view mode_name(AnswerMode m) noexcept {
  return m == AnswerMode::Generated ? "Generated" : "Extractive";
}

CitationCheck verify_citations(std::string_view answer, const std::vector<std::string>& retrieved_labels) {
  constexpr std::string_view kOpen = "[Source:";
  CitationCheck out;
  std::size_t pos = 0;
  while ((pos = answer.find(kOpen, pos)) != std::string_view::npos) {
    const auto close = answer.find(']', pos);
    if (close == std::string_view::npos) break;
    auto label = answer.substr(pos + kOpen.size(), close - pos - kOpen.size());
    while (!label.empty() && is_space(label.front())) label.remove_prefix(1);
    while (!label.empty() && is_space(label.back())) label.remove_suffix(1);
    pos = close + 1;
    std::string l(label);
    if (std::find(out.cited_labels.begin(), out.cited_labels.end(), l) != out.cited_labels.end()) continue;
    out.cited_labels.push_back(l);
    if (std::find(retrieved_labels.begin(), retrieved_labels.end(), l) == retrieved_labels.end()) {
      out.rejected_labels.push_back(l);
    }
  }
  if (out.cited_labels.empty()) {
    out.verdict = Verdict::Uncited;
  } else {
    out.verdict = out.rejected_labels.empty() ? Verdict::Accepted : Verdict::Rejected;
  }
  return out;
}

std::string extractive_fallback(const std::string& /*question*/, const std::vector<RetrievedChunk>& chunks) {
  if (chunks.empty()) throw Error(ErrorCode::NoHits, "no retrieved chunks to extract from");
  std::vector<std::string> paragraphs;
  for (const auto& c : chunks) {
    std::vector<std::string> cited;
    for (auto& s : leading_sentences(c.text, 3)) cited.push_back(s + " " + citation(c.hit.label));
    if (cited.empty()) cited.push_back(citation(c.hit.label));
    paragraphs.push_back(join(cited, " "));
  }
  return join(paragraphs, "\n\n");
}

GroundedAnswer answer_question(const std::string& question, const VectorIndex& idx, const Embedder& embedder,
                               const EvalReport& report, const TextGenerator* generator,
                               const AnswerOptions& options) {
  GroundedAnswer a;
  a.question = question;
  a.retrieved = resolve_hits(idx, query(idx, embedder, question, options.k));
  const auto ctx = build_context(report);
  const auto context_text = ctx.text();
  a.context_digest = hex64(fnv1a64(context_text));
  auto bundle = assemble_prompt(question, a.retrieved, ctx);

  auto extract = [&] {
    a.mode = AnswerMode::Extractive;
    a.answer = extractive_fallback(question, a.retrieved);
  };

  if (!generator) {
    extract();
  } else {
    try {
      a.mode = AnswerMode::Generated;
      a.answer = generator->generate(bundle);
      ++a.attempts;
      const auto first = verify_citations(a.answer, bundle.labels);
      if (first.verdict == Verdict::Rejected) {
        bundle.user_text += "\nYour previous answer cited labels that were not retrieved (" +
                            join(first.rejected_labels, ", ") + "). Answer again and cite only " +
                            join(bundle.labels, ", ") + ", one label per [Source: LABEL] token.\n";
        a.answer = generator->generate(bundle);
        ++a.attempts;
      }
    } catch (const Error& e) {
      const bool transport = e.code() == ErrorCode::EndpointUnreachable || e.code() == ErrorCode::Timeout ||
                             e.code() == ErrorCode::MalformedResponse;
      if (!transport || !options.fallback_on_failure) throw;
      a.warning = "generation failed (" + std::string(to_string(e.code())) + ": " + e.what() +
                  "); extractive fallback used";
      extract();
    }
  }

  const auto check = verify_citations(a.answer, bundle.labels);
  a.cited_labels = check.cited_labels;
  a.rejected_labels = check.rejected_labels;
  a.verdict = check.verdict;
  return a;
}

std::string answer_to_json(const GroundedAnswer& a, int indent) {
  nlohmann::ordered_json j;
  j["question"] = a.question;
  j["answer"] = a.answer;
  j["mode"] = std::string(mode_name(a.mode));
  j["verdict"] = std::string(verdict_name(a.verdict));
  j["cited_labels"] = a.cited_labels;
  j["rejected_labels"] = a.rejected_labels;
  auto retrieved = nlohmann::ordered_json::array();
  for (const auto& c : a.retrieved) {
    nlohmann::ordered_json r;
    r["label"] = c.hit.label;
    r["score"] = c.hit.score;
    r["id"] = c.hit.id;
    r["source_title"] = c.source_title;
    r["excerpt"] = c.text;
    retrieved.push_back(std::move(r));
  }
  j["retrieved"] = std::move(retrieved);
  j["context_digest"] = a.context_digest;
  j["attempts"] = a.attempts;
  j["warning"] = a.warning ? nlohmann::ordered_json(*a.warning) : nlohmann::ordered_json(nullptr);
  return j.dump(indent);
}

}  // namespace amr
