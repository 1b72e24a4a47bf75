#pragma once

// Grounded question answering over the knowledge base and one EvalReport.

#include <array>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "amr/report.hpp"
#include "amr/vector_index.hpp"

namespace amr {

struct ForecastContext {
  std::vector<std::string> importance_lines;
  std::vector<std::string> regional_lines;
  std::vector<std::string> comparison_lines;

  /// The full context block as injected into the prompt.
  std::string text() const;
};

/// Fixed-template rendering, numbers at one decimal. Throws IncompleteReport
/// unless all six model rows are present.
ForecastContext build_context(const EvalReport& report);

/// A retrieval hit resolved against the index.
struct RetrievedChunk {
  RetrievalHit hit;
  std::string source_title;
  std::string text;
};

std::vector<RetrievedChunk> resolve_hits(const VectorIndex& idx, const std::vector<RetrievalHit>& hits);

/// Formats a citation token, "[Source: LABEL]".
std::string citation(std::string_view label);

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::vector<std::string> labels;  // permitted citations, hit order

  /// System and user text joined for single-prompt endpoints.
  std::string combined() const;
};

/// Throws NoHits when `chunks` is empty.
PromptBundle assemble_prompt(const std::string& question, const std::vector<RetrievedChunk>& chunks,
                             const ForecastContext& ctx);

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  /// Throws EndpointUnreachable, Timeout or MalformedResponse.
  virtual std::string generate(const PromptBundle& bundle) const = 0;
};

/// Local text-generation runtime: POST {"model","prompt","stream":false} to
/// <base>/api/generate and read the "response" field. One request in flight
/// at a time per instance.
class HttpGenerator final : public TextGenerator {
 public:
  HttpGenerator(std::string base_url, std::string model, double timeout_s = 120.0);
  std::string generate(const PromptBundle& bundle) const override;

 private:
  std::string base_url_;
  std::string model_;
  double timeout_s_;
  mutable std::mutex in_flight_;
};

/// Test double wrapping a callable.
class FunctionGenerator final : public TextGenerator {
 public:
  using Fn = std::function<std::string(const PromptBundle&)>;
  explicit FunctionGenerator(Fn fn) : fn_(std::move(fn)) {}
  std::string generate(const PromptBundle& bundle) const override { return fn_(bundle); }

 private:
  Fn fn_;
};

enum class Verdict { Accepted, Rejected, Uncited };
enum class AnswerMode { Generated, Extractive };

std::string_view verdict_name(Verdict v) noexcept;
std::string_view mode_name(AnswerMode m) noexcept;

struct CitationCheck {
  std::vector<std::string> cited_labels;    // distinct, first-appearance order
  std::vector<std::string> rejected_labels;  // cited but not retrieved
  Verdict verdict = Verdict::Uncited;
};

CitationCheck verify_citations(std::string_view answer, const std::vector<std::string>& retrieved_labels);

/// Up to three leading sentences per chunk, each followed by its citation, in hit order.
/// Throws NoHits.
std::string extractive_fallback(const std::string& question, const std::vector<RetrievedChunk>& chunks);

struct GroundedAnswer {
  std::string question;
  std::string answer;
  AnswerMode mode = AnswerMode::Extractive;
  Verdict verdict = Verdict::Uncited;
  std::vector<std::string> cited_labels;
  std::vector<std::string> rejected_labels;
  std::vector<RetrievedChunk> retrieved;
  std::string context_digest;
  std::size_t attempts = 0;  // generation calls made
  std::optional<std::string> warning;
};

struct AnswerOptions {
  std::size_t k = 3;
  /// On generator failure answer extractively with a warning instead of throwing.
  bool fallback_on_failure = true;
};

/// retrieve -> context -> prompt -> generate (or extract) -> verify. A Rejected
/// generation is retried once with a corrective instruction.
GroundedAnswer answer_question(const std::string& question, const VectorIndex& idx, const Embedder& embedder,
                               const EvalReport& report, const TextGenerator* generator,
                               const AnswerOptions& options = {});

std::string answer_to_json(const GroundedAnswer& a, int indent = 2);

inline constexpr std::array<std::string_view, 5> kPolicyQuestions = {
    "Which antibiotics should Southeast Asia prioritize preserving based on resistance forecasts?",
    "What treatment guidance applies to infections caused by carbapenem-resistant pathogens?",
    "Which WHO regions have the highest forecast uncertainty for resistance rates, and why?",
    "How do resistance trends differ between high-income and low-income countries?",
    "Where should low- and middle-income countries invest to strengthen AMR surveillance?",
};

}  // namespace amr
