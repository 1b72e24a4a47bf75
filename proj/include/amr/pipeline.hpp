#pragma once

// Run configuration and the end-to-end steps behind the CLI.
//
// Artifact layout under `artifacts_dir`:
//   data.csv            dataset written by `synth`
//   models/<tag>.amrm   one file per trained model
//   grid_search.json    validation MAE of every boosting configuration
//   report.json         EvalReport
//   figures/*.csv       figure data
//   index.amridx        retrieval index
//   rag_eval.json       answers to the built-in questions

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amr/assistant.hpp"
#include "amr/data_model.hpp"
#include "amr/features.hpp"
#include "amr/models.hpp"
#include "amr/report.hpp"
#include "amr/vector_index.hpp"

namespace amr {

struct GenerationConfig {
  std::optional<std::string> url;  // base URL; unset means extractive answers only
  std::string model = "phi3:mini";
  double timeout_s = 120.0;
  bool fallback = true;
};

struct RagConfig {
  std::string corpus_dir;
  std::size_t chunk_max_chars = 800;
  std::size_t chunk_overlap = 100;
  std::size_t top_k = 3;
  std::optional<std::string> embedder_url;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8787;
};

struct RunConfig {
  std::string data_path;  // empty: <artifacts_dir>/data.csv
  SynthConfig synth;
  std::uint64_t synth_seed = 7;
  SplitSpec split;
  bool disjoint_validation = false;
  double smoothing_k = 10.0;
  RidgeSpec ridge;
  GbtGrid gbt_grid;
  LstmSpec lstm;
  RagConfig rag;
  GenerationConfig generation;
  ServiceConfig service;
  std::string artifacts_dir = "artifacts";

  /// Effective split after the disjoint flag.
  SplitSpec effective_split() const;
  std::string resolved_data_path() const;
  std::string models_dir() const;
  std::string report_path() const;
  std::string figures_dir() const;
  std::string index_path() const;
};

/// Corpus shipped with the source tree.
std::string default_corpus_dir();

/// Parses and validates a configuration document. Unknown keys and bad values
/// throw ConfigInvalid. Relative paths are resolved against `base_dir`.
RunConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
std::string config_to_json(const RunConfig& c);

/// Reads the file (ConfigInvalid when missing), then applies AMR_LLM_URL,
/// AMR_LLM_MODEL and AMR_EMBED_URL from the environment.
RunConfig load_config(const std::string& path);
void apply_env_overrides(RunConfig& c);

/// Writes the dataset to the configured data path.
Dataset run_synth(const RunConfig& c);
Dataset load_dataset(const RunConfig& c);

struct TrainOutput {
  std::vector<TrainedModel> models;  // ModelKind order
  GridSearchResult exact_search;
  GridSearchResult histogram_search;
};

/// Trains all six models and writes them under models/.
TrainOutput run_train(const RunConfig& c);
TrainOutput train_all(const PreparedData& data, const RunConfig& c);

std::vector<TrainedModel> load_models(const RunConfig& c);

/// Scores persisted models and writes report.json and figures/.
EvalReport run_evaluate(const RunConfig& c);
EvalReport load_report(const RunConfig& c);

std::unique_ptr<Embedder> make_embedder(const RunConfig& c);
std::unique_ptr<TextGenerator> make_generator(const RunConfig& c);

VectorIndex run_index(const RunConfig& c);

GroundedAnswer run_ask(const RunConfig& c, const std::string& question);
std::vector<GroundedAnswer> run_eval_rag(const RunConfig& c);

}  // namespace amr
