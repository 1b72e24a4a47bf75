#include "amr/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "amr/binary_io.hpp"
#include "amr/error.hpp"
#include "amr/model_io.hpp"

#ifndef AMR_DEFAULT_CORPUS_DIR
#define AMR_DEFAULT_CORPUS_DIR "corpus"
#endif

namespace amr {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) invalid(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) invalid("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    invalid("bad value for '" + where + key + "'");
  }
}

void read_opt_string(const json& obj, const char* key, const std::string& where, std::optional<std::string>& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (v.is_null()) {
    out.reset();
  } else if (v.is_string()) {
    out = v.get<std::string>();
    if (out->empty()) out.reset();
  } else {
    invalid("bad value for '" + where + key + "'");
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  if (path.is_absolute()) return p;
  return (fs::path(base) / path).lexically_normal().string();
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

SplitSpec RunConfig::effective_split() const {
  return disjoint_validation ? SplitSpec::disjoint_validation() : split;
}

std::string RunConfig::resolved_data_path() const {
  return data_path.empty() ? (fs::path(artifacts_dir) / "data.csv").string() : data_path;
}
std::string RunConfig::models_dir() const { return (fs::path(artifacts_dir) / "models").string(); }
std::string RunConfig::report_path() const { return (fs::path(artifacts_dir) / "report.json").string(); }
std::string RunConfig::figures_dir() const { return (fs::path(artifacts_dir) / "figures").string(); }
std::string RunConfig::index_path() const { return (fs::path(artifacts_dir) / "index.amridx").string(); }

std::string default_corpus_dir() { return AMR_DEFAULT_CORPUS_DIR; }

RunConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    invalid(std::string("configuration is not valid JSON: ") + e.what());
  }
  check_keys(j, "",
             {"data_path", "synth", "split", "smoothing_k", "ridge", "gbt_grid", "lstm", "rag", "generation",
              "service", "artifacts_dir"});

  RunConfig c;
  read(j, "data_path", "", c.data_path);
  read(j, "artifacts_dir", "", c.artifacts_dir);
  read(j, "smoothing_k", "", c.smoothing_k);

  if (j.contains("synth")) {
    const auto& s = j["synth"];
    check_keys(s, "synth",
               {"n_countries", "pairs_per_country", "first_year", "last_year", "ar_noise_sd", "consumption_effect",
                "seed"});
    read(s, "n_countries", "synth.", c.synth.n_countries);
    read(s, "pairs_per_country", "synth.", c.synth.pairs_per_country);
    read(s, "first_year", "synth.", c.synth.first_year);
    read(s, "last_year", "synth.", c.synth.last_year);
    read(s, "ar_noise_sd", "synth.", c.synth.ar_noise_sd);
    read(s, "consumption_effect", "synth.", c.synth.consumption_effect);
    read(s, "seed", "synth.", c.synth_seed);
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    check_keys(s, "split", {"train_years", "val_years", "test_years", "disjoint_validation"});
    read(s, "train_years", "split.", c.split.train_years);
    read(s, "val_years", "split.", c.split.val_years);
    read(s, "test_years", "split.", c.split.test_years);
    read(s, "disjoint_validation", "split.", c.disjoint_validation);
  }
  if (j.contains("ridge")) {
    const auto& s = j["ridge"];
    check_keys(s, "ridge", {"lambda_grid", "cv_folds"});
    read(s, "lambda_grid", "ridge.", c.ridge.lambda_grid);
    read(s, "cv_folds", "ridge.", c.ridge.cv_folds);
  }
  if (j.contains("gbt_grid")) {
    const auto& s = j["gbt_grid"];
    check_keys(s, "gbt_grid",
               {"learning_rate", "max_depth", "n_estimators", "subsample", "reg_lambda", "gamma", "n_bins", "seed"});
    read(s, "learning_rate", "gbt_grid.", c.gbt_grid.learning_rate);
    read(s, "max_depth", "gbt_grid.", c.gbt_grid.max_depth);
    read(s, "n_estimators", "gbt_grid.", c.gbt_grid.n_estimators);
    read(s, "subsample", "gbt_grid.", c.gbt_grid.subsample);
    read(s, "reg_lambda", "gbt_grid.", c.gbt_grid.reg_lambda);
    read(s, "gamma", "gbt_grid.", c.gbt_grid.gamma);
    read(s, "n_bins", "gbt_grid.", c.gbt_grid.n_bins);
    read(s, "seed", "gbt_grid.", c.gbt_grid.seed);
  }
  if (j.contains("lstm")) {
    const auto& s = j["lstm"];
    check_keys(s, "lstm", {"hidden_size", "learning_rate", "max_epochs", "patience", "seed", "batch_size"});
    read(s, "hidden_size", "lstm.", c.lstm.hidden_size);
    read(s, "learning_rate", "lstm.", c.lstm.learning_rate);
    read(s, "max_epochs", "lstm.", c.lstm.max_epochs);
    read(s, "patience", "lstm.", c.lstm.patience);
    read(s, "seed", "lstm.", c.lstm.seed);
    read(s, "batch_size", "lstm.", c.lstm.batch_size);
  }
  if (j.contains("rag")) {
    const auto& s = j["rag"];
    check_keys(s, "rag", {"corpus_dir", "chunk_max_chars", "chunk_overlap", "top_k", "embedder_url"});
    read(s, "corpus_dir", "rag.", c.rag.corpus_dir);
    read(s, "chunk_max_chars", "rag.", c.rag.chunk_max_chars);
    read(s, "chunk_overlap", "rag.", c.rag.chunk_overlap);
    read(s, "top_k", "rag.", c.rag.top_k);
    read_opt_string(s, "embedder_url", "rag.", c.rag.embedder_url);
  }
  if (j.contains("generation")) {
    const auto& s = j["generation"];
    check_keys(s, "generation", {"url", "model", "timeout_s", "fallback"});
    read_opt_string(s, "url", "generation.", c.generation.url);
    read(s, "model", "generation.", c.generation.model);
    read(s, "timeout_s", "generation.", c.generation.timeout_s);
    read(s, "fallback", "generation.", c.generation.fallback);
  }
  if (j.contains("service")) {
    const auto& s = j["service"];
    check_keys(s, "service", {"host", "port"});
    read(s, "host", "service.", c.service.host);
    read(s, "port", "service.", c.service.port);
  }

  if (c.artifacts_dir.empty()) invalid("artifacts_dir must not be empty");
  if (!(c.smoothing_k >= 0.0)) invalid("smoothing_k must be >= 0");
  if (c.synth.n_countries == 0 || c.synth.pairs_per_country == 0) invalid("synth sizes must be positive");
  if (c.synth.last_year <= c.synth.first_year) invalid("synth.last_year must exceed synth.first_year");
  if (!(c.synth.ar_noise_sd >= 0.0)) invalid("synth.ar_noise_sd must be >= 0");
  if (c.ridge.lambda_grid.empty()) invalid("ridge.lambda_grid must not be empty");
  for (double l : c.ridge.lambda_grid)
    if (!(l >= 0.0)) invalid("ridge.lambda_grid values must be >= 0");
  if (c.ridge.cv_folds < 2) invalid("ridge.cv_folds must be >= 2");
  if (c.rag.chunk_max_chars <= c.rag.chunk_overlap) invalid("rag.chunk_max_chars must exceed rag.chunk_overlap");
  if (c.rag.top_k == 0) invalid("rag.top_k must be >= 1");
  if (!(c.generation.timeout_s > 0.0)) invalid("generation.timeout_s must be positive");
  if (c.service.port < 0 || c.service.port > 65535) invalid("service.port out of range");
  try {
    c.effective_split().validate();
    for (const auto& s : c.gbt_grid.expand()) s.validate();
    if (c.gbt_grid.expand().empty()) invalid("gbt_grid must not be empty");
    c.lstm.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    invalid(e.what());
  }

  c.data_path = resolve(base_dir, c.data_path);
  c.artifacts_dir = resolve(base_dir, c.artifacts_dir);
  c.rag.corpus_dir = resolve(base_dir, c.rag.corpus_dir);
  return c;
}

std::string config_to_json(const RunConfig& c) {
  ordered_json j;
  j["data_path"] = c.data_path;
  j["artifacts_dir"] = c.artifacts_dir;
  j["synth"] = {{"n_countries", c.synth.n_countries},
                {"pairs_per_country", c.synth.pairs_per_country},
                {"first_year", c.synth.first_year},
                {"last_year", c.synth.last_year},
                {"ar_noise_sd", c.synth.ar_noise_sd},
                {"consumption_effect", c.synth.consumption_effect},
                {"seed", c.synth_seed}};
  j["split"] = {{"train_years", c.split.train_years},
                {"val_years", c.split.val_years},
                {"test_years", c.split.test_years},
                {"disjoint_validation", c.disjoint_validation}};
  j["smoothing_k"] = c.smoothing_k;
  j["ridge"] = {{"lambda_grid", c.ridge.lambda_grid}, {"cv_folds", c.ridge.cv_folds}};
  j["gbt_grid"] = {{"learning_rate", c.gbt_grid.learning_rate}, {"max_depth", c.gbt_grid.max_depth},
                   {"n_estimators", c.gbt_grid.n_estimators},   {"subsample", c.gbt_grid.subsample},
                   {"reg_lambda", c.gbt_grid.reg_lambda},       {"gamma", c.gbt_grid.gamma},
                   {"n_bins", c.gbt_grid.n_bins},               {"seed", c.gbt_grid.seed}};
  j["lstm"] = {{"hidden_size", c.lstm.hidden_size}, {"learning_rate", c.lstm.learning_rate},
               {"max_epochs", c.lstm.max_epochs},   {"patience", c.lstm.patience},
               {"seed", c.lstm.seed},               {"batch_size", c.lstm.batch_size}};
  j["rag"] = {{"corpus_dir", c.rag.corpus_dir},
              {"chunk_max_chars", c.rag.chunk_max_chars},
              {"chunk_overlap", c.rag.chunk_overlap},
              {"top_k", c.rag.top_k},
              {"embedder_url", opt_json(c.rag.embedder_url)}};
  j["generation"] = {{"url", opt_json(c.generation.url)},
                     {"model", c.generation.model},
                     {"timeout_s", c.generation.timeout_s},
                     {"fallback", c.generation.fallback}};
  j["service"] = {{"host", c.service.host}, {"port", c.service.port}};
  return j.dump(2) + "\n";
}

void apply_env_overrides(RunConfig& c) {
  if (const char* v = std::getenv("AMR_LLM_URL")) {
    if (*v) {
      c.generation.url = v;
    } else {
      c.generation.url.reset();
    }
  }
  if (const char* v = std::getenv("AMR_LLM_MODEL"); v && *v) c.generation.model = v;
  if (const char* v = std::getenv("AMR_EMBED_URL")) {
    if (*v) {
      c.rag.embedder_url = v;
    } else {
      c.rag.embedder_url.reset();
    }
  }
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    invalid("configuration file '" + path + "' not found; run `amr synth` to create one");
  }
  auto base = fs::path(path).parent_path().string();
  auto c = parse_config(text, base.empty() ? "." : base);
  apply_env_overrides(c);
  return c;
}

Dataset run_synth(const RunConfig& c) {
  auto d = synthesize_dataset(c.synth, c.synth_seed);
  const auto path = c.resolved_data_path();
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_file(path, render_dataset(d));
  return d;
}

Dataset load_dataset(const RunConfig& c) {
  const auto path = c.resolved_data_path();
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::ArtifactMissing, "no dataset at '" + path + "'; run `amr synth` or set data_path");
  }
  return parse_dataset(text);
}

namespace {

PipelineConfig pipeline_config(const RunConfig& c) {
  PipelineConfig p;
  p.split = c.effective_split();
  p.smoothing_k = c.smoothing_k;
  return p;
}

std::string model_path(const RunConfig& c, ModelKind k) {
  return (fs::path(c.models_dir()) / (std::string(model_tag(k)) + ".amrm")).string();
}

ordered_json search_to_json(const GridSearchResult& r) {
  ordered_json j;
  j["best_index"] = r.best_index;
  auto pts = ordered_json::array();
  for (const auto& p : r.evaluated) {
    pts.push_back({{"learning_rate", p.spec.learning_rate},
                   {"max_depth", p.spec.max_depth},
                   {"n_estimators", p.spec.n_estimators},
                   {"subsample", p.spec.subsample_ratio},
                   {"val_mae", p.val_mae}});
  }
  j["evaluated"] = std::move(pts);
  return j;
}

}  // namespace

TrainOutput train_all(const PreparedData& data, const RunConfig& c) {
  TrainOutput out;
  const auto& tr = data.train.X;
  const auto& va = data.val.X;
  out.models.push_back(train_naive(tr));
  out.models.push_back(train_linear(tr));
  out.models.push_back(train_ridge(tr, c.ridge));
  out.exact_search = grid_search(SplitMode::Exact, c.gbt_grid, tr, va);
  out.models.push_back(train_gbt(tr, out.exact_search.best, SplitMode::Exact));
  out.histogram_search = grid_search(SplitMode::Histogram, c.gbt_grid, tr, va);
  out.models.push_back(train_gbt(tr, out.histogram_search.best, SplitMode::Histogram));
  out.models.push_back(train_lstm(tr, va, c.lstm));
  return out;
}

TrainOutput run_train(const RunConfig& c) {
  const auto data = prepare_features(load_dataset(c), pipeline_config(c));
  auto out = train_all(data, c);
  fs::create_directories(c.models_dir());
  for (const auto& m : out.models) save_model(m, model_path(c, m.kind()));
  ordered_json grid;
  grid["gbt_exact"] = search_to_json(out.exact_search);
  grid["gbt_histogram"] = search_to_json(out.histogram_search);
  write_file((fs::path(c.artifacts_dir) / "grid_search.json").string(), grid.dump(2) + "\n");
  return out;
}

std::vector<TrainedModel> load_models(const RunConfig& c) {
  std::vector<TrainedModel> models;
  for (auto k : kAllModelKinds) {
    auto m = load_model(model_path(c, k));
    if (m.kind() != k) throw Error(ErrorCode::CorruptModel, model_path(c, k) + " holds a different model kind");
    models.push_back(std::move(m));
  }
  return models;
}

EvalReport run_evaluate(const RunConfig& c) {
  const auto models = load_models(c);
  const auto data = prepare_features(load_dataset(c), pipeline_config(c));
  auto report = build_report(models, data);
  fs::create_directories(c.artifacts_dir);
  write_file(c.report_path(), report_to_json(report));
  emit_figure_data(report, c.figures_dir());
  return report;
}

EvalReport load_report(const RunConfig& c) {
  std::string text;
  try {
    text = read_file(c.report_path());
  } catch (const Error&) {
    throw Error(ErrorCode::ArtifactMissing, "no report at '" + c.report_path() + "'; run `amr evaluate` first");
  }
  return report_from_json(text);
}

std::unique_ptr<Embedder> make_embedder(const RunConfig& c) {
  if (c.rag.embedder_url) return std::make_unique<HttpEmbedder>(*c.rag.embedder_url);
  return std::make_unique<HashingEmbedder>();
}

std::unique_ptr<TextGenerator> make_generator(const RunConfig& c) {
  if (!c.generation.url) return nullptr;
  return std::make_unique<HttpGenerator>(*c.generation.url, c.generation.model, c.generation.timeout_s);
}

VectorIndex run_index(const RunConfig& c) {
  const auto dir = c.rag.corpus_dir.empty() ? default_corpus_dir() : c.rag.corpus_dir;
  const auto chunks = chunk_corpus(load_corpus(dir), c.rag.chunk_max_chars, c.rag.chunk_overlap);
  const auto embedder = make_embedder(c);
  auto idx = build_index(chunks, *embedder);
  fs::create_directories(c.artifacts_dir);
  save_index(idx, c.index_path());
  return idx;
}

namespace {

AnswerOptions answer_options(const RunConfig& c) {
  AnswerOptions o;
  o.k = c.rag.top_k;
  o.fallback_on_failure = c.generation.fallback;
  return o;
}

}  // namespace

GroundedAnswer run_ask(const RunConfig& c, const std::string& question) {
  if (question.empty()) throw Error(ErrorCode::EmptyText, "question must not be empty");
  const auto idx = load_index(c.index_path());
  const auto report = load_report(c);
  const auto embedder = make_embedder(c);
  const auto generator = make_generator(c);
  return answer_question(question, idx, *embedder, report, generator.get(), answer_options(c));
}

std::vector<GroundedAnswer> run_eval_rag(const RunConfig& c) {
  const auto idx = load_index(c.index_path());
  const auto report = load_report(c);
  const auto embedder = make_embedder(c);
  const auto generator = make_generator(c);
  std::vector<GroundedAnswer> out;
  for (auto q : kPolicyQuestions)
    out.push_back(answer_question(std::string(q), idx, *embedder, report, generator.get(), answer_options(c)));
  return out;
}

}  // namespace amr
