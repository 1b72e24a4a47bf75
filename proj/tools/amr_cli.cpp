// amr: command-line driver for the forecasting benchmark and the policy assistant.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "amr/binary_io.hpp"
#include "amr/error.hpp"
#include "amr/pipeline.hpp"
#include "amr/service.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

amr::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

std::string summary_json(const amr::Dataset& d) {
  const auto s = amr::dataset_summary(d);
  ordered_json j;
  j["rows"] = s.total;
  j["countries"] = s.countries;
  ordered_json regions;
  for (auto r : amr::kAllRegions) regions[std::string(amr::region_name(r))] = s.per_region[static_cast<std::size_t>(r)];
  j["per_region"] = regions;
  ordered_json years;
  for (const auto& [y, n] : s.per_year) years[std::to_string(y)] = n;
  j["per_year"] = years;
  j["missing_resistance"] = s.missing_resistance;
  j["missing_consumption"] = s.missing_consumption;
  return j.dump(2);
}

std::string answers_json(const std::vector<amr::GroundedAnswer>& answers) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < answers.size(); ++i) {
    out += amr::answer_to_json(answers[i], 2);
    out += i + 1 < answers.size() ? ",\n" : "\n";
  }
  return out + "]\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AMR resistance forecasting benchmark and grounded policy assistant"};
  app.require_subcommand(1);
  std::string config_path = "amr.json";
  app.add_option("-c,--config", config_path, "Run configuration file")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic surveillance dataset (creates the config if absent)");
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> countries, pairs;
  std::optional<double> noise;
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--countries", countries, "Number of countries");
  synth->add_option("--pairs", pairs, "Pathogen-antibiotic pairs per country");
  synth->add_option("--noise", noise, "AR(1) noise standard deviation");

  auto* ingest = app.add_subcommand("ingest", "Validate a surveillance CSV and summarize it");
  std::string input;
  ingest->add_option("-i,--input", input, "CSV to validate and copy to the configured data path");

  auto* train = app.add_subcommand("train", "Train all six models");
  auto* evaluate = app.add_subcommand("evaluate", "Score models and write the report and figure data");
  auto* report = app.add_subcommand("report", "Print the evaluation report");
  auto* index = app.add_subcommand("index", "Chunk, embed and index the policy corpus");

  auto* ask = app.add_subcommand("ask", "Answer one question with citations");
  std::string question;
  ask->add_option("question", question, "Question text")->required();

  auto* eval_rag = app.add_subcommand("eval-rag", "Answer the five built-in policy questions");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::optional<std::string> host;
  std::optional<int> port;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      amr::RunConfig c;
      const bool have_config = fs::exists(config_path);
      if (have_config) c = amr::load_config(config_path);
      if (seed) c.synth_seed = *seed;
      if (countries) c.synth.n_countries = *countries;
      if (pairs) c.synth.pairs_per_country = *pairs;
      if (noise) c.synth.ar_noise_sd = *noise;
      if (!have_config) {
        if (const auto parent = fs::path(config_path).parent_path(); !parent.empty()) fs::create_directories(parent);
        amr::write_file(config_path, amr::config_to_json(c));
        c = amr::load_config(config_path);
      }
      const auto d = amr::run_synth(c);
      std::printf("wrote %zu rows to %s\n", d.rows.size(), c.resolved_data_path().c_str());
      return 0;
    }

    const auto c = amr::load_config(config_path);

    if (ingest->parsed()) {
      amr::Dataset d;
      if (!input.empty()) {
        d = amr::parse_dataset(amr::read_file(input));
        const auto path = c.resolved_data_path();
        if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
        amr::write_file(path, amr::render_dataset(d));
      } else {
        d = amr::load_dataset(c);
      }
      std::printf("%s\n", summary_json(d).c_str());
    } else if (train->parsed()) {
      const auto out = amr::run_train(c);
      for (const auto& m : out.models) {
        std::printf("trained %s\n", std::string(amr::model_tag(m.kind())).c_str());
      }
      std::printf("models written to %s\n", c.models_dir().c_str());
    } else if (evaluate->parsed()) {
      const auto r = amr::run_evaluate(c);
      std::printf("best model: %s (test MAE %.2f)\nreport written to %s\n",
                  std::string(amr::model_display_name(r.best_model)).c_str(), r.row(r.best_model)->mae,
                  c.report_path().c_str());
    } else if (report->parsed()) {
      std::printf("%s", amr::render_report(amr::load_report(c)).c_str());
    } else if (index->parsed()) {
      const auto idx = amr::run_index(c);
      std::printf("indexed %zu chunks into %s\n", idx.size(), c.index_path().c_str());
    } else if (ask->parsed()) {
      std::printf("%s\n", amr::answer_to_json(amr::run_ask(c, question)).c_str());
    } else if (eval_rag->parsed()) {
      const auto text = answers_json(amr::run_eval_rag(c));
      amr::write_file((fs::path(c.artifacts_dir) / "rag_eval.json").string(), text);
      std::printf("%s", text.c_str());
    } else if (serve->parsed()) {
      amr::Service service(c);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const auto h = host.value_or(c.service.host);
      const int p = port.value_or(c.service.port);
      std::fprintf(stderr, "serving on http://%s:%d (report %s, index %s)\n", h.c_str(), p,
                   service.report_loaded() ? "loaded" : "missing", service.index_loaded() ? "loaded" : "missing");
      if (!service.listen(h, p)) {
        g_service = nullptr;
        throw amr::Error(amr::ErrorCode::Io, "cannot bind " + h + ":" + std::to_string(p));
      }
      g_service = nullptr;
    }
  } catch (const amr::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(amr::to_string(e.code())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
