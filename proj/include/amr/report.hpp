#pragma once

// EvalReport: the per-model comparison, regional disaggregation and importance
// table. It is the only source of forecast context for the policy assistant.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amr/features.hpp"
#include "amr/metrics.hpp"
#include "amr/models.hpp"

namespace amr {

inline constexpr int kReportVersion = 1;

struct ModelRow {
  ModelKind kind = ModelKind::Naive;
  double val_mae = 0.0;
  double mae = 0.0;  // test partition
  double rmse = 0.0;
  std::optional<double> r2;
  std::optional<double> improvement_vs_naive_pct;  // one decimal; absent when naive MAE is 0
  std::map<std::string, double> hyperparameters;
};

struct ResidualRow {
  std::size_t row = 0;
  WhoRegion region = WhoRegion::African;
  double y = 0.0;
  double yhat = 0.0;
  double residual = 0.0;  // y - yhat
};

struct EvalReport {
  int report_version = kReportVersion;
  std::vector<ModelRow> models;  // ModelKind order
  ModelKind best_model = ModelKind::Naive;
  RegionalTable regional;        // best model
  std::map<ModelKind, RegionalTable> regional_by_model;
  ModelKind importance_model = ModelKind::GBTExact;
  std::vector<ImportanceEntry> importance;
  SplitSpec split;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::optional<std::string> generated_at;
  std::vector<ResidualRow> residuals;  // best model; written to figure data, not to JSON

  const ModelRow* row(ModelKind k) const noexcept;
};

/// Scores every model on the prepared partitions. All six kinds must be
/// present (MissingModel otherwise). The best model is the argmin of test MAE;
/// the importance table comes from the better of the two boosted ensembles.
EvalReport build_report(const std::vector<TrainedModel>& models, const PreparedData& data);

/// Plain-text rendering with one "improvement vs naive" line per model.
std::string render_report(const EvalReport& r);

/// Versioned JSON document (2-space indent, stable key order).
std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);

/// Writes model_comparison.csv, feature_importance.csv, regional_mae.csv and
/// residuals.csv into `dir` (created if needed).
void emit_figure_data(const EvalReport& r, const std::string& dir);

}  // namespace amr
