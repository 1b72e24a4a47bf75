#include <algorithm>
#include <cmath>

#include "amr/error.hpp"
#include "amr/lstm.hpp"
#include "amr/models.hpp"

namespace amr {

std::string_view model_tag(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::Naive: return "naive";
    case ModelKind::Linear: return "linear";
    case ModelKind::Ridge: return "ridge";
    case ModelKind::GBTExact: return "gbt_exact";
    case ModelKind::GBTHistogram: return "gbt_histogram";
    case ModelKind::LSTM: return "lstm";
  }
  return "unknown";
}

std::string_view model_display_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::Naive: return "Naive Baseline";
    case ModelKind::Linear: return "Linear Regression";
    case ModelKind::Ridge: return "Ridge Regression";
    case ModelKind::GBTExact: return "XGBoost-style GBT";
    case ModelKind::GBTHistogram: return "LightGBM-style GBT";
    case ModelKind::LSTM: return "LSTM";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_tag(std::string_view tag) noexcept {
  for (auto k : kAllModelKinds)
    if (model_tag(k) == tag) return k;
  return std::nullopt;
}

TrainedModel::TrainedModel(ModelKind kind, std::size_t n_features, Params params)
    : kind_(kind), n_features_(n_features), params_(std::move(params)) {}

double TrainedModel::raw_predict(std::span<const double> x) const {
  struct Visitor {
    std::span<const double> x;
    double operator()(const NaiveParams& p) const { return x[p.lag_column]; }
    double operator()(const LinearParams& p) const {
      double s = p.intercept;
      for (std::size_t j = 0; j < p.weights.size(); ++j) s += p.weights[j] * x[j];
      return s;
    }
    double operator()(const TreeEnsemble& e) const {
      double s = e.base_score;
      for (const auto& t : e.trees) s += e.learning_rate * t.leaf_value(x);
      return s;
    }
    double operator()(const LstmParams& p) const { return lstm::predict_row(p, x); }
  };
  return std::visit(Visitor{x}, params_);
}

std::vector<double> TrainedModel::predict(const FeatureMatrix& X) const {
  if (X.cols() != n_features_) {
    throw Error(ErrorCode::ColumnMismatch, "model expects " + std::to_string(n_features_) +
                                               " columns, matrix has " + std::to_string(X.cols()));
  }
  std::vector<double> out(X.rows());
  const auto n = static_cast<std::ptrdiff_t>(X.rows());
#pragma omp parallel for schedule(static) if (n >= 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    const double v = raw_predict(X.row(r));
    out[r] = std::isfinite(v) ? clip_percentage(v) : 0.0;
  }
  return out;
}

TrainedModel train_naive(const FeatureMatrix& train) {
  if (train.cols() <= kLagColumn) {
    throw Error(ErrorCode::ColumnMismatch, "naive model needs the resistance_lag1 column");
  }
  return TrainedModel(ModelKind::Naive, train.cols(), NaiveParams{});
}

std::vector<ImportanceEntry> feature_importance(const TrainedModel& m) {
  if (m.kind() != ModelKind::GBTExact && m.kind() != ModelKind::GBTHistogram) {
    throw Error(ErrorCode::UnsupportedModel,
                "feature importance is defined for tree ensembles, not " +
                    std::string(model_tag(m.kind())));
  }
  std::vector<ImportanceEntry> out;
  const auto& imp = m.feature_importances();
  for (std::size_t c = 0; c < m.n_features(); ++c) {
    ImportanceEntry e;
    e.column = c;
    e.feature = c < kFeatureCount ? std::string(kFeatureNames[c]) : "f" + std::to_string(c);
    e.display_name = std::string(feature_display_name(c));
    e.importance = imp ? (*imp)[c] : 0.0;
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.importance > b.importance;
  });
  return out;
}

}  // namespace amr
