#pragma once

// The six forecasting models behind one train/predict contract.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "amr/features.hpp"

namespace amr {

enum class ModelKind : std::uint8_t { Naive, Linear, Ridge, GBTExact, GBTHistogram, LSTM };
inline constexpr std::size_t kModelKindCount = 6;
inline constexpr std::array<ModelKind, kModelKindCount> kAllModelKinds = {
    ModelKind::Naive,    ModelKind::Linear,       ModelKind::Ridge,
    ModelKind::GBTExact, ModelKind::GBTHistogram, ModelKind::LSTM};

/// Stable machine tag, e.g. "gbt_exact".
std::string_view model_tag(ModelKind k) noexcept;
/// Display name, e.g. "XGBoost-style GBT".
std::string_view model_display_name(ModelKind k) noexcept;
std::optional<ModelKind> parse_model_tag(std::string_view tag) noexcept;

struct RidgeSpec {
  std::vector<double> lambda_grid{0.01, 0.1, 1.0, 10.0, 100.0, 1000.0};
  std::size_t cv_folds = 5;
};

struct GbtSpec {
  double learning_rate = 0.1;
  int max_depth = 5;
  std::size_t n_estimators = 100;
  double subsample_ratio = 1.0;
  double reg_lambda = 1.0;
  double gamma = 0.0;
  std::size_t n_bins = 64;  // histogram mode only
  std::uint64_t seed = 42;  // row subsampling

  void validate() const;
};

struct LstmSpec {
  std::size_t hidden_size = 32;
  double learning_rate = 0.001;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::uint64_t seed = 7;
  std::size_t batch_size = 32;

  void validate() const;
};

struct LinearParams {
  double intercept = 0.0;
  std::vector<double> weights;
  double lambda = 0.0;
};

/// Flat tree node; `feature < 0` marks a leaf. Rows go left when value <= threshold.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double weight = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  /// Leaf weight reached by walking the tree with raw feature values.
  double leaf_value(std::span<const double> x) const noexcept;
  std::size_t depth() const;
};

struct TreeEnsemble {
  double base_score = 0.0;
  double learning_rate = 0.1;
  std::vector<Tree> trees;
};

/// Single-layer LSTM over length-1 sequences with a linear output head. All
/// trainable weights live in one flat vector; see lstm.hpp for the layout.
struct LstmParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::vector<double> theta;
  std::vector<double> x_mean;
  std::vector<double> x_sd;
  double y_mean = 0.0;
  double y_sd = 1.0;
};

struct NaiveParams {
  std::uint32_t lag_column = kLagColumn;
};

struct TrainingMeta {
  std::map<std::string, double> hyperparameters;
  std::size_t epochs_run = 0;
  std::vector<double> val_mae_trace;
  std::vector<double> train_mae_trace;
};

class TrainedModel {
 public:
  using Params = std::variant<NaiveParams, LinearParams, TreeEnsemble, LstmParams>;

  TrainedModel(ModelKind kind, std::size_t n_features, Params params);

  ModelKind kind() const noexcept { return kind_; }
  std::size_t n_features() const noexcept { return n_features_; }
  const Params& params() const noexcept { return params_; }

  /// Normalized gain vector over the matrix columns; absent for non-tree models
  /// and for ensembles that never split.
  const std::optional<std::vector<double>>& feature_importances() const noexcept {
    return importances_;
  }
  void set_feature_importances(std::optional<std::vector<double>> v) { importances_ = std::move(v); }

  TrainingMeta& meta() noexcept { return meta_; }
  const TrainingMeta& meta() const noexcept { return meta_; }

  /// Unclipped model output for one row.
  double raw_predict(std::span<const double> x) const;

  /// One finite prediction per row, clipped to [0, 100]. Throws ColumnMismatch.
  std::vector<double> predict(const FeatureMatrix& X) const;

 private:
  ModelKind kind_;
  std::size_t n_features_;
  Params params_;
  std::optional<std::vector<double>> importances_;
  TrainingMeta meta_;
};

inline double clip_percentage(double v) noexcept { return v < 0.0 ? 0.0 : (v > 100.0 ? 100.0 : v); }

TrainedModel train_naive(const FeatureMatrix& train);

/// OLS with intercept via centred normal equations.
TrainedModel train_linear(const FeatureMatrix& train);

/// Closed-form ridge fit for a fixed lambda (intercept unpenalized).
LinearParams fit_ridge(const FeatureMatrix& X, double lambda);

/// Ridge with lambda chosen by contiguous-block k-fold mean MAE (ties -> smaller lambda).
TrainedModel train_ridge(const FeatureMatrix& train, const RidgeSpec& spec);

enum class SplitMode : std::uint8_t { Exact, Histogram };

TrainedModel train_gbt(const FeatureMatrix& train, const GbtSpec& spec, SplitMode mode);

TrainedModel train_lstm(const FeatureMatrix& train, const FeatureMatrix& val, const LstmSpec& spec);

struct ImportanceEntry {
  std::size_t column = 0;
  std::string feature;       // matrix column name
  std::string display_name;  // e.g. "Resistance_lag1"
  double importance = 0.0;
};

/// Labeled gains sorted descending (ties by column). Throws UnsupportedModel for non-tree kinds.
std::vector<ImportanceEntry> feature_importance(const TrainedModel& m);

// Grid search over the four boosting hyperparameters.
struct GbtGrid {
  std::vector<double> learning_rate{0.05, 0.1, 0.3};
  std::vector<int> max_depth{3, 5, 7};
  std::vector<std::size_t> n_estimators{100, 300};
  std::vector<double> subsample{0.8, 1.0};
  double reg_lambda = 1.0;
  double gamma = 0.0;
  std::size_t n_bins = 64;
  std::uint64_t seed = 42;

  /// Every combination in lexicographic order (learning_rate outermost).
  std::vector<GbtSpec> expand() const;
};

struct GridPoint {
  GbtSpec spec;
  double val_mae = 0.0;
};

struct GridSearchResult {
  GbtSpec best;
  std::size_t best_index = 0;
  std::vector<GridPoint> evaluated;  // grid order
};

/// Trains every combination on `train`, scores MAE on `val`, picks the minimum
/// (first in grid order on ties). Configurations may be evaluated concurrently.
GridSearchResult grid_search(SplitMode family, const GbtGrid& grid, const FeatureMatrix& train,
                             const FeatureMatrix& val, bool parallel = true);

}  // namespace amr
