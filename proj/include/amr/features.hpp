#pragma once

// Design-matrix construction: lag-1 resistance, training-only median
// imputation, smoothed target encoding and the calendar-year split.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "amr/data_model.hpp"

namespace amr {

/// Observation plus its prior-year resistance for the same series.
struct FeatureRow {
  Observation obs;
  std::optional<double> resistance_lag1;

  bool operator==(const FeatureRow&) const = default;
};

/// lag1(y) = resistance of the same (country, pathogen, antibiotic) at y - 1, when present.
std::vector<FeatureRow> compute_lag(const Dataset& d);

struct SplitSpec {
  std::set<int> train_years{2021, 2022};
  std::set<int> val_years{2022};
  std::set<int> test_years{2023};

  /// Train {2021}, validation {2022}, test {2023}: no year shared between train and validation.
  static SplitSpec disjoint_validation();
  void validate() const;
};

struct Partitions {
  std::vector<FeatureRow> train;
  std::vector<FeatureRow> val;
  std::vector<FeatureRow> test;
};

/// Assigns rows purely by year. Throws EmptyPartition when any partition is empty.
Partitions temporal_split(std::span<const FeatureRow> rows, const SplitSpec& spec);

using PairKey = std::pair<std::string, std::string>;  // (pathogen, antibiotic)

struct ImputationStats {
  std::map<PairKey, double> pair_median;
  double global_median = 0.0;
  double consumption_median = 0.0;

  /// Pair median, or the global median for pairs absent from training.
  double resistance_for(const std::string& pathogen, const std::string& antibiotic) const;

  bool operator==(const ImputationStats&) const = default;
};

/// Median of the values; even counts average the two central values. Empty input -> nullopt.
std::optional<double> median(std::vector<double> values);

ImputationStats fit_imputation(std::span<const FeatureRow> train_rows);
std::vector<FeatureRow> apply_imputation(std::span<const FeatureRow> rows,
                                         const ImputationStats& stats);

enum class CategoricalColumn : std::size_t { Country, Region, Income, Pathogen, Antibiotic };
inline constexpr std::size_t kCategoricalCount = 5;

struct EncoderState {
  std::array<std::map<std::string, double>, kCategoricalCount> levels;
  double prior = 0.0;
  double smoothing_k = 10.0;

  double encode(CategoricalColumn column, const std::string& level) const;

  bool operator==(const EncoderState&) const = default;
};

/// encoded(level) = (n * mean_level + k * prior) / (n + k); prior = training target mean.
EncoderState fit_target_encoder(std::span<const FeatureRow> train_rows, double smoothing_k);

/// Level string used for a categorical column of an observation.
std::string categorical_level(const Observation& o, CategoricalColumn column);

inline constexpr std::size_t kFeatureCount = 8;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "year",        "resistance_lag1", "consumption_did", "enc_country",
    "enc_region",  "enc_income",      "enc_pathogen",    "enc_antibiotic"};
inline constexpr std::size_t kLagColumn = 1;

/// Human-readable column label, e.g. "Resistance_lag1" or "CountryTerritoryArea".
std::string_view feature_display_name(std::size_t column) noexcept;

/// Dense row-major design matrix aligned row-for-row with its source rows.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }
  std::vector<double> column(std::size_t c) const;

  std::span<const double> target() const noexcept { return target_; }
  std::vector<double>& target() noexcept { return target_; }

  std::span<const double> values() const noexcept { return values_; }

  /// Rows selected by index, in the given order.
  FeatureMatrix select(std::span<const std::size_t> indices) const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<double> target_;
};

/// Builds the fixed-order matrix; unseen levels map to the prior.
FeatureMatrix apply_encoder(std::span<const FeatureRow> rows, const EncoderState& e);

struct PipelineConfig {
  SplitSpec split;
  double smoothing_k = 10.0;
};

/// One encoded partition plus the metadata evaluation needs.
struct PreparedPartition {
  FeatureMatrix X;
  std::vector<WhoRegion> regions;
  std::vector<FeatureRow> rows;  // imputed source rows
};

struct PreparedData {
  PreparedPartition train;
  PreparedPartition val;
  PreparedPartition test;
  ImputationStats imputation;
  EncoderState encoder;
  SplitSpec split;
};

/// lag -> split -> fit imputation on train -> impute all -> fit encoder on train -> encode.
PreparedData prepare_features(const Dataset& d, const PipelineConfig& config);

}  // namespace amr
