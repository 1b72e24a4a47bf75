#include "amr/features.hpp"

#include <algorithm>
#include <tuple>

#include "amr/error.hpp"

namespace amr {

namespace {

using SeriesKey = std::tuple<std::string_view, std::string_view, std::string_view, int>;

std::string years_to_string(const std::set<int>& years) {
  std::string s = "{";
  for (int y : years) {
    if (s.size() > 1) s += ",";
    s += std::to_string(y);
  }
  return s + "}";
}

}  // namespace

std::vector<FeatureRow> compute_lag(const Dataset& d) {
  std::map<SeriesKey, std::optional<double>> by_key;
  for (const auto& o : d.rows) {
    by_key.emplace(SeriesKey{o.country, o.pathogen, o.antibiotic, o.year}, o.resistance_pct);
  }
  std::vector<FeatureRow> out;
  out.reserve(d.rows.size());
  for (const auto& o : d.rows) {
    FeatureRow fr{o, std::nullopt};
    auto it = by_key.find(SeriesKey{o.country, o.pathogen, o.antibiotic, o.year - 1});
    if (it != by_key.end()) fr.resistance_lag1 = it->second;
    out.push_back(std::move(fr));
  }
  return out;
}

SplitSpec SplitSpec::disjoint_validation() {
  SplitSpec s;
  s.train_years = {2021};
  s.val_years = {2022};
  s.test_years = {2023};
  return s;
}

void SplitSpec::validate() const {
  if (train_years.empty() || val_years.empty() || test_years.empty()) {
    throw Error(ErrorCode::InvalidSplit, "train, validation and test year sets must be non-empty");
  }
  for (int y : test_years) {
    if (train_years.contains(y)) {
      throw Error(ErrorCode::InvalidSplit,
                  "test year " + std::to_string(y) + " also appears in the training years");
    }
  }
}

Partitions temporal_split(std::span<const FeatureRow> rows, const SplitSpec& spec) {
  spec.validate();
  Partitions p;
  for (const auto& r : rows) {
    const int y = r.obs.year;
    if (spec.train_years.contains(y)) p.train.push_back(r);
    if (spec.val_years.contains(y)) p.val.push_back(r);
    if (spec.test_years.contains(y)) p.test.push_back(r);
  }
  auto check = [](const std::vector<FeatureRow>& part, const char* name, const std::set<int>& ys) {
    if (part.empty()) {
      throw Error(ErrorCode::EmptyPartition,
                  std::string(name) + " partition " + years_to_string(ys) + " has no rows");
    }
  };
  check(p.train, "train", spec.train_years);
  check(p.val, "validation", spec.val_years);
  check(p.test, "test", spec.test_years);
  return p;
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

double ImputationStats::resistance_for(const std::string& pathogen,
                                       const std::string& antibiotic) const {
  auto it = pair_median.find(PairKey{pathogen, antibiotic});
  return it == pair_median.end() ? global_median : it->second;
}

ImputationStats fit_imputation(std::span<const FeatureRow> train_rows) {
  std::map<PairKey, std::vector<double>> per_pair;
  std::vector<double> all;
  std::vector<double> consumption;
  for (const auto& r : train_rows) {
    if (r.obs.resistance_pct) {
      per_pair[PairKey{r.obs.pathogen, r.obs.antibiotic}].push_back(*r.obs.resistance_pct);
      all.push_back(*r.obs.resistance_pct);
    }
    if (r.obs.consumption_did) consumption.push_back(*r.obs.consumption_did);
  }
  auto global = median(all);
  if (!global) {
    throw Error(ErrorCode::NoObservedValues, "no observed resistance values in the training rows");
  }
  ImputationStats s;
  s.global_median = *global;
  for (auto& [key, values] : per_pair) s.pair_median.emplace(key, *median(std::move(values)));
  // No consumption in training at all: fall back to zero use rather than fail.
  s.consumption_median = median(std::move(consumption)).value_or(0.0);
  return s;
}

std::vector<FeatureRow> apply_imputation(std::span<const FeatureRow> rows,
                                         const ImputationStats& stats) {
  std::vector<FeatureRow> out(rows.begin(), rows.end());
  for (auto& r : out) {
    if (!r.obs.resistance_pct || !r.resistance_lag1) {
      const double fill = stats.resistance_for(r.obs.pathogen, r.obs.antibiotic);
      if (!r.obs.resistance_pct) r.obs.resistance_pct = fill;
      if (!r.resistance_lag1) r.resistance_lag1 = fill;
    }
    if (!r.obs.consumption_did) r.obs.consumption_did = stats.consumption_median;
  }
  return out;
}

std::string categorical_level(const Observation& o, CategoricalColumn column) {
  switch (column) {
    case CategoricalColumn::Country: return o.country;
    case CategoricalColumn::Region: return std::string(region_name(o.who_region));
    case CategoricalColumn::Income: return std::string(income_name(o.income_group));
    case CategoricalColumn::Pathogen: return o.pathogen;
    case CategoricalColumn::Antibiotic: return o.antibiotic;
  }
  return {};
}

double EncoderState::encode(CategoricalColumn column, const std::string& level) const {
  const auto& m = levels[static_cast<std::size_t>(column)];
  auto it = m.find(level);
  return it == m.end() ? prior : it->second;
}

EncoderState fit_target_encoder(std::span<const FeatureRow> train_rows, double smoothing_k) {
  if (!(smoothing_k >= 0.0)) throw Error(ErrorCode::InvalidSpec, "smoothing_k must be >= 0");
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : train_rows) {
    if (!r.obs.resistance_pct) continue;
    total += *r.obs.resistance_pct;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyTraining, "target encoder needs training targets");

  EncoderState e;
  e.smoothing_k = smoothing_k;
  e.prior = total / static_cast<double>(n);
  for (std::size_t c = 0; c < kCategoricalCount; ++c) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& r : train_rows) {
      if (!r.obs.resistance_pct) continue;
      auto& [sum, count] = acc[categorical_level(r.obs, static_cast<CategoricalColumn>(c))];
      sum += *r.obs.resistance_pct;
      ++count;
    }
    for (const auto& [level, sc] : acc) {
      const auto cnt = static_cast<double>(sc.second);
      // n * mean = sum, so the smoothed mean avoids an extra division.
      e.levels[c].emplace(level, (sc.first + smoothing_k * e.prior) / (cnt + smoothing_k));
    }
  }
  return e;
}

std::string_view feature_display_name(std::size_t column) noexcept {
  static constexpr std::array<std::string_view, kFeatureCount> kDisplay = {
      "Year",           "Resistance_lag1", "Antibiotic consumption (DID)", "CountryTerritoryArea",
      "WHORegion",      "IncomeGroup",     "PathogenName",                 "AntibioticName"};
  return column < kFeatureCount ? kDisplay[column] : std::string_view{"?"};
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0), target_(rows, 0.0) {}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  FeatureMatrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.values_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    out.target_[i] = target_[indices[i]];
  }
  return out;
}

FeatureMatrix apply_encoder(std::span<const FeatureRow> rows, const EncoderState& e) {
  FeatureMatrix X(rows.size(), kFeatureCount);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    X(i, 0) = static_cast<double>(r.obs.year);
    X(i, 1) = r.resistance_lag1.value_or(e.prior);
    X(i, 2) = r.obs.consumption_did.value_or(0.0);
    for (std::size_t c = 0; c < kCategoricalCount; ++c) {
      const auto col = static_cast<CategoricalColumn>(c);
      X(i, 3 + c) = e.encode(col, categorical_level(r.obs, col));
    }
    X.target()[i] = r.obs.resistance_pct.value_or(e.prior);
  }
  return X;
}

PreparedData prepare_features(const Dataset& d, const PipelineConfig& config) {
  auto lagged = compute_lag(d);
  auto parts = temporal_split(lagged, config.split);

  PreparedData out;
  out.split = config.split;
  out.imputation = fit_imputation(parts.train);

  auto encode_part = [&](std::vector<FeatureRow>& raw, PreparedPartition& dst) {
    dst.rows = apply_imputation(raw, out.imputation);
    dst.regions.reserve(dst.rows.size());
    for (const auto& r : dst.rows) dst.regions.push_back(r.obs.who_region);
  };
  encode_part(parts.train, out.train);
  encode_part(parts.val, out.val);
  encode_part(parts.test, out.test);

  out.encoder = fit_target_encoder(out.train.rows, config.smoothing_k);
  out.train.X = apply_encoder(out.train.rows, out.encoder);
  out.val.X = apply_encoder(out.val.rows, out.encoder);
  out.test.X = apply_encoder(out.test.rows, out.encoder);
  return out;
}

}  // namespace amr
