#pragma once

// GLASS-schema surveillance records: CSV ingestion, rendering, and a seeded
// AR(1) generator that stands in for the unshipped WHO exports.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace amr {

enum class WhoRegion : std::uint8_t {
  African,
  Americas,
  SouthEastAsia,
  European,
  EasternMediterranean,
  WesternPacific,
};
inline constexpr std::size_t kRegionCount = 6;
inline constexpr std::array<WhoRegion, kRegionCount> kAllRegions = {
    WhoRegion::African,  WhoRegion::Americas,
    WhoRegion::SouthEastAsia, WhoRegion::European,
    WhoRegion::EasternMediterranean, WhoRegion::WesternPacific};

enum class IncomeGroup : std::uint8_t { High, UpperMiddle, LowerMiddle, Low, Unknown };
inline constexpr std::size_t kIncomeGroupCount = 5;
inline constexpr std::array<IncomeGroup, kIncomeGroupCount> kAllIncomeGroups = {
    IncomeGroup::High, IncomeGroup::UpperMiddle, IncomeGroup::LowerMiddle, IncomeGroup::Low,
    IncomeGroup::Unknown};

/// Exact CSV spelling, e.g. "South-East Asia Region".
std::string_view region_name(WhoRegion r) noexcept;
std::optional<WhoRegion> parse_region(std::string_view s) noexcept;
std::string_view income_name(IncomeGroup g) noexcept;
std::optional<IncomeGroup> parse_income(std::string_view s) noexcept;

/// One (country, pathogen, antibiotic, year) surveillance record.
struct Observation {
  std::string country;
  WhoRegion who_region = WhoRegion::African;
  IncomeGroup income_group = IncomeGroup::Unknown;
  std::string pathogen;
  std::string antibiotic;
  int year = 0;
  std::optional<double> resistance_pct;   // [0, 100]
  std::optional<double> consumption_did;  // >= 0

  bool operator==(const Observation&) const = default;
};

enum class Provenance : std::uint8_t { Ingested, Synthetic };

struct Dataset {
  std::vector<Observation> rows;
  Provenance provenance = Provenance::Ingested;
  std::optional<std::uint64_t> generator_seed;

  bool operator==(const Dataset&) const = default;
};

inline constexpr std::string_view kCsvHeader =
    "CountryTerritoryArea,WHORegion,IncomeGroup,PathogenName,AntibioticName,Year,"
    "ResistancePct,ConsumptionDID";

/// Parses a GLASS-schema CSV export. Throws `ParseError` with the offending
/// line on any invalid row; never silently drops data lines.
Dataset parse_dataset(std::string_view csv_text);

/// Renders a dataset in the exact CSV schema; `parse_dataset(render_dataset(d)).rows == d.rows`.
std::string render_dataset(const Dataset& d);

struct SynthConfig {
  std::size_t n_countries = 44;
  std::size_t pairs_per_country = 10;
  int first_year = 2021;
  int last_year = 2023;
  double ar_noise_sd = 5.0;
  /// Year-over-year drift per DID unit above the generator's mean consumption.
  double consumption_effect = 1.0;
};

/// Per series: r(y+1) = clip(r(y) + eps + beta * (consumption(y) - mean), 0, 100).
Dataset synthesize_dataset(const SynthConfig& config, std::uint64_t seed);

/// Centre of the generator's consumption distribution (DID).
inline constexpr double kSynthConsumptionMean = 25.0;

struct DatasetSummary {
  std::size_t total = 0;
  std::array<std::size_t, kRegionCount> per_region{};
  std::array<std::size_t, kIncomeGroupCount> per_income{};
  std::map<int, std::size_t> per_year;
  std::size_t missing_resistance = 0;
  std::size_t missing_consumption = 0;
  std::size_t countries = 0;
};

DatasetSummary dataset_summary(const Dataset& d);

}  // namespace amr
