#include "amr/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <tuple>

#include "amr/csv.hpp"
#include "amr/error.hpp"

namespace amr {

namespace {

constexpr std::array<std::string_view, kRegionCount> kRegionNames = {
    "African Region",       "Region of the Americas",       "South-East Asia Region",
    "European Region",      "Eastern Mediterranean Region", "Western Pacific Region"};

constexpr std::array<std::string_view, kIncomeGroupCount> kIncomeNames = {
    "High", "Upper-middle", "Lower-middle", "Low", "Unknown"};

constexpr std::array<std::string_view, 8> kPathogens = {
    "Escherichia coli",       "Klebsiella pneumoniae",    "Staphylococcus aureus",
    "Acinetobacter spp.",     "Pseudomonas aeruginosa",   "Streptococcus pneumoniae",
    "Salmonella spp.",        "Enterococcus faecium"};

constexpr std::array<std::string_view, 8> kAntibiotics = {
    "Ceftriaxone", "Ciprofloxacin", "Imipenem",   "Meropenem",
    "Cefotaxime",  "Gentamicin",    "Ampicillin", "Co-trimoxazole"};

constexpr std::size_t kPairPool = kPathogens.size() * kAntibiotics.size();

}  // namespace

std::vector<std::string> csv::split_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      if (!cur.empty()) throw ParseError(ErrorCode::MalformedRow, line_no, "stray quote");
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError(ErrorCode::MalformedRow, line_no, "unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

namespace {

std::optional<double> parse_real(const std::string& s, std::size_t line_no,
                                 std::string_view column) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(ErrorCode::MalformedRow, line_no,
                     "column " + std::string(column) + " is not a number: '" + s + "'");
  }
  return v;
}

void append_field(std::string& out, std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) {
    out.append(s);
    return;
  }
  out.push_back('"');
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

void append_real(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

std::string_view region_name(WhoRegion r) noexcept {
  return kRegionNames[static_cast<std::size_t>(r)];
}

std::optional<WhoRegion> parse_region(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kRegionCount; ++i)
    if (kRegionNames[i] == s) return kAllRegions[i];
  return std::nullopt;
}

std::string_view income_name(IncomeGroup g) noexcept {
  return kIncomeNames[static_cast<std::size_t>(g)];
}

std::optional<IncomeGroup> parse_income(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kIncomeGroupCount; ++i)
    if (kIncomeNames[i] == s) return kAllIncomeGroups[i];
  return std::nullopt;
}

Dataset parse_dataset(std::string_view csv_text) {
  Dataset d;
  d.provenance = Provenance::Ingested;

  using Key = std::tuple<std::string, std::string, std::string, int>;
  std::set<Key> seen;

  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos < csv_text.size()) {
    auto nl = csv_text.find('\n', pos);
    std::string_view line = csv_text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? csv_text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!header_seen) {
      if (line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (line != kCsvHeader) {
        throw ParseError(ErrorCode::BadHeader, line_no,
                         "expected header '" + std::string(kCsvHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;

    auto f = csv::split_line(line, line_no);
    if (f.size() != 8) {
      throw ParseError(ErrorCode::MalformedRow, line_no,
                       "expected 8 fields, found " + std::to_string(f.size()));
    }
    Observation o;
    o.country = f[0];
    if (o.country.empty() || f[3].empty() || f[4].empty()) {
      throw ParseError(ErrorCode::MalformedRow, line_no,
                       "country, pathogen and antibiotic are required");
    }
    auto region = parse_region(f[1]);
    if (!region) throw ParseError(ErrorCode::UnknownRegion, line_no, "unknown WHO region '" + f[1] + "'");
    o.who_region = *region;
    auto income = parse_income(f[2]);
    if (!income) {
      throw ParseError(ErrorCode::UnknownIncomeGroup, line_no, "unknown income group '" + f[2] + "'");
    }
    o.income_group = *income;
    o.pathogen = f[3];
    o.antibiotic = f[4];

    int year = 0;
    auto [ptr, ec] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), year);
    if (f[5].empty() || ec != std::errc{} || ptr != f[5].data() + f[5].size()) {
      throw ParseError(ErrorCode::MalformedRow, line_no, "invalid year '" + f[5] + "'");
    }
    o.year = year;

    o.resistance_pct = parse_real(f[6], line_no, "ResistancePct");
    if (o.resistance_pct && (*o.resistance_pct < 0.0 || *o.resistance_pct > 100.0)) {
      throw ParseError(ErrorCode::OutOfRangePercentage, line_no,
                       "ResistancePct " + f[6] + " outside [0,100]");
    }
    o.consumption_did = parse_real(f[7], line_no, "ConsumptionDID");
    if (o.consumption_did && *o.consumption_did < 0.0) {
      throw ParseError(ErrorCode::NegativeConsumption, line_no,
                       "ConsumptionDID " + f[7] + " is negative");
    }

    if (!seen.emplace(o.country, o.pathogen, o.antibiotic, o.year).second) {
      throw ParseError(ErrorCode::DuplicateKey, line_no,
                       "duplicate (country, pathogen, antibiotic, year) key");
    }
    d.rows.push_back(std::move(o));
  }
  if (!header_seen) throw ParseError(ErrorCode::BadHeader, 1, "empty input");
  return d;
}

std::string render_dataset(const Dataset& d) {
  std::string out(kCsvHeader);
  out.push_back('\n');
  for (const auto& o : d.rows) {
    append_field(out, o.country);
    out.push_back(',');
    append_field(out, region_name(o.who_region));
    out.push_back(',');
    append_field(out, income_name(o.income_group));
    out.push_back(',');
    append_field(out, o.pathogen);
    out.push_back(',');
    append_field(out, o.antibiotic);
    out.push_back(',');
    out.append(std::to_string(o.year));
    out.push_back(',');
    if (o.resistance_pct) append_real(out, *o.resistance_pct);
    out.push_back(',');
    if (o.consumption_did) append_real(out, *o.consumption_did);
    out.push_back('\n');
  }
  return out;
}

Dataset synthesize_dataset(const SynthConfig& config, std::uint64_t seed) {
  if (config.n_countries == 0 || config.pairs_per_country == 0 ||
      config.last_year < config.first_year) {
    throw Error(ErrorCode::EmptyConfig, "synthesis needs at least one country, pair and year");
  }
  if (config.pairs_per_country > kPairPool) {
    throw Error(ErrorCode::ConfigInvalid,
                "pairs_per_country exceeds the " + std::to_string(kPairPool) + "-pair pool");
  }
  if (!(config.ar_noise_sd >= 0.0)) {
    throw Error(ErrorCode::ConfigInvalid, "ar_noise_sd must be >= 0");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto normal = [&](double sd) {
    if (sd == 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sd)(rng);
  };
  auto clip = [](double v) { return std::clamp(v, 0.0, 100.0); };

  // Latent structure: pair-, region- and country-level resistance offsets.
  std::array<double, kPairPool> pair_level{};
  for (auto& v : pair_level) v = 5.0 + 65.0 * unit(rng);
  std::array<double, kRegionCount> region_level{};
  for (auto& v : region_level) v = normal(8.0);

  const auto n_years = static_cast<std::size_t>(config.last_year - config.first_year + 1);

  Dataset d;
  d.provenance = Provenance::Synthetic;
  d.generator_seed = seed;
  d.rows.reserve(config.n_countries * config.pairs_per_country * n_years);

  for (std::size_t c = 0; c < config.n_countries; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "Country-%03zu", c + 1);
    const WhoRegion region = kAllRegions[c % kRegionCount];
    const IncomeGroup income = kAllIncomeGroups[c % kIncomeGroupCount];
    const double country_level = normal(6.0);

    std::array<double, kAntibiotics.size()> consumption_base{};
    for (auto& v : consumption_base) v = 5.0 + 40.0 * unit(rng);

    for (std::size_t j = 0; j < config.pairs_per_country; ++j) {
      const std::size_t pair = (c * 3 + j * 5) % kPairPool;
      const std::size_t pathogen = pair / kAntibiotics.size();
      const std::size_t antibiotic = pair % kAntibiotics.size();

      double r = clip(pair_level[pair] + region_level[static_cast<std::size_t>(region)] +
                      country_level + normal(5.0));
      for (std::size_t y = 0; y < n_years; ++y) {
        const double consumption =
            std::max(0.0, consumption_base[antibiotic] + normal(2.0));
        if (y > 0) {
          r = clip(r + normal(config.ar_noise_sd) +
                   config.consumption_effect * (consumption - kSynthConsumptionMean));
        }
        Observation o;
        o.country = name;
        o.who_region = region;
        o.income_group = income;
        o.pathogen = std::string(kPathogens[pathogen]);
        o.antibiotic = std::string(kAntibiotics[antibiotic]);
        o.year = config.first_year + static_cast<int>(y);
        o.resistance_pct = r;
        o.consumption_did = consumption;
        d.rows.push_back(std::move(o));
      }
    }
  }
  return d;
}

DatasetSummary dataset_summary(const Dataset& d) {
  DatasetSummary s;
  s.total = d.rows.size();
  std::set<std::string_view> countries;
  for (const auto& o : d.rows) {
    ++s.per_region[static_cast<std::size_t>(o.who_region)];
    ++s.per_income[static_cast<std::size_t>(o.income_group)];
    ++s.per_year[o.year];
    if (!o.resistance_pct) ++s.missing_resistance;
    if (!o.consumption_did) ++s.missing_consumption;
    countries.insert(o.country);
  }
  s.countries = countries.size();
  return s;
}

}  // namespace amr
