#include "amr/metrics.hpp"

#include <cmath>

#include "amr/error.hpp"

namespace amr {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size() || y.empty()) {
    throw Error(ErrorCode::LengthMismatch, "metric inputs must have equal non-zero length (got " +
                                               std::to_string(y.size()) + " and " +
                                               std::to_string(yhat.size()) + ")");
  }
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(y.size()));
}

std::optional<double> r2(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

double improvement_vs_naive(double model_mae, double naive_mae) {
  if (!(naive_mae > 0.0)) throw Error(ErrorCode::ZeroNaiveMae, "naive MAE must be > 0");
  return 100.0 * (naive_mae - model_mae) / naive_mae;
}

double round1(double v) noexcept { return std::round(v * 10.0) / 10.0; }

RegionalTable regional_mae(std::span<const double> y, std::span<const double> yhat,
                           std::span<const WhoRegion> regions) {
  if (y.size() != yhat.size() || y.size() != regions.size()) {
    throw Error(ErrorCode::LengthMismatch, "regional MAE inputs must be aligned");
  }
  std::array<double, kRegionCount> sum{};
  std::array<std::size_t, kRegionCount> count{};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto r = static_cast<std::size_t>(regions[i]);
    sum[r] += std::abs(y[i] - yhat[i]);
    ++count[r];
  }
  RegionalTable t;
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    if (count[r] == 0) {
      t.excluded.push_back(kAllRegions[r]);
    } else {
      t.entries.push_back({kAllRegions[r], sum[r] / static_cast<double>(count[r]), count[r]});
    }
  }
  return t;
}

double recombine_regional(std::span<const RegionalEntry> entries) {
  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& e : entries) {
    weighted += static_cast<double>(e.n) * e.mae;
    n += e.n;
  }
  if (n == 0) throw Error(ErrorCode::LengthMismatch, "no regional observations to recombine");
  return weighted / static_cast<double>(n);
}

}  // namespace amr
