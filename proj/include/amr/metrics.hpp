#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amr/data_model.hpp"

namespace amr {

/// mean |y - yhat|. Throws LengthMismatch on unequal or empty inputs.
double mae(std::span<const double> y, std::span<const double> yhat);
/// sqrt(mean (y - yhat)^2).
double rmse(std::span<const double> y, std::span<const double> yhat);
/// 1 - SS_res / SS_tot with the mean taken over `y`; nullopt when every target is equal.
std::optional<double> r2(std::span<const double> y, std::span<const double> yhat);

/// 100 * (naive - model) / naive, unrounded. Throws ZeroNaiveMae.
double improvement_vs_naive(double model_mae, double naive_mae);

/// Half-away-from-zero rounding to one decimal, the precision of published tables.
double round1(double v) noexcept;

struct RegionalEntry {
  WhoRegion region = WhoRegion::African;
  double mae = 0.0;
  std::size_t n = 0;
};

struct RegionalTable {
  std::vector<RegionalEntry> entries;  // regions with at least one row, enum order
  std::vector<WhoRegion> excluded;     // regions without rows
};

RegionalTable regional_mae(std::span<const double> y, std::span<const double> yhat,
                           std::span<const WhoRegion> regions);

/// Sum n_r * MAE_r / Sum n_r.
double recombine_regional(std::span<const RegionalEntry> entries);

}  // namespace amr
