#pragma once

// Split-finding kernels for the boosted trees. Both splitters work on binned
// columns: the exact splitter gets one bin per distinct training value, the
// histogram splitter at most n_bins equal-frequency bins. The OpenMP kernel
// and the serial reference share the per-feature scan, so they agree bit for bit.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "amr/features.hpp"

namespace amr::gbt {

struct BinnedFeature {
  std::vector<double> edges;         // ascending thresholds; bin b holds values in (edges[b-1], edges[b]]
  std::vector<std::uint32_t> bins;   // per training row

  std::size_t n_bins() const noexcept { return edges.size() + 1; }
};

struct BinnedMatrix {
  std::vector<BinnedFeature> features;
  std::size_t rows = 0;
};

/// Number of edges strictly below `value`, i.e. the bin `value` falls into.
std::uint32_t bin_of(std::span<const double> edges, double value) noexcept;

/// Edges at midpoints of adjacent distinct values of each column.
BinnedMatrix bin_exact(const FeatureMatrix& X);

/// Equal-frequency quantile edges, at most n_bins - 1 per column. Columns with
/// no more than n_bins distinct values get the exact edges.
BinnedMatrix bin_quantile(const FeatureMatrix& X, std::size_t n_bins);

struct SplitParams {
  double reg_lambda = 1.0;
  double gamma = 0.0;
};

/// 0.5 * [GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l)] - gamma
inline double split_gain(double gl, double hl, double gr, double hr, const SplitParams& p) noexcept {
  const double g = gl + gr;
  const double h = hl + hr;
  return 0.5 * (gl * gl / (hl + p.reg_lambda) + gr * gr / (hr + p.reg_lambda) -
                g * g / (h + p.reg_lambda)) -
         p.gamma;
}

struct SplitCandidate {
  int feature = -1;
  std::uint32_t bin = 0;  // left side holds bins <= bin
  double threshold = 0.0;
  double gain = -std::numeric_limits<double>::infinity();

  bool valid() const noexcept { return feature >= 0; }
};

/// Best split of one feature for the rows of a node. Gradients are summed per
/// bin in row order, then prefix-summed across bins; hessians are all 1.
SplitCandidate best_split_for_feature(const BinnedFeature& f, int feature_index,
                                      std::span<const std::uint32_t> rows,
                                      std::span<const double> grad, double node_grad,
                                      const SplitParams& params);

/// Serial reference: features scanned in order, strictly greater gain wins.
SplitCandidate find_best_split_serial(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                                      std::span<const double> grad, double node_grad,
                                      const SplitParams& params);

/// OpenMP kernel: features scanned concurrently, then reduced in feature order.
SplitCandidate find_best_split_parallel(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                                        std::span<const double> grad, double node_grad,
                                        const SplitParams& params);

}  // namespace amr::gbt
