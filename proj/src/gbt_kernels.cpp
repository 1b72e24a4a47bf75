#include "amr/gbt_kernels.hpp"

#include <algorithm>

namespace amr::gbt {

std::uint32_t bin_of(std::span<const double> edges, double value) noexcept {
  return static_cast<std::uint32_t>(std::lower_bound(edges.begin(), edges.end(), value) -
                                    edges.begin());
}

namespace {

std::vector<double> distinct_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<double> midpoints(const std::vector<double>& distinct) {
  std::vector<double> edges;
  if (distinct.size() < 2) return edges;
  edges.reserve(distinct.size() - 1);
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
    edges.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
  return edges;
}

BinnedMatrix assign_bins(const FeatureMatrix& X, std::vector<std::vector<double>> edges) {
  BinnedMatrix m;
  m.rows = X.rows();
  m.features.resize(X.cols());
  for (std::size_t c = 0; c < X.cols(); ++c) {
    auto& f = m.features[c];
    f.edges = std::move(edges[c]);
    f.bins.resize(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) f.bins[r] = bin_of(f.edges, X(r, c));
  }
  return m;
}

}  // namespace

BinnedMatrix bin_exact(const FeatureMatrix& X) {
  std::vector<std::vector<double>> edges(X.cols());
  for (std::size_t c = 0; c < X.cols(); ++c) edges[c] = midpoints(distinct_sorted(X.column(c)));
  return assign_bins(X, std::move(edges));
}

BinnedMatrix bin_quantile(const FeatureMatrix& X, std::size_t n_bins) {
  std::vector<std::vector<double>> edges(X.cols());
  for (std::size_t c = 0; c < X.cols(); ++c) {
    auto sorted = X.column(c);
    std::sort(sorted.begin(), sorted.end());
    auto distinct = distinct_sorted(sorted);
    if (distinct.size() <= n_bins) {
      edges[c] = midpoints(distinct);
      continue;
    }
    const std::size_t n = sorted.size();
    for (std::size_t k = 1; k < n_bins; ++k) {
      const std::size_t pos = k * n / n_bins;
      if (pos == 0 || pos >= n) continue;
      const double lo = sorted[pos - 1];
      const double hi = sorted[pos];
      if (lo == hi) continue;  // cut falls inside a run of ties
      const double e = lo + (hi - lo) / 2.0;
      if (edges[c].empty() || edges[c].back() < e) edges[c].push_back(e);
    }
  }
  return assign_bins(X, std::move(edges));
}

SplitCandidate best_split_for_feature(const BinnedFeature& f, int feature_index,
                                      std::span<const std::uint32_t> rows,
                                      std::span<const double> grad, double node_grad,
                                      const SplitParams& params) {
  SplitCandidate best;
  if (f.edges.empty() || rows.size() < 2) return best;

  const std::size_t nb = f.n_bins();
  std::vector<double> hist_g(nb, 0.0);
  std::vector<double> hist_h(nb, 0.0);
  std::uint32_t lo = static_cast<std::uint32_t>(nb - 1);
  std::uint32_t hi = 0;
  for (auto r : rows) {
    const auto b = f.bins[r];
    hist_g[b] += grad[r];
    hist_h[b] += 1.0;
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }

  const double node_hess = static_cast<double>(rows.size());
  double gl = 0.0;
  double hl = 0.0;
  for (std::uint32_t b = lo; b < hi; ++b) {
    gl += hist_g[b];
    hl += hist_h[b];
    if (hist_h[b] == 0.0) continue;  // same partition as the previous occupied bin
    const double hr = node_hess - hl;
    const double gr = node_grad - gl;
    const double gain = split_gain(gl, hl, gr, hr, params);
    if (gain > best.gain) {
      best.feature = feature_index;
      best.bin = b;
      best.threshold = f.edges[b];
      best.gain = gain;
    }
  }
  return best;
}

namespace {

SplitCandidate reduce(std::span<const SplitCandidate> per_feature) {
  SplitCandidate best;
  for (const auto& c : per_feature)
    if (c.valid() && c.gain > best.gain) best = c;
  return best;
}

}  // namespace

SplitCandidate find_best_split_serial(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                                      std::span<const double> grad, double node_grad,
                                      const SplitParams& params) {
  std::vector<SplitCandidate> per_feature(m.features.size());
  for (std::size_t f = 0; f < m.features.size(); ++f)
    per_feature[f] = best_split_for_feature(m.features[f], static_cast<int>(f), rows, grad,
                                            node_grad, params);
  return reduce(per_feature);
}

SplitCandidate find_best_split_parallel(const BinnedMatrix& m, std::span<const std::uint32_t> rows,
                                        std::span<const double> grad, double node_grad,
                                        const SplitParams& params) {
  const auto n_features = static_cast<std::ptrdiff_t>(m.features.size());
  std::vector<SplitCandidate> per_feature(m.features.size());
  // Small nodes are cheaper than a fork/join.
  const bool worth_it = rows.size() * m.features.size() >= 8192;
#pragma omp parallel for schedule(dynamic) if (worth_it)
  for (std::ptrdiff_t f = 0; f < n_features; ++f) {
    per_feature[static_cast<std::size_t>(f)] = best_split_for_feature(
        m.features[static_cast<std::size_t>(f)], static_cast<int>(f), rows, grad, node_grad,
        params);
  }
  return reduce(per_feature);
}

}  // namespace amr::gbt
