#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "amr/error.hpp"
#include "amr/gbt_kernels.hpp"
#include "amr/metrics.hpp"
#include "amr/models.hpp"

namespace amr {

void GbtSpec::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidSpec, "learning_rate must be > 0");
  if (max_depth < 1) throw Error(ErrorCode::InvalidSpec, "max_depth must be >= 1");
  if (!(subsample_ratio > 0.0 && subsample_ratio <= 1.0))
    throw Error(ErrorCode::InvalidSpec, "subsample_ratio must lie in (0, 1]");
  if (n_bins < 2) throw Error(ErrorCode::InvalidSpec, "n_bins must be >= 2");
  if (!(reg_lambda >= 0.0) || !(gamma >= 0.0))
    throw Error(ErrorCode::InvalidSpec, "reg_lambda and gamma must be >= 0");
}

double Tree::leaf_value(std::span<const double> x) const noexcept {
  std::uint32_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[i].weight;
}

std::size_t Tree::depth() const {
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[i].is_leaf()) {
      stack.emplace_back(nodes[i].left, d + 1);
      stack.emplace_back(nodes[i].right, d + 1);
    }
  }
  return deepest;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const gbt::BinnedMatrix& binned, std::span<const double> grad, const GbtSpec& spec,
              std::vector<double>& gains)
      : binned_(binned), grad_(grad), spec_(spec), gains_(gains),
        params_{spec.reg_lambda, spec.gamma} {}

  Tree build(std::vector<std::uint32_t> rows) {
    Tree t;
    grow(t, std::move(rows), 0);
    return t;
  }

 private:
  std::uint32_t grow(Tree& t, std::vector<std::uint32_t> rows, int depth) {
    const auto index = static_cast<std::uint32_t>(t.nodes.size());
    t.nodes.emplace_back();

    double g = 0.0;
    for (auto r : rows) g += grad_[r];
    const auto h = static_cast<double>(rows.size());

    gbt::SplitCandidate best;
    if (depth < spec_.max_depth && rows.size() >= 2)
      best = gbt::find_best_split_parallel(binned_, rows, grad_, g, params_);

    if (!best.valid() || !(best.gain > 0.0)) {
      t.nodes[index].weight = -g / (h + spec_.reg_lambda);
      return index;
    }

    gains_[static_cast<std::size_t>(best.feature)] += best.gain;
    const auto& bins = binned_.features[static_cast<std::size_t>(best.feature)].bins;
    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    for (auto r : rows) (bins[r] <= best.bin ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const auto l = grow(t, std::move(left), depth + 1);
    const auto rr = grow(t, std::move(right), depth + 1);
    auto& node = t.nodes[index];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rr;
    return index;
  }

  const gbt::BinnedMatrix& binned_;
  std::span<const double> grad_;
  const GbtSpec& spec_;
  std::vector<double>& gains_;
  gbt::SplitParams params_;
};

}  // namespace

TrainedModel train_gbt(const FeatureMatrix& train, const GbtSpec& spec, SplitMode mode) {
  spec.validate();
  const std::size_t n = train.rows();
  if (n == 0) throw Error(ErrorCode::EmptyTraining, "boosting needs at least one training row");

  const auto binned = mode == SplitMode::Exact ? gbt::bin_exact(train)
                                               : gbt::bin_quantile(train, spec.n_bins);
  const auto y = train.target();

  TreeEnsemble ens;
  ens.learning_rate = spec.learning_rate;
  const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  ens.base_score = constant ? y[0] : std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> yhat(n, ens.base_score);
  std::vector<double> grad(n, 0.0);
  std::vector<double> gains(train.cols(), 0.0);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::uint32_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0U);

  TreeBuilder builder(binned, grad, spec, gains);
  ens.trees.reserve(spec.n_estimators);
  for (std::size_t t = 0; t < spec.n_estimators; ++t) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = yhat[i] - y[i];

    std::vector<std::uint32_t> rows;
    if (spec.subsample_ratio < 1.0) {
      for (std::uint32_t i = 0; i < n; ++i)
        if (unit(rng) < spec.subsample_ratio) rows.push_back(i);
      if (rows.empty()) rows = all_rows;
    } else {
      rows = all_rows;
    }

    Tree tree = builder.build(std::move(rows));
    for (std::size_t i = 0; i < n; ++i) yhat[i] += ens.learning_rate * tree.leaf_value(train.row(i));
    ens.trees.push_back(std::move(tree));
  }

  TrainedModel model(mode == SplitMode::Exact ? ModelKind::GBTExact : ModelKind::GBTHistogram,
                     train.cols(), std::move(ens));
  const double total = std::accumulate(gains.begin(), gains.end(), 0.0);
  if (total > 0.0) {
    for (auto& g : gains) g /= total;
    model.set_feature_importances(std::move(gains));
  }
  auto& hp = model.meta().hyperparameters;
  hp["learning_rate"] = spec.learning_rate;
  hp["max_depth"] = spec.max_depth;
  hp["n_estimators"] = static_cast<double>(spec.n_estimators);
  hp["subsample_ratio"] = spec.subsample_ratio;
  hp["reg_lambda"] = spec.reg_lambda;
  hp["gamma"] = spec.gamma;
  hp["seed"] = static_cast<double>(spec.seed);
  if (mode == SplitMode::Histogram) hp["n_bins"] = static_cast<double>(spec.n_bins);
  model.meta().epochs_run = spec.n_estimators;
  return model;
}

std::vector<GbtSpec> GbtGrid::expand() const {
  std::vector<GbtSpec> out;
  for (double lr : learning_rate)
    for (int d : max_depth)
      for (auto ne : n_estimators)
        for (double ss : subsample) {
          GbtSpec s;
          s.learning_rate = lr;
          s.max_depth = d;
          s.n_estimators = ne;
          s.subsample_ratio = ss;
          s.reg_lambda = reg_lambda;
          s.gamma = gamma;
          s.n_bins = n_bins;
          s.seed = seed;
          out.push_back(s);
        }
  return out;
}

GridSearchResult grid_search(SplitMode family, const GbtGrid& grid, const FeatureMatrix& train,
                             const FeatureMatrix& val, bool parallel) {
  auto specs = grid.expand();
  if (specs.empty()) throw Error(ErrorCode::InvalidSpec, "grid search needs a non-empty grid");
  for (const auto& s : specs) s.validate();

  GridSearchResult result;
  result.evaluated.resize(specs.size());
  const auto n = static_cast<std::ptrdiff_t>(specs.size());
  // Each slot is written by exactly one iteration; selection happens afterwards.
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& spec = specs[static_cast<std::size_t>(i)];
    auto m = train_gbt(train, spec, family);
    result.evaluated[static_cast<std::size_t>(i)] = {spec, mae(val.target(), m.predict(val))};
  }

  for (std::size_t i = 1; i < result.evaluated.size(); ++i)
    if (result.evaluated[i].val_mae < result.evaluated[result.best_index].val_mae)
      result.best_index = i;
  result.best = result.evaluated[result.best_index].spec;
  return result;
}

}  // namespace amr
