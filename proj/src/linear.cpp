#include <algorithm>
#include <cmath>
#include <numeric>

#include "amr/error.hpp"
#include "amr/metrics.hpp"
#include "amr/models.hpp"

namespace amr {

namespace {

// In-place Cholesky solve of A x = b for symmetric A (row-major p x p).
// Returns false when a pivot is not strictly positive.
bool cholesky_solve(std::vector<double> a, std::vector<double>& b, std::size_t p) {
  for (std::size_t j = 0; j < p; ++j) {
    double d = a[j * p + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * p + k] * a[j * p + k];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    a[j * p + j] = ljj;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
      a[i * p + j] = s / ljj;
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * p + k] * b[k];
    b[i] = s / a[i * p + i];
  }
  for (std::size_t i = p; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < p; ++k) s -= a[k * p + i] * b[k];
    b[i] = s / a[i * p + i];
  }
  return true;
}

}  // namespace

LinearParams fit_ridge(const FeatureMatrix& X, double lambda) {
  const std::size_t n = X.rows();
  const std::size_t p = X.cols();
  if (n == 0) throw Error(ErrorCode::DegenerateDesign, "no rows to fit");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidSpec, "ridge lambda must be >= 0");

  std::vector<double> mean(p, 0.0);
  double y_mean = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < p; ++j) mean[j] += X(r, j);
    y_mean += X.target()[r];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  y_mean /= static_cast<double>(n);

  // Centring removes the intercept from the system and keeps it unpenalized.
  std::vector<double> gram(p * p, 0.0);
  std::vector<double> rhs(p, 0.0);
  std::vector<double> xc(p);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < p; ++j) xc[j] = X(r, j) - mean[j];
    const double yc = X.target()[r] - y_mean;
    for (std::size_t i = 0; i < p; ++i) {
      rhs[i] += xc[i] * yc;
      for (std::size_t j = 0; j <= i; ++j) gram[i * p + j] += xc[i] * xc[j];
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < i; ++j) gram[j * p + i] = gram[i * p + j];
    gram[i * p + i] += lambda;
  }

  std::vector<double> w = rhs;
  if (!cholesky_solve(gram, w, p)) {
    for (std::size_t i = 0; i < p; ++i) gram[i * p + i] += 1e-10;
    w = rhs;
    if (!cholesky_solve(gram, w, p)) {
      throw Error(ErrorCode::DegenerateDesign, "normal equations are singular even with jitter");
    }
  }

  LinearParams out;
  out.weights = std::move(w);
  out.lambda = lambda;
  out.intercept = y_mean;
  for (std::size_t j = 0; j < p; ++j) out.intercept -= mean[j] * out.weights[j];
  return out;
}

TrainedModel train_linear(const FeatureMatrix& train) {
  if (train.rows() < train.cols() + 1) {
    throw Error(ErrorCode::DegenerateDesign,
                "OLS needs at least " + std::to_string(train.cols() + 1) + " rows, got " +
                    std::to_string(train.rows()));
  }
  TrainedModel m(ModelKind::Linear, train.cols(), fit_ridge(train, 0.0));
  return m;
}

TrainedModel train_ridge(const FeatureMatrix& train, const RidgeSpec& spec) {
  if (spec.lambda_grid.empty()) throw Error(ErrorCode::InvalidSpec, "ridge lambda grid is empty");
  if (spec.cv_folds < 2) throw Error(ErrorCode::InvalidSpec, "ridge needs at least 2 folds");
  for (double l : spec.lambda_grid)
    if (!(l >= 0.0)) throw Error(ErrorCode::InvalidSpec, "ridge lambdas must be >= 0");
  const std::size_t n = train.rows();
  if (n < spec.cv_folds || n < train.cols() + 1) {
    throw Error(ErrorCode::DegenerateDesign, "too few rows for ridge cross-validation");
  }

  const std::size_t k = spec.cv_folds;
  std::vector<double> fold_mae(spec.lambda_grid.size(), 0.0);
  for (std::size_t li = 0; li < spec.lambda_grid.size(); ++li) {
    double total = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t lo = f * n / k;
      const std::size_t hi = (f + 1) * n / k;
      std::vector<std::size_t> fit_idx;
      std::vector<std::size_t> hold_idx;
      for (std::size_t i = 0; i < n; ++i) (i >= lo && i < hi ? hold_idx : fit_idx).push_back(i);
      const auto fit_part = train.select(fit_idx);
      const auto hold_part = train.select(hold_idx);
      TrainedModel m(ModelKind::Ridge, train.cols(), fit_ridge(fit_part, spec.lambda_grid[li]));
      total += mae(hold_part.target(), m.predict(hold_part));
    }
    fold_mae[li] = total / static_cast<double>(k);
  }

  std::size_t best = 0;
  for (std::size_t li = 1; li < fold_mae.size(); ++li) {
    const double a = fold_mae[li];
    const double b = fold_mae[best];
    if (a < b || (a == b && spec.lambda_grid[li] < spec.lambda_grid[best])) best = li;
  }

  TrainedModel m(ModelKind::Ridge, train.cols(), fit_ridge(train, spec.lambda_grid[best]));
  auto& meta = m.meta();
  meta.hyperparameters["lambda"] = spec.lambda_grid[best];
  meta.hyperparameters["cv_folds"] = static_cast<double>(k);
  meta.val_mae_trace = fold_mae;  // mean fold MAE per grid lambda
  return m;
}

}  // namespace amr
