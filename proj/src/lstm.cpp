#include "amr/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "amr/error.hpp"
#include "amr/metrics.hpp"

namespace amr {

void LstmSpec::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidSpec, "LSTM learning_rate must be > 0");
  if (hidden_size == 0) throw Error(ErrorCode::InvalidSpec, "LSTM hidden_size must be >= 1");
  if (batch_size == 0) throw Error(ErrorCode::InvalidSpec, "LSTM batch_size must be >= 1");
}

namespace lstm {

namespace {

double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

// Activations of one row, kept for the backward pass.
struct Cache {
  std::vector<double> i, f, g, o, c, tanh_c, h;
  double out = 0.0;

  explicit Cache(std::size_t hidden)
      : i(hidden), f(hidden), g(hidden), o(hidden), c(hidden), tanh_c(hidden), h(hidden) {}
};

void forward_cached(const Layout& L, std::span<const double> theta, std::span<const double> x,
                    Cache& k) {
  const std::size_t H = L.hidden;
  const std::size_t D = L.input;
  const double* wx = theta.data() + L.wx();
  const double* b = theta.data() + L.bias();
  // h0 = 0 and c0 = 0, so the recurrent term and the forget path contribute nothing.
  for (std::size_t u = 0; u < H; ++u) {
    double z[4];
    for (std::size_t gate = 0; gate < 4; ++gate) {
      const std::size_t row = gate * H + u;
      double s = b[row];
      const double* w = wx + row * D;
      for (std::size_t d = 0; d < D; ++d) s += w[d] * x[d];
      z[gate] = s;
    }
    k.i[u] = sigmoid(z[0]);
    k.f[u] = sigmoid(z[1]);
    k.g[u] = std::tanh(z[2]);
    k.o[u] = sigmoid(z[3]);
    k.c[u] = k.f[u] * 0.0 + k.i[u] * k.g[u];
    k.tanh_c[u] = std::tanh(k.c[u]);
    k.h[u] = k.o[u] * k.tanh_c[u];
  }
  double out = theta[L.b_out()];
  for (std::size_t u = 0; u < H; ++u) out += theta[L.w_out() + u] * k.h[u];
  k.out = out;
}

}  // namespace

std::vector<double> init_theta(const Layout& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(layout.hidden));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> theta(layout.size());
  for (auto& t : theta) t = u(rng);
  return theta;
}

double forward(const Layout& layout, std::span<const double> theta, std::span<const double> x) {
  Cache k(layout.hidden);
  forward_cached(layout, theta, x, k);
  return k.out;
}

double loss(const Layout& layout, std::span<const double> theta, std::span<const double> xs,
            std::span<const double> ys) {
  const std::size_t n = ys.size();
  Cache k(layout.hidden);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    forward_cached(layout, theta, xs.subspan(r * layout.input, layout.input), k);
    const double e = k.out - ys[r];
    total += e * e;
  }
  return total / static_cast<double>(n);
}

double loss_and_gradient(const Layout& L, std::span<const double> theta,
                         std::span<const double> xs, std::span<const double> ys,
                         std::vector<double>& grad) {
  const std::size_t n = ys.size();
  const std::size_t H = L.hidden;
  const std::size_t D = L.input;
  grad.assign(L.size(), 0.0);
  Cache k(H);
  std::vector<double> h0(H, 0.0);
  std::vector<double> c0(H, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = xs.subspan(r * D, D);
    forward_cached(L, theta, x, k);
    const double e = k.out - ys[r];
    total += e * e;

    const double dout = 2.0 * e / static_cast<double>(n);
    grad[L.b_out()] += dout;
    for (std::size_t u = 0; u < H; ++u) {
      grad[L.w_out() + u] += dout * k.h[u];
      const double dh = dout * theta[L.w_out() + u];
      const double dz_o = dh * k.tanh_c[u] * k.o[u] * (1.0 - k.o[u]);
      const double dc = dh * k.o[u] * (1.0 - k.tanh_c[u] * k.tanh_c[u]);
      const double dz_i = dc * k.g[u] * k.i[u] * (1.0 - k.i[u]);
      const double dz_f = dc * c0[u] * k.f[u] * (1.0 - k.f[u]);
      const double dz_g = dc * k.i[u] * (1.0 - k.g[u] * k.g[u]);
      const double dz[4] = {dz_i, dz_f, dz_g, dz_o};
      for (std::size_t gate = 0; gate < 4; ++gate) {
        const std::size_t row = gate * H + u;
        grad[L.bias() + row] += dz[gate];
        double* gwx = grad.data() + L.wx() + row * D;
        for (std::size_t d = 0; d < D; ++d) gwx[d] += dz[gate] * x[d];
        double* gwh = grad.data() + L.wh() + row * H;
        for (std::size_t v = 0; v < H; ++v) gwh[v] += dz[gate] * h0[v];
      }
    }
  }
  return total / static_cast<double>(n);
}

double predict_row(const LstmParams& p, std::span<const double> x) {
  const Layout L{p.input_size, p.hidden_size};
  std::vector<double> xs(p.input_size);
  for (std::size_t d = 0; d < p.input_size; ++d) xs[d] = (x[d] - p.x_mean[d]) / p.x_sd[d];
  return forward(L, p.theta, xs) * p.y_sd + p.y_mean;
}

}  // namespace lstm

namespace {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;
};

Standardizer fit_standardizer(const FeatureMatrix& X) {
  Standardizer s{std::vector<double>(X.cols(), 0.0), std::vector<double>(X.cols(), 0.0)};
  const auto n = static_cast<double>(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < X.cols(); ++c) s.mean[c] += X(r, c);
  for (auto& m : s.mean) m /= n;
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < X.cols(); ++c) {
      const double d = X(r, c) - s.mean[c];
      s.sd[c] += d * d;
    }
  for (auto& v : s.sd) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;  // constant column
  }
  return s;
}

std::vector<double> standardized(const FeatureMatrix& X, const Standardizer& s) {
  std::vector<double> out(X.rows() * X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < X.cols(); ++c)
      out[r * X.cols() + c] = (X(r, c) - s.mean[c]) / s.sd[c];
  return out;
}

class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& theta, const std::vector<double>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      theta[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace

TrainedModel train_lstm(const FeatureMatrix& train, const FeatureMatrix& val, const LstmSpec& spec) {
  spec.validate();
  if (train.rows() == 0) throw Error(ErrorCode::EmptyTraining, "LSTM needs training rows");
  if (val.cols() != train.cols()) throw Error(ErrorCode::ColumnMismatch, "validation layout differs");

  const lstm::Layout L{train.cols(), spec.hidden_size};
  const auto stdz = fit_standardizer(train);
  const auto xs = standardized(train, stdz);

  const auto y = train.target();
  const auto n = y.size();
  double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double y_var = 0.0;
  for (double v : y) y_var += (v - y_mean) * (v - y_mean);
  double y_sd = std::sqrt(y_var / static_cast<double>(n));
  if (!(y_sd > 1e-12)) y_sd = 1.0;
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = (y[i] - y_mean) / y_sd;

  LstmParams params;
  params.input_size = train.cols();
  params.hidden_size = spec.hidden_size;
  params.theta = lstm::init_theta(L, spec.seed);
  params.x_mean = stdz.mean;
  params.x_sd = stdz.sd;
  params.y_mean = y_mean;
  params.y_sd = y_sd;

  auto score = [&](const FeatureMatrix& X, const LstmParams& p) {
    TrainedModel m(ModelKind::LSTM, X.cols(), p);
    return mae(X.target(), m.predict(X));
  };

  TrainingMeta meta;
  const bool has_val = val.rows() > 0;
  double best_val = has_val ? score(val, params) : std::numeric_limits<double>::infinity();
  std::vector<double> best_theta = params.theta;
  std::size_t since_best = 0;

  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Adam adam(L.size(), spec.learning_rate);
  std::vector<double> grad;
  std::vector<double> bx;
  std::vector<double> by;

  std::size_t epoch = 0;
  for (; epoch < spec.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += spec.batch_size) {
      const std::size_t end = std::min(n, start + spec.batch_size);
      bx.clear();
      by.clear();
      for (std::size_t j = start; j < end; ++j) {
        const auto r = order[j];
        bx.insert(bx.end(), xs.begin() + static_cast<std::ptrdiff_t>(r * L.input),
                  xs.begin() + static_cast<std::ptrdiff_t>((r + 1) * L.input));
        by.push_back(ys[r]);
      }
      const double l = lstm::loss_and_gradient(L, params.theta, bx, by, grad);
      if (!std::isfinite(l)) {
        throw Error(ErrorCode::NonFiniteLoss,
                    "LSTM loss became non-finite at epoch " + std::to_string(epoch + 1));
      }
      adam.step(params.theta, grad);
    }

    meta.train_mae_trace.push_back(score(train, params));
    if (!has_val) continue;
    const double v = score(val, params);
    meta.val_mae_trace.push_back(v);
    if (v < best_val - 1e-4) {
      best_val = v;
      best_theta = params.theta;
      since_best = 0;
    } else if (++since_best >= spec.patience) {
      ++epoch;
      break;
    }
  }
  if (has_val) params.theta = std::move(best_theta);

  meta.epochs_run = epoch;
  meta.hyperparameters["hidden_size"] = static_cast<double>(spec.hidden_size);
  meta.hyperparameters["learning_rate"] = spec.learning_rate;
  meta.hyperparameters["max_epochs"] = static_cast<double>(spec.max_epochs);
  meta.hyperparameters["patience"] = static_cast<double>(spec.patience);
  meta.hyperparameters["batch_size"] = static_cast<double>(spec.batch_size);
  meta.hyperparameters["seed"] = static_cast<double>(spec.seed);
  TrainedModel m(ModelKind::LSTM, train.cols(), std::move(params));
  m.meta() = std::move(meta);
  return m;
}

}  // namespace amr
