#pragma once

// LSTM cell math with hand-written backpropagation. Each row is a length-1
// sequence starting from h0 = c0 = 0.
//
// Parameter layout in LstmParams::theta (gate order i, f, g, o):
//   W_x   4H x D   input weights
//   W_h   4H x H   recurrent weights
//   b     4H       gate biases
//   w_out H        output head
//   b_out 1

#include <cstdint>
#include <span>
#include <vector>

#include "amr/models.hpp"

namespace amr::lstm {

struct Layout {
  std::size_t input = 0;
  std::size_t hidden = 0;

  std::size_t wx() const noexcept { return 0; }
  std::size_t wh() const noexcept { return 4 * hidden * input; }
  std::size_t bias() const noexcept { return wh() + 4 * hidden * hidden; }
  std::size_t w_out() const noexcept { return bias() + 4 * hidden; }
  std::size_t b_out() const noexcept { return w_out() + hidden; }
  std::size_t size() const noexcept { return b_out() + 1; }
};

/// Uniform(-1/sqrt(H), 1/sqrt(H)) initialisation from a seeded generator.
std::vector<double> init_theta(const Layout& layout, std::uint64_t seed);

/// Output for one standardized input row.
double forward(const Layout& layout, std::span<const double> theta, std::span<const double> x);

/// Mean squared error over rows of `xs` (n x D row-major) against `ys`.
double loss(const Layout& layout, std::span<const double> theta, std::span<const double> xs,
            std::span<const double> ys);

/// Same loss; writes d loss / d theta into `grad` (resized to layout.size()).
double loss_and_gradient(const Layout& layout, std::span<const double> theta,
                         std::span<const double> xs, std::span<const double> ys,
                         std::vector<double>& grad);

/// Prediction in target units (unclipped) for one raw feature row.
double predict_row(const LstmParams& p, std::span<const double> x);

}  // namespace amr::lstm
