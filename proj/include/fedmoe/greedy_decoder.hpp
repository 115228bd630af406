#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedmoe/core_types.hpp"

namespace fedmoe {

// Exponentially weighted ridge design for one agent. Each step s in the window
// contributes d_y rows: sqrt(weight_s) * Z_s in `design` and
// sqrt(weight_s) * (y_{s+1} - Yhat_s) in `target`. Rows run oldest to newest.
struct RidgeWindow {
  Matrix design;
  Vector target;
  std::vector<double> step_weights;  // e^{-alpha (t-1-s)}, before the square root
  std::size_t first_step = 0;
};

// Window for the decoder beta_t, fitted on s = max(t - client_window, 0) .. t-1.
// Needs z[s], y_hat[s] for s < t and y[s] for s <= t.
RidgeWindow build_window(std::span<const Matrix> z, std::span<const Vector> y_hat,
                         std::span<const Vector> y, std::size_t t, std::size_t client_window,
                         double alpha);

// (X^T X + gamma I)^{-1} X^T ybar via Cholesky.
Vector ridge_solve(const RidgeWindow& window, double gamma);

double ridge_objective(const RidgeWindow& window, double gamma, const Vector& beta);
Vector ridge_gradient(const RidgeWindow& window, double gamma, const Vector& beta);

}  // namespace fedmoe
