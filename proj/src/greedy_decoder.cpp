#include "fedmoe/greedy_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedmoe {

RidgeWindow build_window(std::span<const Matrix> z, std::span<const Vector> y_hat,
                         std::span<const Vector> y, std::size_t t, std::size_t client_window,
                         double alpha) {
  if (t == 0) throw std::invalid_argument("build_window: empty history (t = 0)");
  if (client_window == 0) throw std::invalid_argument("build_window: client_window must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("build_window: alpha must be >= 0");
  if (z.size() < t || y_hat.size() < t || y.size() < t + 1) {
    throw std::invalid_argument("build_window: history shorter than t = " + std::to_string(t));
  }

  const std::size_t first = t > client_window ? t - client_window : 0;
  const auto d_y = z[first].rows();
  const auto d_z = z[first].cols();
  const auto steps = static_cast<Eigen::Index>(t - first);

  RidgeWindow w;
  w.first_step = first;
  w.design.resize(steps * d_y, d_z);
  w.target.resize(steps * d_y);
  w.step_weights.reserve(static_cast<std::size_t>(steps));

  for (std::size_t s = first; s < t; ++s) {
    if (z[s].rows() != d_y || z[s].cols() != d_z || y_hat[s].size() != d_y || y[s + 1].size() != d_y) {
      throw ShapeError("build_window: inconsistent shapes at step " + std::to_string(s));
    }
    const double weight = std::exp(-alpha * static_cast<double>(t - 1 - s));
    const double root = std::sqrt(weight);
    const auto row = static_cast<Eigen::Index>(s - first) * d_y;
    w.design.middleRows(row, d_y) = root * z[s];
    w.target.segment(row, d_y) = root * (y[s + 1] - y_hat[s]);
    w.step_weights.push_back(weight);
  }
  return w;
}

Vector ridge_solve(const RidgeWindow& window, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("ridge_solve: gamma must be > 0");
  if (!window.design.allFinite() || !window.target.allFinite()) {
    throw std::domain_error("ridge_solve: non-finite design entries (latent blow-up upstream?)");
  }
  const auto d_z = window.design.cols();
  Matrix gram = window.design.transpose() * window.design;
  gram.diagonal().array() += gamma;
  const Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("ridge_solve: Cholesky failed");
  Vector beta = llt.solve(window.design.transpose() * window.target);
  if (beta.size() != d_z) throw std::logic_error("ridge_solve: bad solution size");
  return beta;
}

double ridge_objective(const RidgeWindow& window, double gamma, const Vector& beta) {
  return (window.target - window.design * beta).squaredNorm() + gamma * beta.squaredNorm();
}

Vector ridge_gradient(const RidgeWindow& window, double gamma, const Vector& beta) {
  const Matrix& x = window.design;
  return 2.0 * (x.transpose() * (x * beta) - x.transpose() * window.target + gamma * beta);
}

}  // namespace fedmoe
