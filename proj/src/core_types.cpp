#include "fedmoe/core_types.hpp"

#include <cmath>
#include <string>

namespace fedmoe {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

void Dims::validate() const {
  if (n_agents == 0 || d_x == 0 || d_y == 0 || d_z == 0) {
    throw ShapeError("Dims: all of n_agents, d_x, d_y, d_z must be >= 1");
  }
}

void StackedState::validate(const Dims& dims) const {
  if (z_blocks.size() != dims.n_agents) {
    throw ShapeError("StackedState: expected " + std::to_string(dims.n_agents) +
                     " latent blocks, got " + std::to_string(z_blocks.size()));
  }
  if (static_cast<std::size_t>(y_hat.size()) != dims.stacked_y()) {
    throw ShapeError("StackedState: y_hat has wrong length");
  }
  for (const auto& z : z_blocks) {
    if (z.rows() != idx(dims.d_y) || z.cols() != idx(dims.d_z)) {
      throw ShapeError("StackedState: latent block is not d_y x d_z");
    }
  }
}

void GameConfig::validate(std::size_t n_agents) const {
  if (game_horizon == 0) throw ShapeError("GameConfig: game_horizon must be >= 1");
  if (sync_period == 0) throw ShapeError("GameConfig: sync_period must be >= 1");
  if (mc_samples == 0) throw ShapeError("GameConfig: mc_samples must be >= 1");
  if (alphas.size() != n_agents || gammas.size() != n_agents) {
    throw ShapeError("GameConfig: alphas and gammas need one entry per agent");
  }
  for (double a : alphas) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ShapeError("GameConfig: alpha must be finite and >= 0");
  }
  for (double g : gammas) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ShapeError("GameConfig: gamma must be finite and > 0");
  }
}

void ServerConfig::validate(std::size_t n_agents) const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ShapeError("ServerConfig: kappa must be > 0");
  if (!std::isfinite(eta)) throw ShapeError("ServerConfig: eta must be finite");
  if (client_window == 0) throw ShapeError("ServerConfig: client_window must be >= 1");
  if (sigmas.size() != n_agents) throw ShapeError("ServerConfig: sigmas needs one entry per agent");
  for (double s : sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ShapeError("ServerConfig: sigma must be >= 0");
  }
}

Matrix build_selector(std::size_t agent, SelectorKind kind, const Dims& dims) {
  dims.validate();
  if (agent >= dims.n_agents) {
    throw ShapeError("build_selector: agent index " + std::to_string(agent) + " out of range [0, " +
                     std::to_string(dims.n_agents) + ")");
  }
  const std::size_t block = kind == SelectorKind::kOutput ? dims.d_y : dims.d_z;
  Matrix e = Matrix::Zero(idx(dims.n_agents * block), idx(block));
  e.block(idx(agent * block), 0, idx(block), idx(block)).setIdentity();
  return e;
}

Matrix build_weight_block(const Vector& weights, const Dims& dims) {
  dims.validate();
  if (static_cast<std::size_t>(weights.size()) != dims.n_agents) {
    throw ShapeError("build_weight_block: expected " + std::to_string(dims.n_agents) +
                     " weights, got " + std::to_string(weights.size()));
  }
  const auto dy = idx(dims.d_y);
  Matrix w = Matrix::Zero(idx(dims.stacked_y()), dy);
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    w.block(i * dy, 0, dy, dy).diagonal().setConstant(weights(i));
  }
  return w;
}

Matrix block_diag_z(const std::vector<Matrix>& z_blocks) {
  if (z_blocks.empty()) throw ShapeError("block_diag_z: no blocks");
  const auto rows = z_blocks.front().rows();
  const auto cols = z_blocks.front().cols();
  for (const auto& z : z_blocks) {
    if (z.rows() != rows || z.cols() != cols) {
      throw ShapeError("block_diag_z: blocks must share one shape");
    }
  }
  const auto n = static_cast<Eigen::Index>(z_blocks.size());
  Matrix out = Matrix::Zero(n * rows, n * cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.block(i * rows, i * cols, rows, cols) = z_blocks[static_cast<std::size_t>(i)];
  }
  return out;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace fedmoe
