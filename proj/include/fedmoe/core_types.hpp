#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedmoe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Raised when an argument violates a documented shape or range precondition.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Problem dimensions shared by every module.
//   n_agents  N    number of experts
//   d_x            input width
//   d_y            target width
//   d_z            latent width (columns of each Z^i)
struct Dims {
  std::size_t n_agents = 1;
  std::size_t d_x = 1;
  std::size_t d_y = 1;
  std::size_t d_z = 1;

  // Throws ShapeError if any dimension is zero.
  void validate() const;

  std::size_t stacked_y() const { return n_agents * d_y; }
  std::size_t stacked_z() const { return n_agents * d_z; }
};

struct SeriesRecord {
  std::size_t t = 0;
  Vector x;
  Vector y;
};

// Concatenated agent predictions and the latent blocks that produced them.
// Blocks are agent-major: agent 0 occupies the first d_y rows of y_hat.
struct StackedState {
  Vector y_hat;
  std::vector<Matrix> z_blocks;

  void validate(const Dims& dims) const;
};

enum class SelectorKind {
  kOutput,  // N*d_y x d_y, identity in block-row i
  kLatent,  // N*d_z x d_z, identity in block-row i
};

struct GameConfig {
  std::size_t game_horizon = 3;
  std::vector<double> alphas;
  std::vector<double> gammas;
  std::size_t sync_period = 1;
  std::size_t mc_samples = 100;

  void validate(std::size_t n_agents) const;
};

struct ServerConfig {
  double kappa = 1.0;
  double eta = 1.0;
  std::size_t client_window = 3;
  std::vector<double> sigmas;

  void validate(std::size_t n_agents) const;
};

// Agent indices are zero-based throughout the library.
Matrix build_selector(std::size_t agent, SelectorKind kind, const Dims& dims);

// Vertical stack of w^i * I_{d_y}; shape N*d_y x d_y.
Matrix build_weight_block(const Vector& weights, const Dims& dims);

// Block-diagonal assembly of N blocks of shape d_y x d_z.
Matrix block_diag_z(const std::vector<Matrix>& z_blocks);

// Extracts block i (length `block`) from an agent-major stacked vector.
inline auto agent_block(const Vector& stacked, std::size_t agent, std::size_t block) {
  return stacked.segment(static_cast<Eigen::Index>(agent * block),
                         static_cast<Eigen::Index>(block));
}

bool all_finite(const Matrix& m);

}  // namespace fedmoe
