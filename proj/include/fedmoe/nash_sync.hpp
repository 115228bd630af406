#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedmoe/core_types.hpp"
#include "fedmoe/encoders.hpp"
#include "fedmoe/moments.hpp"

namespace fedmoe {

// One synchronisation window with internal indices s = 0..T, T = horizon().
//   y[s]        shared target, s = 0..T
//   w[s]        server weights used against Yhat_{s+1}, s = 0..T-1
//   laws[s][i]  law of Z^i_s given the recorded history, s = 0..T-1
//   z[s][i]     realized Z^i_s, used by the forward rollout
//   y_hat0      stacked starting point of the rollout (N*d_y)
struct GameWindow {
  Dims dims;
  std::vector<Vector> y;
  std::vector<Vector> w;
  std::vector<std::vector<LatentLaw>> laws;
  std::vector<std::vector<Matrix>> z;
  Vector y_hat0;

  std::size_t horizon() const { return w.size(); }
  void validate() const;
  bool deterministic() const;
};

// Yhat_0 replicated from the observed target, as the default rollout anchor.
Vector replicate_target(const Vector& y0, std::size_t n_agents);

enum class MomentMethod {
  kAuto,        // exact for deterministic laws, closed form for ReLU, otherwise Monte-Carlo
  kClosedForm,
  kMonteCarlo,
};

struct SyncOptions {
  MomentMethod method = MomentMethod::kAuto;
  std::uint64_t mc_seed = 0;
  double eta = 1.0;
  double eta_tolerance = 1e-9;
  // Reciprocal condition number below which M(t) counts as singular.
  double min_rcond = 1e-13;
};

struct NashSolution {
  std::vector<Matrix> G;               // t = 0..T-1
  std::vector<Vector> H;               // t = 0..T-1
  std::vector<std::vector<Matrix>> P;  // [agent][t], t = 0..T
  std::vector<std::vector<Vector>> S;  // [agent][t], t = 0..T
  std::vector<MomentSet> moments;      // t = 0..T-1
  std::vector<Vector> beta;            // rollout, t = 0..T-1
  std::vector<Vector> y_hat;           // rollout, t = 0..T
};

// Discount e^{-alpha_i (T-1-t)}.
double discount(double alpha, std::size_t horizon, std::size_t t);

// Backward recursion for P_i, S_i, G, H. Throws std::runtime_error naming t when
// M(t) is not invertible.
NashSolution backward_pass(const GameWindow& window, const GameConfig& config, const SyncOptions& options);

struct Rollout {
  std::vector<Vector> beta;
  std::vector<Vector> y_hat;
};

// beta_t = G(t) Yhat_t + H(t); Yhat_{t+1} = Yhat_t + blockdiag(Z_t) beta_t.
Rollout forward_rollout(const NashSolution& solution, const GameWindow& window, const Vector& y_hat0);

// Backward pass followed by the rollout from window.y_hat0, stored in the solution.
NashSolution solve_game(const GameWindow& window, const GameConfig& config, const SyncOptions& options);

// Agent i's discounted cost along a trajectory on the realized latents.
double agent_cost(const GameWindow& window, const GameConfig& config, std::size_t agent,
                  const std::vector<Vector>& beta, const std::vector<Vector>& y_hat, std::size_t from = 0);

struct FocReport {
  std::vector<double> residual;  // max-norm of agent i's gradient at each t
  double max_residual = 0.0;
  std::size_t deviations = 0;
  // Smallest J_i(deviation) - J_i(equilibrium) seen; should be >= 0.
  double min_gain = 0.0;
  bool passed = false;
};

// First-order conditions of agent i at the rollout, evaluated term by term from
// the objective and the value functions, plus `n_deviations` random unilateral
// deviations of agent i (others keep their feedback rule). Deviations are only
// attempted for deterministic windows.
FocReport verify_foc(const NashSolution& solution, const GameWindow& window, const GameConfig& config,
                     std::size_t agent, double tolerance, std::size_t n_deviations = 200,
                     std::uint64_t seed = 7, double deviation_scale = 1.0);

struct ValueReport {
  // offset[k][t] = cost-to-go - (Yhat^T P Yhat + 2 S^T Yhat) for initialization k.
  std::vector<std::vector<double>> offset;
  double max_spread = 0.0;
  bool passed = false;
};

ValueReport value_consistency(const NashSolution& solution, const GameWindow& window, const GameConfig& config,
                              std::size_t agent, const std::vector<Vector>& initializations,
                              double tolerance = 1e-6);

struct SyncResult {
  Vector beta_last;  // stacked beta_{T-1}
  Vector y_hat_last; // stacked Yhat_T
  NashSolution solution;
};

SyncResult synchronize(const GameWindow& window, const GameConfig& config, const SyncOptions& options);

}  // namespace fedmoe
