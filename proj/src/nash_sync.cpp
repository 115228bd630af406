#include "fedmoe/nash_sync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "fedmoe/rng.hpp"

namespace fedmoe {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void check_eta(const GameWindow& window, const SyncOptions& options) {
  const double tol = options.eta_tolerance * std::max(1.0, std::abs(options.eta));
  for (std::size_t s = 0; s < window.w.size(); ++s) {
    const double sum = window.w[s].sum();
    if (!(std::abs(sum - options.eta) <= tol)) {
      throw std::invalid_argument("backward_pass: server weights at step " + std::to_string(s) + " sum to " +
                                  std::to_string(sum) + ", expected eta = " + std::to_string(options.eta));
    }
  }
}

bool all_relu_or_point_mass(const std::vector<LatentLaw>& laws) {
  return std::all_of(laws.begin(), laws.end(), [](const LatentLaw& l) {
    return l.act.kind == ActivationKind::kRelu || l.deterministic();
  });
}

MomentSet step_moments(const GameWindow& window, std::size_t t, const StepInputs& in, const GameConfig& config,
                       const SyncOptions& options) {
  const auto& laws = window.laws[t];
  const bool deterministic = std::all_of(laws.begin(), laws.end(), [](const LatentLaw& l) { return l.deterministic(); });
  switch (options.method) {
    case MomentMethod::kAuto:
      if (deterministic) {
        std::vector<Matrix> z;
        z.reserve(laws.size());
        for (const auto& l : laws) z.push_back(l.noiseless());
        return assemble_deterministic_moments(z, in, window.dims);
      }
      if (all_relu_or_point_mass(laws)) return assemble_rfn_moments(laws, in, window.dims);
      return assemble_mc_moments(laws, in, window.dims, config.mc_samples, options.mc_seed, t);
    case MomentMethod::kClosedForm:
      return assemble_rfn_moments(laws, in, window.dims);
    case MomentMethod::kMonteCarlo:
      return assemble_mc_moments(laws, in, window.dims, config.mc_samples, options.mc_seed, t);
  }
  throw std::logic_error("backward_pass: unknown moment method");
}

// Per-row discount over the stacked latent coordinates.
Vector latent_discounts(const GameConfig& config, const Dims& dims, std::size_t horizon, std::size_t t) {
  Vector e(idx(dims.stacked_z()));
  for (std::size_t i = 0; i < dims.n_agents; ++i) {
    e.segment(idx(i * dims.d_z), idx(dims.d_z)).setConstant(discount(config.alphas[i], horizon, t));
  }
  return e;
}

double quad_value(const Matrix& p, const Vector& s, const Vector& y) { return y.dot(p * y) + 2.0 * s.dot(y); }

}  // namespace

void GameWindow::validate() const {
  dims.validate();
  const std::size_t t = horizon();
  if (t == 0) throw ShapeError("GameWindow: horizon must be >= 1");
  if (y.size() != t + 1) throw ShapeError("GameWindow: need T+1 targets");
  if (laws.size() != t || z.size() != t) throw ShapeError("GameWindow: need T latent laws and T realized latents");
  const auto dy = idx(dims.d_y);
  const auto dz = idx(dims.d_z);
  for (const auto& v : y) {
    if (v.size() != dy || !v.allFinite()) throw ShapeError("GameWindow: target is not a finite d_y vector");
  }
  for (const auto& v : w) {
    if (v.size() != idx(dims.n_agents) || !v.allFinite()) throw ShapeError("GameWindow: weights need N finite entries");
  }
  for (std::size_t s = 0; s < t; ++s) {
    if (laws[s].size() != dims.n_agents || z[s].size() != dims.n_agents) {
      throw ShapeError("GameWindow: step " + std::to_string(s) + " needs one law and one latent per agent");
    }
    for (std::size_t i = 0; i < dims.n_agents; ++i) {
      if (z[s][i].rows() != dy || z[s][i].cols() != dz) throw ShapeError("GameWindow: latent is not d_y x d_z");
      if (!z[s][i].allFinite()) {
        throw std::domain_error("GameWindow: non-finite latent at step " + std::to_string(s));
      }
    }
  }
  if (y_hat0.size() != idx(dims.stacked_y())) throw ShapeError("GameWindow: y_hat0 must have length N*d_y");
}

bool GameWindow::deterministic() const {
  for (const auto& step : laws) {
    for (const auto& l : step) {
      if (!l.deterministic()) return false;
    }
  }
  return true;
}

Vector replicate_target(const Vector& y0, std::size_t n_agents) {
  return y0.replicate(idx(n_agents), 1);
}

double discount(double alpha, std::size_t horizon, std::size_t t) {
  if (t >= horizon) throw std::out_of_range("discount: t must be < horizon");
  return std::exp(-alpha * static_cast<double>(horizon - 1 - t));
}

NashSolution backward_pass(const GameWindow& window, const GameConfig& config, const SyncOptions& options) {
  window.validate();
  const Dims& dims = window.dims;
  config.validate(dims.n_agents);
  check_eta(window, options);

  const std::size_t n = dims.n_agents;
  const std::size_t horizon = window.horizon();
  const auto ny = idx(dims.stacked_y());
  const auto nz = idx(dims.stacked_z());

  NashSolution sol;
  sol.G.resize(horizon);
  sol.H.resize(horizon);
  sol.moments.resize(horizon);
  sol.P.assign(n, std::vector<Matrix>(horizon + 1));
  sol.S.assign(n, std::vector<Vector>(horizon + 1));
  for (std::size_t i = 0; i < n; ++i) {
    sol.P[i][horizon] = Matrix::Zero(ny, ny);
    sol.S[i][horizon] = Vector::Zero(ny);
  }

  Vector gamma(nz);
  for (std::size_t i = 0; i < n; ++i) gamma.segment(idx(i * dims.d_z), idx(dims.d_z)).setConstant(config.gammas[i]);

  for (std::size_t step = horizon; step-- > 0;) {
    StepInputs in;
    in.w = window.w[step];
    for (std::size_t i = 0; i < n; ++i) {
      in.p_next.push_back(sol.P[i][step + 1]);
      in.s_next.push_back(sol.S[i][step + 1]);
    }
    const MomentSet m = step_moments(window, step, in, config, options);
    const Vector e = latent_discounts(config, dims, horizon, step);
    const Matrix w = build_weight_block(window.w[step], dims);
    const Matrix wwt = w * w.transpose();
    const Vector wy = w * window.y[step + 1];

    Matrix mt = m.A + e.asDiagonal() * m.Ahat;
    mt.diagonal() += e.cwiseProduct(gamma);
    const Matrix rhs_g = e.asDiagonal() * (m.D.transpose() * wwt) + m.B;
    const Vector rhs_h = e.asDiagonal() * (m.D.transpose() * wy) - m.C;

    const Eigen::PartialPivLU<Matrix> lu(mt);
    const double rcond = mt.allFinite() ? lu.rcond() : 0.0;
    if (!(rcond >= options.min_rcond)) {
      throw std::runtime_error("backward_pass: invertibility hypothesis violated at t = " + std::to_string(step) +
                               " (rcond " + std::to_string(rcond) + ")");
    }
    const Matrix g = -lu.solve(rhs_g);
    const Vector h = lu.solve(rhs_h);

    for (std::size_t i = 0; i < n; ++i) {
      const double ei = discount(config.alphas[i], horizon, step);
      Matrix q = ei * m.Ahat + m.D_i[i];
      q.diagonal().segment(idx(i * dims.d_z), idx(dims.d_z)).array() += ei * config.gammas[i];
      const Matrix k = ei * wwt + sol.P[i][step + 1];
      const Matrix kdg = k * m.D * g;
      Matrix p = g.transpose() * q * g + kdg + kdg.transpose() + k;
      sol.P[i][step] = 0.5 * (p + p.transpose());
      const Vector l = -ei * wy + sol.S[i][step + 1];
      sol.S[i][step] = g.transpose() * (q * h) + k * (m.D * h) + g.transpose() * (m.D.transpose() * l) + l;
    }
    sol.G[step] = g;
    sol.H[step] = h;
    sol.moments[step] = m;
  }
  return sol;
}

Rollout forward_rollout(const NashSolution& solution, const GameWindow& window, const Vector& y_hat0) {
  const std::size_t horizon = window.horizon();
  if (solution.G.size() != horizon || solution.H.size() != horizon) {
    throw ShapeError("forward_rollout: coefficients do not match the window horizon");
  }
  if (y_hat0.size() != idx(window.dims.stacked_y())) throw ShapeError("forward_rollout: y_hat0 must have length N*d_y");
  Rollout r;
  r.y_hat.reserve(horizon + 1);
  r.beta.reserve(horizon);
  r.y_hat.push_back(y_hat0);
  for (std::size_t t = 0; t < horizon; ++t) {
    Vector beta = solution.G[t] * r.y_hat.back() + solution.H[t];
    const Matrix dz = block_diag_z(window.z[t]);
    r.y_hat.push_back(r.y_hat.back() + dz * beta);
    r.beta.push_back(std::move(beta));
  }
  return r;
}

NashSolution solve_game(const GameWindow& window, const GameConfig& config, const SyncOptions& options) {
  NashSolution sol = backward_pass(window, config, options);
  Rollout r = forward_rollout(sol, window, window.y_hat0);
  sol.beta = std::move(r.beta);
  sol.y_hat = std::move(r.y_hat);
  return sol;
}

double agent_cost(const GameWindow& window, const GameConfig& config, std::size_t agent,
                  const std::vector<Vector>& beta, const std::vector<Vector>& y_hat, std::size_t from) {
  const std::size_t horizon = window.horizon();
  if (beta.size() != horizon || y_hat.size() != horizon + 1) throw ShapeError("agent_cost: trajectory length mismatch");
  const auto dz = idx(window.dims.d_z);
  double total = 0.0;
  for (std::size_t t = from; t < horizon; ++t) {
    const Matrix w = build_weight_block(window.w[t], window.dims);
    const Vector err = window.y[t + 1] - w.transpose() * y_hat[t + 1];
    const double reg = beta[t].segment(idx(agent) * dz, dz).squaredNorm();
    total += discount(config.alphas[agent], horizon, t) * (err.squaredNorm() + config.gammas[agent] * reg);
  }
  return total;
}

FocReport verify_foc(const NashSolution& solution, const GameWindow& window, const GameConfig& config,
                     std::size_t agent, double tolerance, std::size_t n_deviations, std::uint64_t seed,
                     double deviation_scale) {
  const Dims& dims = window.dims;
  if (agent >= dims.n_agents) throw std::out_of_range("verify_foc: agent index out of range");
  const std::size_t horizon = window.horizon();
  if (solution.beta.size() != horizon || solution.y_hat.size() != horizon + 1) {
    throw std::invalid_argument("verify_foc: solution has no rollout");
  }
  const auto dy = idx(dims.d_y);
  const auto dz = idx(dims.d_z);
  const auto ai = idx(agent);
  const bool exact = window.deterministic();

  FocReport rep;
  for (std::size_t t = 0; t < horizon; ++t) {
    const double ei = discount(config.alphas[agent], horizon, t);
    const double wi = window.w[t](ai);
    const Matrix w = build_weight_block(window.w[t], dims);
    const Vector& beta = solution.beta[t];
    const Vector beta_i = beta.segment(ai * dz, dz);
    const Matrix& p = solution.P[agent][t + 1];
    const Vector& s = solution.S[agent][t + 1];
    Vector grad;
    if (exact) {
      const Matrix& zi = window.z[t][agent];
      const Vector& next = solution.y_hat[t + 1];
      const Vector err = window.y[t + 1] - w.transpose() * next;
      const Vector value_grad = (p * next + s).segment(ai * dy, dy);
      grad = 2.0 * ei * (-wi * zi.transpose() * err + config.gammas[agent] * beta_i) +
             2.0 * zi.transpose() * value_grad;
    } else {
      // Expected gradient over Z_t, from the assembled moments.
      const MomentSet& m = solution.moments[t];
      const Vector& cur = solution.y_hat[t];
      const Matrix& mu = m.mean_z[agent];
      const Vector err = window.y[t + 1] - w.transpose() * cur;
      grad = 2.0 * ei * (-wi * mu.transpose() * err + m.Ahat.middleRows(ai * dz, dz) * beta +
                         config.gammas[agent] * beta_i) +
             2.0 * (m.A.middleRows(ai * dz, dz) * beta + m.B.middleRows(ai * dz, dz) * cur + m.C.segment(ai * dz, dz));
    }
    const double r = grad.cwiseAbs().maxCoeff();
    rep.residual.push_back(r);
    rep.max_residual = std::max(rep.max_residual, r);
  }

  const double j_eq = agent_cost(window, config, agent, solution.beta, solution.y_hat);
  rep.min_gain = std::numeric_limits<double>::infinity();
  if (exact) {
    std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(agent)}));
    std::uniform_real_distribution<double> log_scale(-4.0, 0.0);
    for (std::size_t k = 0; k < n_deviations; ++k) {
      const double scale = deviation_scale * std::pow(10.0, log_scale(rng));
      std::vector<Vector> beta(horizon);
      std::vector<Vector> y_hat{solution.y_hat[0]};
      for (std::size_t t = 0; t < horizon; ++t) {
        beta[t] = solution.G[t] * y_hat.back() + solution.H[t];
        beta[t].segment(ai * dz, dz) = solution.beta[t].segment(ai * dz, dz) + scale * standard_normal(dz, 1, rng);
        y_hat.push_back(y_hat.back() + block_diag_z(window.z[t]) * beta[t]);
      }
      rep.min_gain = std::min(rep.min_gain, agent_cost(window, config, agent, beta, y_hat) - j_eq);
      ++rep.deviations;
    }
  }
  if (rep.deviations == 0) rep.min_gain = 0.0;
  rep.passed = rep.max_residual <= tolerance && rep.min_gain >= -1e-9 * std::max(1.0, std::abs(j_eq));
  return rep;
}

ValueReport value_consistency(const NashSolution& solution, const GameWindow& window, const GameConfig& config,
                              std::size_t agent, const std::vector<Vector>& initializations, double tolerance) {
  if (!window.deterministic()) throw std::invalid_argument("value_consistency: needs deterministic latents");
  if (initializations.size() < 3) throw std::invalid_argument("value_consistency: needs at least 3 initializations");
  if (agent >= window.dims.n_agents) throw std::out_of_range("value_consistency: agent index out of range");
  const std::size_t horizon = window.horizon();
  ValueReport rep;
  for (const auto& init : initializations) {
    const Rollout r = forward_rollout(solution, window, init);
    std::vector<double> offsets;
    for (std::size_t t = 0; t <= horizon; ++t) {
      const double ctg = agent_cost(window, config, agent, r.beta, r.y_hat, t);
      offsets.push_back(ctg - quad_value(solution.P[agent][t], solution.S[agent][t], r.y_hat[t]));
    }
    rep.offset.push_back(std::move(offsets));
  }
  for (std::size_t t = 0; t <= horizon; ++t) {
    double lo = rep.offset[0][t];
    double hi = lo;
    for (const auto& o : rep.offset) {
      lo = std::min(lo, o[t]);
      hi = std::max(hi, o[t]);
    }
    rep.max_spread = std::max(rep.max_spread, hi - lo);
  }
  rep.passed = rep.max_spread <= tolerance;
  return rep;
}

SyncResult synchronize(const GameWindow& window, const GameConfig& config, const SyncOptions& options) {
  SyncResult out;
  out.solution = solve_game(window, config, options);
  out.beta_last = out.solution.beta.back();
  out.y_hat_last = out.solution.y_hat.back();
  return out;
}

}  // namespace fedmoe
