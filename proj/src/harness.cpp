#include "fedmoe/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedmoe/greedy_decoder.hpp"
#include "fedmoe/rng.hpp"
#include "fedmoe/server_weights.hpp"

namespace fedmoe {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Encoder make_encoder(const RunConfig& cfg, const Dims& dims, std::size_t agent) {
  const double sigma = cfg.server.sigmas[agent];
  switch (cfg.encoders[agent]) {
    case EncoderKind::kDeterministic:
      return Encoder(make_deterministic_params(default_feature_map(dims, cfg.feature_seed, agent)), dims);
    case EncoderKind::kRfn:
      return Encoder(make_rfn_params(dims, sigma, cfg.seed, agent), dims);
    case EncoderKind::kEsn: {
      EncoderParams p = make_esn_params(dims, sigma, cfg.seed, agent, cfg.esn_spectral_radius);
      p.activation.slope = cfg.hard_sigmoid_slope;
      p.activation.offset = cfg.hard_sigmoid_offset;
      return Encoder(std::move(p), dims);
    }
  }
  throw std::logic_error("make_encoder: unknown kind");
}

std::string describe(const std::exception& e) { return e.what(); }

}  // namespace

RunResult run_online(const RunConfig& cfg, const Dataset& data) {
  cfg.validate();
  data.validate();
  if (data.size() < 2) throw std::invalid_argument("run_online: need at least 2 records");
  const Dims dims{cfg.n_agents, data.d_x, data.d_y, cfg.d_z};
  dims.validate();
  const std::size_t n_agents = dims.n_agents;
  const auto dy = idx(dims.d_y);
  const auto dz = idx(dims.d_z);

  std::vector<Encoder> encoders;
  std::vector<PathRng> rngs;
  for (std::size_t i = 0; i < n_agents; ++i) {
    encoders.push_back(make_encoder(cfg, dims, i));
    rngs.push_back(make_stream(cfg.seed, i, StreamPurpose::kPath));
  }

  // Targets become visible only after the step that predicts them.
  std::vector<Vector> seen{data.records[0].y};
  std::vector<std::vector<Matrix>> z(n_agents);
  std::vector<std::vector<LatentLaw>> laws(n_agents);
  std::vector<std::vector<Vector>> y_hat(n_agents, std::vector<Vector>{data.records[0].y});
  std::vector<Vector> weights;

  RunResult result;
  const auto run_start = Clock::now();
  for (std::size_t t = 1; t < data.size(); ++t) {
    StepRecord rec;
    rec.t = t;
    const auto step_start = Clock::now();
    std::vector<Vector> next(n_agents);
    try {
      auto phase = Clock::now();
      for (std::size_t i = 0; i < n_agents; ++i) {
        Vector beta = Vector::Zero(dz);
        if (t >= 2) {
          const RidgeWindow win =
              build_window(z[i], y_hat[i], seen, t - 1, cfg.server.client_window, cfg.game.alphas[i]);
          beta = ridge_solve(win, cfg.game.gammas[i]);
        }
        const Matrix prev = t >= 2 ? z[i][t - 2] : encoders[i].initial_state();
        laws[i].push_back(encoders[i].law(data.records[t].x, prev));
        z[i].push_back(laws[i].back().sample(rngs[i]));
        next[i] = y_hat[i][t - 1] + z[i].back() * beta;
      }
      rec.time.agent = seconds_since(phase);

      phase = Clock::now();
      WeightProblem wp;
      wp.y_hat.resize(dy, idx(n_agents));
      for (std::size_t i = 0; i < n_agents; ++i) wp.y_hat.col(idx(i)) = y_hat[i][t - 1];
      wp.y = seen[t - 1];
      wp.kappa = cfg.server.kappa;
      wp.eta = cfg.server.eta;
      weights.push_back(solve_mixture_weights(wp).w);
      rec.time.server = seconds_since(phase);

      const bool sync = cfg.mode == Mode::kGame && t % cfg.game.sync_period == 0 && t >= 2;
      if (sync) {
        phase = Clock::now();
        const std::size_t horizon = std::min(cfg.game.game_horizon, t - 1);
        const std::size_t r0 = t - 1 - horizon;
        GameWindow gw;
        gw.dims = dims;
        gw.y.assign(seen.begin() + static_cast<std::ptrdiff_t>(r0), seen.begin() + static_cast<std::ptrdiff_t>(t));
        gw.w.assign(weights.begin() + static_cast<std::ptrdiff_t>(r0),
                    weights.begin() + static_cast<std::ptrdiff_t>(t - 1));
        gw.laws.resize(horizon);
        gw.z.resize(horizon);
        for (std::size_t s = 0; s < horizon; ++s) {
          for (std::size_t i = 0; i < n_agents; ++i) {
            gw.laws[s].push_back(laws[i][r0 + s]);
            gw.z[s].push_back(z[i][r0 + s]);
          }
        }
        if (cfg.sync_init == SyncInit::kTarget) {
          gw.y_hat0 = replicate_target(seen[r0], n_agents);
        } else {
          gw.y_hat0.resize(idx(dims.stacked_y()));
          for (std::size_t i = 0; i < n_agents; ++i) gw.y_hat0.segment(idx(i) * dy, dy) = y_hat[i][r0];
        }
        SyncOptions opts;
        opts.method = cfg.moments;
        opts.mc_seed = derive_seed({cfg.seed, static_cast<std::uint64_t>(StreamPurpose::kMonteCarlo),
                                    static_cast<std::uint64_t>(t)});
        opts.eta = cfg.server.eta;
        const SyncResult res = synchronize(gw, cfg.game, opts);
        for (std::size_t i = 0; i < n_agents; ++i) {
          const Vector beta = res.beta_last.segment(idx(i) * dz, dz);
          z[i][t - 1] = laws[i][t - 1].sample(rngs[i]);
          next[i] = res.y_hat_last.segment(idx(i) * dy, dy) + z[i][t - 1] * beta;
        }
        rec.time.sync = seconds_since(phase);
        rec.synced = true;
      }

      rec.w = weights.back();
      rec.prediction = Vector::Zero(dy);
      for (std::size_t i = 0; i < n_agents; ++i) {
        if (!next[i].allFinite()) throw std::domain_error("agent " + std::to_string(i) + " prediction is not finite");
        rec.prediction += rec.w(idx(i)) * next[i];
        y_hat[i].push_back(next[i]);
      }
      rec.y_hat = std::move(next);
    } catch (const StepError&) {
      throw;
    } catch (const std::exception& e) {
      throw StepError(t, describe(e));
    }
    rec.y = data.records[t].y;
    rec.sq_error = (rec.prediction - rec.y).array().square().matrix();
    rec.time.total = seconds_since(step_start);
    seen.push_back(data.records[t].y);
    result.records.push_back(std::move(rec));
  }

  RunSummary& s = result.summary;
  s.steps = result.records.size();
  s.mse = mean_squared_error(result.records);
  for (const auto& r : result.records) {
    s.syncs += r.synced ? 1 : 0;
    s.time.agent += r.time.agent;
    s.time.server += r.time.server;
    s.time.sync += r.time.sync;
  }
  s.time.total = seconds_since(run_start);
  s.sync_time_mean = s.syncs > 0 ? s.time.sync / static_cast<double>(s.syncs) : 0.0;
  s.seed = cfg.seed;
  s.dataset = data.name;
  s.config = to_json(cfg);
  return result;
}

RunResult run_online(const RunConfig& cfg) { return run_online(cfg, make_dataset(cfg.dataset)); }

double mean_squared_error(const std::vector<StepRecord>& records, std::size_t from, std::size_t to) {
  to = std::min(to, records.size());
  if (from >= to) return kNaN;
  double total = 0.0;
  for (std::size_t k = from; k < to; ++k) total += records[k].sq_error.sum();
  return total / static_cast<double>(to - from);
}

GridResult grid_search(const RunConfig& base, const Dataset& data, const std::vector<GridAxis>& axes,
                       const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("grid_search: no seeds");
  std::size_t total = 1;
  for (const auto& a : axes) {
    if (a.values.empty()) throw std::invalid_argument("grid_search: axis '" + a.name + "' has no values");
    total *= a.values.size();
  }
  GridResult out;
  for (std::size_t cell = 0; cell < total; ++cell) {
    GridCell gc;
    RunConfig cfg = base;
    std::size_t rest = cell;
    for (std::size_t k = axes.size(); k-- > 0;) {
      const double v = axes[k].values[rest % axes[k].values.size()];
      rest /= axes[k].values.size();
      gc.params[axes[k].name] = v;
    }
    try {
      for (const auto& [name, v] : gc.params) apply_axis(cfg, name, v);
    } catch (const std::exception& e) {
      gc.error = e.what();
    }
    double sum = 0.0;
    for (std::uint64_t seed : seeds) {
      double mse = kNaN;
      if (gc.error.empty()) {
        cfg.seed = seed;
        try {
          mse = run_online(cfg, data).summary.mse;
        } catch (const std::exception& e) {
          gc.error = e.what();
        }
      }
      gc.mse.push_back(mse);
      sum += mse;
    }
    gc.mean_mse = sum / static_cast<double>(seeds.size());
    out.cells.push_back(std::move(gc));
  }
  for (std::size_t k = 0; k < out.cells.size(); ++k) {
    if (std::isfinite(out.cells[k].mean_mse)) out.ranking.push_back(k);
  }
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return out.cells[a].mean_mse < out.cells[b].mean_mse; });
  if (!out.ranking.empty()) out.best = out.ranking.front();
  return out;
}

namespace {

SweepRow sweep_run(const RunConfig& cfg, const Dataset& data, double axis) {
  SweepRow row;
  row.axis = axis;
  row.seed = cfg.seed;
  try {
    const RunSummary s = run_online(cfg, data).summary;
    row.mse = s.mse;
    row.runtime_total_s = s.time.total;
    row.syncs = s.syncs;
    row.sync_total_s = s.time.sync;
    row.runtime_per_sync_s = s.sync_time_mean;
  } catch (const std::exception&) {
    row.mse = kNaN;
    row.excluded = true;
  }
  return row;
}

}  // namespace

SweepTable sweep_lookback(const RunConfig& base, const Dataset& data, const std::vector<std::size_t>& horizons,
                          const std::vector<std::uint64_t>& seeds, double diverged_at) {
  if (seeds.empty()) throw std::invalid_argument("sweep_lookback: no seeds");
  SweepTable table;
  for (std::size_t h : horizons) {
    if (h == 0) throw std::invalid_argument("sweep_lookback: horizons must be >= 1");
    RunConfig cfg = base;
    cfg.mode = Mode::kGame;
    cfg.game.game_horizon = h;
    std::optional<SweepRow> best;
    for (std::uint64_t seed : seeds) {
      cfg.seed = seed;
      SweepRow row = sweep_run(cfg, data, static_cast<double>(h));
      if (!(row.mse < diverged_at)) row.excluded = true;
      if (!row.excluded && (!best || row.mse < best->mse)) best = row;
      table.detail.push_back(row);
    }
    if (best) {
      table.rows.push_back(*best);
    } else {
      SweepRow row;
      row.axis = static_cast<double>(h);
      row.seed = seeds.front();
      row.mse = kNaN;
      row.excluded = true;
      table.rows.push_back(row);
    }
  }
  return table;
}

SweepTable sweep_sync_frequency(const RunConfig& base, const Dataset& data, const std::vector<std::size_t>& periods,
                                const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("sweep_sync_frequency: no seeds");
  SweepTable table;
  for (std::size_t tau : periods) {
    if (tau == 0) throw std::invalid_argument("sweep_sync_frequency: periods must be >= 1");
    RunConfig cfg = base;
    cfg.mode = Mode::kGame;
    cfg.game.sync_period = tau;
    SweepRow mean;
    mean.axis = static_cast<double>(tau);
    mean.seed = seeds.front();
    for (std::uint64_t seed : seeds) {
      cfg.seed = seed;
      const SweepRow row = sweep_run(cfg, data, static_cast<double>(tau));
      table.detail.push_back(row);
      mean.mse += row.mse;
      mean.runtime_total_s += row.runtime_total_s;
      mean.runtime_per_sync_s += row.runtime_per_sync_s;
      mean.sync_total_s += row.sync_total_s;
      mean.syncs = row.syncs;
      mean.excluded = mean.excluded || row.excluded;
    }
    const double k = static_cast<double>(seeds.size());
    mean.mse /= k;
    mean.runtime_total_s /= k;
    mean.runtime_per_sync_s /= k;
    mean.sync_total_s /= k;
    table.rows.push_back(mean);
  }
  return table;
}

BenchReport bench_runtime(const RunConfig& cfg, const Dataset& data, std::size_t warmup) {
  const RunResult run = run_online(cfg, data);
  BenchReport rep;
  rep.warmup = warmup;
  for (const auto& r : run.records) {
    if (r.t <= warmup) continue;
    ++rep.measured_steps;
    rep.total.agent += r.time.agent;
    rep.total.server += r.time.server;
    rep.total.sync += r.time.sync;
    rep.total.total += r.time.total;
    rep.syncs += r.synced ? 1 : 0;
  }
  if (rep.measured_steps > 0) {
    const double k = static_cast<double>(rep.measured_steps);
    rep.per_step = {rep.total.agent / k, rep.total.server / k, rep.total.sync / k, rep.total.total / k};
  }
  rep.per_sync = rep.syncs > 0 ? rep.total.sync / static_cast<double>(rep.syncs) : 0.0;
  return rep;
}

RatioSeries compute_error_ratio(const std::vector<StepRecord>& game, const std::vector<StepRecord>& no_game) {
  if (game.size() != no_game.size()) throw std::invalid_argument("compute_error_ratio: runs have different lengths");
  RatioSeries out;
  std::size_t above = 0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < game.size(); ++k) {
    const auto& g = game[k];
    const auto& n = no_game[k];
    if (g.t != n.t || g.sq_error.size() != n.sq_error.size()) {
      throw std::invalid_argument("compute_error_ratio: runs are misaligned at record " + std::to_string(k));
    }
    Vector r(g.sq_error.size());
    for (Eigen::Index d = 0; d < r.size(); ++d) {
      const double ge = g.sq_error(d);
      const double ne = n.sq_error(d);
      if (ge == 0.0) {
        r(d) = ne == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
      } else {
        r(d) = ne / ge;
      }
      above += r(d) > 1.0 ? 1 : 0;
      ++count;
    }
    out.t.push_back(g.t);
    out.ratio.push_back(std::move(r));
  }
  out.fraction_above_one = count > 0 ? static_cast<double>(above) / static_cast<double>(count) : 0.0;
  return out;
}

}  // namespace fedmoe
