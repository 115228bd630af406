#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedmoe/config.hpp"
#include "fedmoe/datasets.hpp"

namespace fedmoe {

// Time convention. Record 0 only seeds the agents (Yhat^i_0 = y_0) and produces
// no prediction. At step t >= 1:
//   1. each agent fits beta_{t-1} on pairs up to y_{t-1}, draws
//      Z_{t-1} = encode(x_t, Z_{t-2}) and sets Yhat_t = Yhat_{t-1} + Z_{t-1} beta_{t-1};
//   2. the server computes w_{t-1} from (Yhat_{t-1}, y_{t-1});
//   3. in game mode, when t % sync_period == 0 and t >= 2, the game is solved on
//      real steps r0 .. t-1 with r0 = t-1-min(game_horizon, t-1); beta_{t-1} is
//      replaced by the equilibrium action, Z_{t-1} is redrawn and
//      Yhat_t = Yhat^sync_{t-1} + Z_{t-1} beta_{t-1};
//   4. the ensemble prediction sum_i w^i_{t-1} Yhat^i_t is emitted, then y_t is revealed.

struct PhaseTimes {
  double agent = 0.0;
  double server = 0.0;
  double sync = 0.0;
  double total = 0.0;
};

struct StepRecord {
  std::size_t t = 0;
  Vector y;
  std::vector<Vector> y_hat;  // per agent
  Vector w;                   // w_{t-1}
  Vector prediction;
  Vector sq_error;  // per dimension
  bool synced = false;
  PhaseTimes time;
};

struct RunSummary {
  double mse = 0.0;
  std::size_t steps = 0;
  std::size_t syncs = 0;
  PhaseTimes time;  // totals over all steps
  double sync_time_mean = 0.0;
  std::uint64_t seed = 0;
  std::string dataset;
  nlohmann::ordered_json config;
};

struct RunResult {
  std::vector<StepRecord> records;
  RunSummary summary;
};

class StepError : public std::runtime_error {
 public:
  StepError(std::size_t t, const std::string& what)
      : std::runtime_error("step " + std::to_string(t) + ": " + what), step(t) {}
  std::size_t step;
};

RunResult run_online(const RunConfig& cfg, const Dataset& data);
// Loads the dataset named by cfg.dataset first.
RunResult run_online(const RunConfig& cfg);

double mean_squared_error(const std::vector<StepRecord>& records, std::size_t from = 0,
                          std::size_t to = static_cast<std::size_t>(-1));

inline const std::vector<std::uint64_t>& default_seeds() {
  static const std::vector<std::uint64_t> seeds{2024, 2025, 2026};
  return seeds;
}

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

struct GridCell {
  std::map<std::string, double> params;
  std::vector<double> mse;  // per seed, NaN when the run failed
  double mean_mse = 0.0;    // NaN when any seed failed
  std::string error;
};

struct GridResult {
  std::vector<GridCell> cells;  // Cartesian order, last axis fastest
  std::optional<std::size_t> best;
  std::vector<std::size_t> ranking;  // cells with finite mean, best first
};

GridResult grid_search(const RunConfig& base, const Dataset& data, const std::vector<GridAxis>& axes,
                       const std::vector<std::uint64_t>& seeds = default_seeds());

struct SweepRow {
  double axis = 0.0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double runtime_total_s = 0.0;
  double runtime_per_sync_s = 0.0;
  std::size_t syncs = 0;
  double sync_total_s = 0.0;
  bool excluded = false;
};

struct SweepTable {
  std::vector<SweepRow> rows;    // one per axis value
  std::vector<SweepRow> detail;  // one per (axis value, seed)
};

// Runs whose MSE is >= `diverged_at` (or that fail) are flagged; an axis value
// whose every seed is flagged is reported as excluded.
SweepTable sweep_lookback(const RunConfig& base, const Dataset& data, const std::vector<std::size_t>& horizons,
                          const std::vector<std::uint64_t>& seeds = default_seeds(), double diverged_at = 1.0);

SweepTable sweep_sync_frequency(const RunConfig& base, const Dataset& data, const std::vector<std::size_t>& periods,
                                const std::vector<std::uint64_t>& seeds);

struct BenchReport {
  std::size_t warmup = 3;
  std::size_t measured_steps = 0;
  PhaseTimes total;
  PhaseTimes per_step;
  std::size_t syncs = 0;
  double per_sync = 0.0;
};

BenchReport bench_runtime(const RunConfig& cfg, const Dataset& data, std::size_t warmup = 3);

struct RatioSeries {
  std::vector<std::size_t> t;
  std::vector<Vector> ratio;  // per dimension; +inf when only the game error is zero
  double fraction_above_one = 0.0;
};

RatioSeries compute_error_ratio(const std::vector<StepRecord>& game, const std::vector<StepRecord>& no_game);

}  // namespace fedmoe
