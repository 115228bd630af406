#pragma once

#include <stdexcept>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedmoe/core_types.hpp"
#include "fedmoe/datasets.hpp"
#include "fedmoe/encoders.hpp"
#include "fedmoe/nash_sync.hpp"

namespace fedmoe {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Mode { kGame, kNoGame };

// Where the synchronised rollout starts: the observed target replicated across
// agents, or the agents' own recorded predictions.
enum class SyncInit { kTarget, kAgent };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct RunConfig {
  DatasetSpec dataset;
  std::size_t n_agents = 5;
  std::size_t d_z = 3;
  ServerConfig server;
  GameConfig game;
  std::vector<EncoderKind> encoders;  // one per agent
  double esn_spectral_radius = 0.9;
  double hard_sigmoid_slope = 1.0 / 6.0;
  double hard_sigmoid_offset = 0.5;
  std::uint64_t feature_seed = 1;  // deterministic feature maps; independent of `seed`
  Mode mode = Mode::kGame;
  SyncInit sync_init = SyncInit::kTarget;
  MomentMethod moments = MomentMethod::kAuto;
  std::uint64_t seed = 2024;
  bool record_timings = false;  // adds wall-times to step records
  std::string out_dir;

  // Fills per-agent vectors of length 1 out to n_agents and checks everything.
  void finalize();
  void validate() const;
};

// Defaults for n agents sharing one encoder kind.
RunConfig default_run_config(std::size_t n_agents = 5, EncoderKind kind = EncoderKind::kEsn);

// Strict: unknown keys are rejected. Per-agent fields accept a scalar or a list.
RunConfig run_config_from_json(const nlohmann::ordered_json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::ordered_json to_json(const RunConfig& cfg);

// Overrides one grid axis: alpha, gamma, sigma, d_z, client_window, game_horizon,
// sync_period, kappa, eta, mc_samples.
void apply_axis(RunConfig& cfg, const std::string& axis, double value);

}  // namespace fedmoe
