#include "fedmoe/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace fedmoe {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void read_list(const json& j, const char* key, std::vector<double>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (v.is_number()) {
    out = {v.get<double>()};
  } else if (v.is_array()) {
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(std::string("config: '") + key + "' must hold numbers");
      out.push_back(e.get<double>());
    }
  } else {
    throw ConfigError(std::string("config: '") + key + "' must be a number or a list of numbers");
  }
}

void broadcast(std::vector<double>& v, std::size_t n, const char* what) {
  if (v.size() == 1 && n > 1) v.assign(n, v.front());
  if (v.size() != n) {
    throw ConfigError(std::string("config: ") + what + " needs 1 or " + std::to_string(n) + " entries, got " +
                      std::to_string(v.size()));
  }
}

std::string to_string(SyncInit s) { return s == SyncInit::kTarget ? "target" : "agent"; }

SyncInit parse_sync_init(const std::string& s) {
  if (s == "target") return SyncInit::kTarget;
  if (s == "agent") return SyncInit::kAgent;
  throw ConfigError("config: sync_init must be 'target' or 'agent'");
}

std::string to_string(MomentMethod m) {
  switch (m) {
    case MomentMethod::kAuto: return "auto";
    case MomentMethod::kClosedForm: return "closed_form";
    case MomentMethod::kMonteCarlo: return "monte_carlo";
  }
  return "auto";
}

MomentMethod parse_moment_method(const std::string& s) {
  if (s == "auto") return MomentMethod::kAuto;
  if (s == "closed_form") return MomentMethod::kClosedForm;
  if (s == "monte_carlo") return MomentMethod::kMonteCarlo;
  throw ConfigError("config: moments must be auto, closed_form or monte_carlo");
}

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::kGame ? "game" : "no_game"; }

Mode parse_mode(const std::string& name) {
  if (name == "game") return Mode::kGame;
  if (name == "no_game") return Mode::kNoGame;
  throw std::invalid_argument("mode must be 'game' or 'no_game', got '" + name + "'");
}

void RunConfig::finalize() {
  if (n_agents == 0) throw ConfigError("config: n_agents must be >= 1");
  broadcast(game.alphas, n_agents, "alphas");
  broadcast(game.gammas, n_agents, "gammas");
  broadcast(server.sigmas, n_agents, "sigmas");
  if (encoders.size() == 1 && n_agents > 1) encoders.assign(n_agents, encoders.front());
  validate();
}

void RunConfig::validate() const {
  if (n_agents == 0 || d_z == 0) throw ConfigError("config: n_agents and d_z must be >= 1");
  if (encoders.size() != n_agents) throw ConfigError("config: need one encoder kind per agent");
  server.validate(n_agents);
  game.validate(n_agents);
  if (!(esn_spectral_radius >= 0.0)) throw ConfigError("config: esn_spectral_radius must be >= 0");
  if (!(hard_sigmoid_slope > 0.0)) throw ConfigError("config: hard_sigmoid_slope must be > 0");
}

RunConfig default_run_config(std::size_t n_agents, EncoderKind kind) {
  RunConfig c;
  c.n_agents = n_agents;
  c.encoders.assign(n_agents, kind);
  c.game.alphas.assign(n_agents, 0.0);
  c.game.gammas.assign(n_agents, 1.0);
  c.server.sigmas.assign(n_agents, 0.1);
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, "top level",
             {"dataset", "n_agents", "d_z", "server", "game", "encoders", "esn_spectral_radius", "hard_sigmoid_slope",
              "hard_sigmoid_offset", "feature_seed", "mode", "sync_init", "moments", "seed", "record_timings",
              "out_dir"});
  RunConfig c;
  c.encoders = {EncoderKind::kEsn};
  c.game.alphas = {0.0};
  c.game.gammas = {1.0};
  c.server.sigmas = {0.1};

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, "dataset",
               {"name", "path", "n", "offset", "period", "logistic_c", "logistic_x0", "mu", "sigma", "n_traj", "seed",
                "normalize"});
    read(d, "name", c.dataset.name);
    read(d, "path", c.dataset.path);
    read(d, "n", c.dataset.n);
    read(d, "offset", c.dataset.offset);
    read(d, "period", c.dataset.period);
    read(d, "logistic_c", c.dataset.logistic_c);
    read(d, "logistic_x0", c.dataset.logistic_x0);
    read(d, "mu", c.dataset.mu);
    read(d, "sigma", c.dataset.sigma);
    read(d, "n_traj", c.dataset.n_traj);
    read(d, "seed", c.dataset.seed);
    read(d, "normalize", c.dataset.normalize);
  }
  read(j, "n_agents", c.n_agents);
  read(j, "d_z", c.d_z);
  if (j.contains("server")) {
    const auto& s = j.at("server");
    check_keys(s, "server", {"kappa", "eta", "client_window", "sigmas"});
    read(s, "kappa", c.server.kappa);
    read(s, "eta", c.server.eta);
    read(s, "client_window", c.server.client_window);
    read_list(s, "sigmas", c.server.sigmas);
  }
  if (j.contains("game")) {
    const auto& g = j.at("game");
    check_keys(g, "game", {"game_horizon", "alphas", "gammas", "sync_period", "mc_samples"});
    read(g, "game_horizon", c.game.game_horizon);
    read_list(g, "alphas", c.game.alphas);
    read_list(g, "gammas", c.game.gammas);
    read(g, "sync_period", c.game.sync_period);
    read(g, "mc_samples", c.game.mc_samples);
  }
  if (j.contains("encoders")) {
    const auto& e = j.at("encoders");
    c.encoders.clear();
    try {
      if (e.is_string()) {
        c.encoders.push_back(parse_encoder_kind(e.get<std::string>()));
      } else if (e.is_array()) {
        for (const auto& k : e) c.encoders.push_back(parse_encoder_kind(k.get<std::string>()));
      } else {
        throw ConfigError("config: 'encoders' must be a string or a list of strings");
      }
    } catch (const json::exception& ex) {
      throw ConfigError(std::string("config: bad value for 'encoders': ") + ex.what());
    }
  }
  read(j, "esn_spectral_radius", c.esn_spectral_radius);
  read(j, "hard_sigmoid_slope", c.hard_sigmoid_slope);
  read(j, "hard_sigmoid_offset", c.hard_sigmoid_offset);
  read(j, "feature_seed", c.feature_seed);
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("sync_init")) c.sync_init = parse_sync_init(j.at("sync_init").get<std::string>());
  if (j.contains("moments")) c.moments = parse_moment_method(j.at("moments").get<std::string>());
  read(j, "seed", c.seed);
  read(j, "record_timings", c.record_timings);
  read(j, "out_dir", c.out_dir);
  c.finalize();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

json to_json(const RunConfig& c) {
  json j;
  j["dataset"] = {{"name", c.dataset.name},
                  {"path", c.dataset.path},
                  {"n", c.dataset.n},
                  {"offset", c.dataset.offset},
                  {"period", c.dataset.period},
                  {"logistic_c", c.dataset.logistic_c},
                  {"logistic_x0", c.dataset.logistic_x0},
                  {"mu", c.dataset.mu},
                  {"sigma", c.dataset.sigma},
                  {"n_traj", c.dataset.n_traj},
                  {"seed", c.dataset.seed},
                  {"normalize", c.dataset.normalize}};
  j["n_agents"] = c.n_agents;
  j["d_z"] = c.d_z;
  j["server"] = {{"kappa", c.server.kappa},
                 {"eta", c.server.eta},
                 {"client_window", c.server.client_window},
                 {"sigmas", c.server.sigmas}};
  j["game"] = {{"game_horizon", c.game.game_horizon},
               {"alphas", c.game.alphas},
               {"gammas", c.game.gammas},
               {"sync_period", c.game.sync_period},
               {"mc_samples", c.game.mc_samples}};
  json enc = json::array();
  for (auto k : c.encoders) enc.push_back(to_string(k));
  j["encoders"] = enc;
  j["esn_spectral_radius"] = c.esn_spectral_radius;
  j["hard_sigmoid_slope"] = c.hard_sigmoid_slope;
  j["hard_sigmoid_offset"] = c.hard_sigmoid_offset;
  j["feature_seed"] = c.feature_seed;
  j["mode"] = to_string(c.mode);
  j["sync_init"] = to_string(c.sync_init);
  j["moments"] = to_string(c.moments);
  j["seed"] = c.seed;
  j["record_timings"] = c.record_timings;
  j["out_dir"] = c.out_dir;
  return j;
}

void apply_axis(RunConfig& cfg, const std::string& axis, double value) {
  auto count = [&](const char* what) {
    if (!(value >= 1.0) || value != std::floor(value)) {
      throw ConfigError(std::string("grid: ") + what + " must be a positive integer");
    }
    return static_cast<std::size_t>(value);
  };
  if (axis == "alpha") {
    cfg.game.alphas.assign(cfg.n_agents, value);
  } else if (axis == "gamma") {
    cfg.game.gammas.assign(cfg.n_agents, value);
  } else if (axis == "sigma") {
    cfg.server.sigmas.assign(cfg.n_agents, value);
  } else if (axis == "d_z") {
    cfg.d_z = count("d_z");
  } else if (axis == "client_window") {
    cfg.server.client_window = count("client_window");
  } else if (axis == "game_horizon") {
    cfg.game.game_horizon = count("game_horizon");
  } else if (axis == "sync_period") {
    cfg.game.sync_period = count("sync_period");
  } else if (axis == "mc_samples") {
    cfg.game.mc_samples = count("mc_samples");
  } else if (axis == "kappa") {
    cfg.server.kappa = value;
  } else if (axis == "eta") {
    cfg.server.eta = value;
  } else {
    throw ConfigError("grid: unknown axis '" + axis + "'");
  }
  cfg.validate();
}

}  // namespace fedmoe
