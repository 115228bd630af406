// Command-line front end: run, grid, sweep-lookback, sweep-sync-freq, bench, ratio.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedmoe/config.hpp"
#include "fedmoe/datasets.hpp"
#include "fedmoe/harness.hpp"
#include "fedmoe/report.hpp"

namespace {

using fedmoe::RunConfig;
using json = nlohmann::ordered_json;

struct Common {
  std::string config;
  std::string dataset;
  std::string mode;
  std::string encoder;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::size_t agents = 0;
  bool timings = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--dataset", c.dataset, "dataset name or CSV path");
  app->add_option("--mode", c.mode, "game or no_game")->check(CLI::IsMember({"game", "no_game"}));
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--agents", c.agents, "number of agents")->check(CLI::PositiveNumber);
  app->add_option("--encoder", c.encoder, "deterministic, rfn or esn")
      ->check(CLI::IsMember({"deterministic", "rfn", "esn"}));
  app->add_flag("--timings", c.timings, "include wall-times in step records");
}

// A CSV path is routed to the ETT loader when its header names the OT column.
void set_dataset(RunConfig& cfg, const std::string& spec) {
  static const std::set<std::string> names{"periodic", "logistic", "concept_drift", "concept_drift_1d",
                                           "boc", "ett", "brownian_sum"};
  if (names.count(spec)) {
    cfg.dataset.name = spec;
    return;
  }
  std::ifstream in(spec);
  if (!in) throw std::invalid_argument("--dataset: '" + spec + "' is neither a dataset name nor a readable file");
  std::string header;
  std::getline(in, header);
  cfg.dataset.name = header.find("OT") != std::string::npos ? "ett" : "boc";
  cfg.dataset.path = spec;
}

RunConfig build_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? fedmoe::default_run_config() : fedmoe::load_run_config(c.config);
  if (!c.dataset.empty()) set_dataset(cfg, c.dataset);
  if (!c.mode.empty()) cfg.mode = fedmoe::parse_mode(c.mode);
  if (c.seed != 0) cfg.seed = c.seed;
  if (c.agents != 0 && c.agents != cfg.n_agents) {
    cfg.n_agents = c.agents;
    cfg.encoders.resize(1);
    cfg.game.alphas.resize(1);
    cfg.game.gammas.resize(1);
    cfg.server.sigmas.resize(1);
  }
  if (!c.encoder.empty()) cfg.encoders.assign(1, fedmoe::parse_encoder_kind(c.encoder));
  if (c.timings) cfg.record_timings = true;
  cfg.out_dir = c.out;
  cfg.finalize();
  return cfg;
}

std::string path_in(const std::string& dir, const std::string& file) { return dir + "/" + file; }

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.empty()) throw std::invalid_argument("empty value list");
  return out;
}

std::vector<std::size_t> to_counts(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  for (double d : v) {
    if (!(d >= 1.0)) throw std::invalid_argument("values must be positive integers");
    out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (double d : parse_list(text)) out.push_back(static_cast<std::uint64_t>(d));
  return out;
}

std::string jsonl(const std::vector<fedmoe::StepRecord>& records, bool timings) {
  std::ostringstream os;
  fedmoe::write_jsonl(os, records, timings);
  return os.str();
}

// Reads t and sq_error back from a step-record file.
std::vector<fedmoe::StepRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::vector<fedmoe::StepRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    fedmoe::StepRecord r;
    r.t = j.at("t").get<std::size_t>();
    const auto e = j.at("sq_error").get<std::vector<double>>();
    r.sq_error = Eigen::Map<const fedmoe::Vector>(e.data(), static_cast<Eigen::Index>(e.size()));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online federated mixture of experts with Nash synchronisation"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "run the online algorithm once");
  add_common(run, run_opts);

  Common grid_opts;
  std::vector<std::string> grid_axes;
  std::string grid_seeds = "2024,2025,2026";
  auto* grid = app.add_subcommand("grid", "hyperparameter grid, averaged over seeds");
  add_common(grid, grid_opts);
  grid->add_option("--axis", grid_axes, "name=v1,v2,... (repeatable)")->required();
  grid->add_option("--seeds", grid_seeds, "comma-separated seeds");

  Common look_opts;
  std::string look_values = "1,2,3,4,5";
  std::string look_seeds = "2024,2025,2026";
  auto* look = app.add_subcommand("sweep-lookback", "sweep the game look-back length");
  add_common(look, look_opts);
  look->add_option("--values", look_values, "comma-separated game horizons");
  look->add_option("--seeds", look_seeds, "comma-separated seeds");

  Common freq_opts;
  std::string freq_values = "1,2,5,10";
  std::string freq_seeds;
  auto* freq = app.add_subcommand("sweep-sync-freq", "sweep the synchronisation period");
  add_common(freq, freq_opts);
  freq->add_option("--values", freq_values, "comma-separated sync periods");
  freq->add_option("--seeds", freq_seeds, "comma-separated seeds (default: the run seed)");

  Common bench_opts;
  std::size_t warmup = 3;
  auto* bench = app.add_subcommand("bench", "per-phase runtime measurement");
  add_common(bench, bench_opts);
  bench->add_option("--warmup", warmup, "leading steps excluded from timing");

  Common ratio_opts;
  std::string ratio_game;
  std::string ratio_no_game;
  auto* ratio = app.add_subcommand("ratio", "per-step squared-error ratio of no-game over game");
  add_common(ratio, ratio_opts);
  ratio->add_option("--game-records", ratio_game, "existing game-mode step records");
  ratio->add_option("--no-game-records", ratio_no_game, "existing no-game step records");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const RunConfig cfg = build_config(run_opts);
      const auto result = fedmoe::run_online(cfg);
      fedmoe::write_text_file(path_in(cfg.out_dir, "steps.jsonl"), jsonl(result.records, cfg.record_timings));
      const json summary = fedmoe::to_json(result.summary);
      fedmoe::write_text_file(path_in(cfg.out_dir, "summary.json"), summary.dump(2) + "\n");
      std::cout << "mse " << result.summary.mse << "  steps " << result.summary.steps << "  syncs "
                << result.summary.syncs << "  total " << result.summary.time.total << " s\n";
    } else if (*grid) {
      const RunConfig cfg = build_config(grid_opts);
      std::vector<fedmoe::GridAxis> axes;
      for (const auto& a : grid_axes) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--axis expects name=v1,v2,...");
        axes.push_back({a.substr(0, eq), parse_list(a.substr(eq + 1))});
      }
      const auto data = fedmoe::make_dataset(cfg.dataset);
      const auto result = fedmoe::grid_search(cfg, data, axes, parse_seeds(grid_seeds));
      fedmoe::write_text_file(path_in(cfg.out_dir, "grid.json"), fedmoe::to_json(result, axes).dump(2) + "\n");
      if (result.best) {
        const auto& best = result.cells[*result.best];
        std::cout << "best mean mse " << best.mean_mse << " at";
        for (const auto& [k, v] : best.params) std::cout << ' ' << k << '=' << v;
        std::cout << '\n';
      } else {
        std::cout << "no grid cell completed\n";
      }
    } else if (*look) {
      const RunConfig cfg = build_config(look_opts);
      const auto data = fedmoe::make_dataset(cfg.dataset);
      const auto table =
          fedmoe::sweep_lookback(cfg, data, to_counts(parse_list(look_values)), parse_seeds(look_seeds));
      std::ostringstream os;
      fedmoe::write_sweep_csv(os, table.rows);
      fedmoe::write_text_file(path_in(cfg.out_dir, "sweep_lookback.csv"), os.str());
      std::cout << os.str();
    } else if (*freq) {
      const RunConfig cfg = build_config(freq_opts);
      const auto data = fedmoe::make_dataset(cfg.dataset);
      const auto seeds = freq_seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : parse_seeds(freq_seeds);
      const auto table = fedmoe::sweep_sync_frequency(cfg, data, to_counts(parse_list(freq_values)), seeds);
      std::ostringstream os;
      fedmoe::write_sweep_csv(os, table.rows);
      fedmoe::write_text_file(path_in(cfg.out_dir, "sweep_sync_freq.csv"), os.str());
      std::cout << os.str();
    } else if (*bench) {
      const RunConfig cfg = build_config(bench_opts);
      const auto data = fedmoe::make_dataset(cfg.dataset);
      const json report = fedmoe::to_json(fedmoe::bench_runtime(cfg, data, warmup));
      fedmoe::write_text_file(path_in(cfg.out_dir, "bench.json"), report.dump(2) + "\n");
      std::cout << report.dump(2) << '\n';
    } else if (*ratio) {
      std::vector<fedmoe::StepRecord> game;
      std::vector<fedmoe::StepRecord> no_game;
      RunConfig cfg = build_config(ratio_opts);
      if (!ratio_game.empty() || !ratio_no_game.empty()) {
        if (ratio_game.empty() || ratio_no_game.empty()) {
          throw std::invalid_argument("--game-records and --no-game-records go together");
        }
        game = read_jsonl(ratio_game);
        no_game = read_jsonl(ratio_no_game);
      } else {
        const auto data = fedmoe::make_dataset(cfg.dataset);
        cfg.mode = fedmoe::Mode::kGame;
        game = fedmoe::run_online(cfg, data).records;
        cfg.mode = fedmoe::Mode::kNoGame;
        no_game = fedmoe::run_online(cfg, data).records;
      }
      const auto series = fedmoe::compute_error_ratio(game, no_game);
      fedmoe::write_text_file(path_in(cfg.out_dir, "ratio.json"), fedmoe::to_json(series).dump(2) + "\n");
      std::cout << "fraction of ratios above 1: " << series.fraction_above_one << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
