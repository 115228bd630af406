#include "fedmoe/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedmoe {

namespace {

using json = nlohmann::ordered_json;

json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json phases(const PhaseTimes& p) {
  return {{"agent_s", p.agent}, {"server_s", p.server}, {"sync_s", p.sync}, {"total_s", p.total}};
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

json to_json(const StepRecord& r, bool timings) {
  json j;
  j["t"] = r.t;
  j["y"] = vec(r.y);
  json yh = json::array();
  for (const auto& v : r.y_hat) yh.push_back(vec(v));
  j["y_hat"] = yh;
  j["w"] = vec(r.w);
  j["prediction"] = vec(r.prediction);
  j["sq_error"] = vec(r.sq_error);
  j["synced"] = r.synced;
  if (timings) j["time"] = phases(r.time);
  return j;
}

void write_jsonl(std::ostream& os, const std::vector<StepRecord>& records, bool timings) {
  for (const auto& r : records) os << to_json(r, timings).dump() << '\n';
}

json to_json(const RunSummary& s) {
  json j;
  j["dataset"] = s.dataset;
  j["seed"] = s.seed;
  j["mse"] = number_or_null(s.mse);
  j["steps"] = s.steps;
  j["syncs"] = s.syncs;
  j["sync_time_mean_s"] = s.sync_time_mean;
  j["time"] = phases(s.time);
  j["config"] = s.config;
  return j;
}

json to_json(const GridResult& g, const std::vector<GridAxis>& axes) {
  json j;
  json ax = json::object();
  for (const auto& a : axes) ax[a.name] = a.values;
  j["axes"] = ax;
  json cells = json::array();
  for (const auto& c : g.cells) {
    json cj;
    json params = json::object();
    for (const auto& [k, v] : c.params) params[k] = v;
    cj["params"] = params;
    json mse = json::array();
    for (double m : c.mse) mse.push_back(number_or_null(m));
    cj["mse"] = mse;
    cj["mean_mse"] = number_or_null(c.mean_mse);
    if (!c.error.empty()) cj["error"] = c.error;
    cells.push_back(cj);
  }
  j["cells"] = cells;
  j["ranking"] = g.ranking;
  j["best"] = g.best ? json(*g.best) : json(nullptr);
  return j;
}

json to_json(const BenchReport& b) {
  return {{"warmup_steps", b.warmup},
          {"measured_steps", b.measured_steps},
          {"syncs", b.syncs},
          {"total", phases(b.total)},
          {"per_step", phases(b.per_step)},
          {"per_sync_s", b.per_sync}};
}

json to_json(const RatioSeries& r) {
  json series = json::array();
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    json vals = json::array();
    for (Eigen::Index d = 0; d < r.ratio[k].size(); ++d) {
      const double v = r.ratio[k](d);
      vals.push_back(std::isinf(v) ? json("inf") : json(v));
    }
    series.push_back({{"t", r.t[k]}, {"ratio", vals}});
  }
  return {{"fraction_above_one", r.fraction_above_one}, {"series", series}};
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "axis,seed,mse,runtime_total_s,runtime_per_sync_s\n";
  for (const auto& r : rows) {
    os << csv_number(r.axis) << ',' << r.seed << ',' << csv_number(r.excluded ? std::nan("") : r.mse) << ','
       << csv_number(r.runtime_total_s) << ',' << csv_number(r.runtime_per_sync_s) << '\n';
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

}  // namespace fedmoe
