#include "fedmoe/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string_view>

#include "fedmoe/rng.hpp"

namespace fedmoe {

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Looks up `iso` directly, then as the FX<ISO>CAD series code.
const std::vector<double>& currency(const CsvTable& table, const std::string& iso) {
  for (const auto& name : {iso, "FX" + iso + "CAD"}) {
    if (std::find(table.header.begin() + 1, table.header.end(), name) != table.header.end()) return table.column(name);
  }
  throw DatasetError("boc: missing column '" + iso + "'");
}

void check_slice(std::size_t rows, std::size_t n, std::size_t offset, std::size_t lags, const std::string& what) {
  if (n <= lags) throw DatasetError(what + ": n must exceed " + std::to_string(lags));
  if (offset + n > rows) {
    throw DatasetError(what + ": short file, need rows [" + std::to_string(offset) + ", " + std::to_string(offset + n) +
                       ") but only " + std::to_string(rows) + " data rows present");
  }
}

}  // namespace

void Dataset::validate() const {
  if (records.empty()) throw DatasetError("dataset '" + name + "' is empty");
  for (std::size_t t = 0; t < records.size(); ++t) {
    const auto& r = records[t];
    if (static_cast<std::size_t>(r.x.size()) != d_x || static_cast<std::size_t>(r.y.size()) != d_y) {
      throw DatasetError("dataset '" + name + "': record " + std::to_string(t) + " has inconsistent dimensions");
    }
    if (!r.x.allFinite() || !r.y.allFinite()) {
      throw DatasetError("dataset '" + name + "': record " + std::to_string(t) + " is not finite");
    }
  }
}

Dataset Dataset::prefix(std::size_t n) const {
  Dataset d = *this;
  d.records.resize(std::min(n, records.size()));
  return d;
}

Dataset gen_periodic(std::size_t n, std::size_t period, double amplitude) {
  if (n < 2) throw DatasetError("periodic: n must be >= 2");
  if (period == 0) throw DatasetError("periodic: period must be >= 1");
  auto value = [&](double t) { return amplitude * std::sin(2.0 * std::numbers::pi * t / static_cast<double>(period)); };
  Dataset d;
  d.name = "periodic";
  d.d_x = 1;
  d.d_y = 1;
  for (std::size_t t = 0; t < n; ++t) {
    const double tt = static_cast<double>(t);
    d.records.push_back({t, scalar(value(tt - 1.0)), scalar(value(tt))});
  }
  d.provenance = {{"generator", "periodic"}, {"n", std::to_string(n)}, {"period", std::to_string(period)},
                  {"amplitude", num(amplitude)}};
  return d;
}

Dataset gen_logistic(std::size_t n, double c, double x0) {
  if (n < 2) throw DatasetError("logistic: n must be >= 2");
  if (!(c > 0.0 && c <= 4.0)) throw DatasetError("logistic: c must lie in (0, 4]");
  if (!(x0 > 0.0 && x0 < 1.0)) throw DatasetError("logistic: x0 must lie in (0, 1)");
  std::vector<double> z{x0};
  for (std::size_t t = 0; t < n; ++t) z.push_back(c * z.back() * (1.0 - z.back()));
  Dataset d;
  d.name = "logistic";
  d.d_x = 1;
  d.d_y = 1;
  for (std::size_t t = 0; t < n; ++t) d.records.push_back({t, scalar(2.0 * z[t] - 1.0), scalar(2.0 * z[t + 1] - 1.0)});
  d.provenance = {{"generator", "logistic"}, {"n", std::to_string(n)}, {"c", num(c)}, {"x0", num(x0)}};
  return d;
}

double concept_drift_blend(double x1) {
  constexpr double lo = 7.0 * std::numbers::pi / 8.0;
  constexpr double hi = 9.0 * std::numbers::pi / 8.0;
  if (x1 < lo) return 1.0;
  if (x1 > hi) return 0.0;
  return std::cos(2.0 * (x1 - lo));
}

Dataset gen_concept_drift(std::size_t n, bool second_only) {
  if (n < 2) throw DatasetError("concept_drift: n must be >= 2");
  Dataset d;
  d.name = second_only ? "concept_drift_1d" : "concept_drift";
  d.d_x = 3;
  d.d_y = second_only ? 1 : 2;
  for (std::size_t t = 0; t < n; ++t) {
    const double p = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n - 1);
    const double x1 = p;
    const double x2 = p;
    const double x3 = std::sqrt(p);
    const double y11 = x1 * x1 + std::sin(x2) + x1 * x3 + 0.5 * std::cos(10.0 * x1);
    const double y21 = x1 * std::cos(x2) + x3 - std::exp(-x2);
    const double y12 = x1 + x2 - std::sin(x3);
    const double y22 = std::cos(x1) * std::sin(x2) + x3 * x3 + 0.25 * std::cos(10.0 * x1);
    const double a = concept_drift_blend(x1);
    const double y1 = a * y11 + (1.0 - a) * y12;
    const double y2 = a * y21 + (1.0 - a) * y22;
    Vector x(3);
    x << x1, x2, x3;
    Vector y = second_only ? scalar(y2) : Vector(Vector::Zero(2));
    if (!second_only) y << y1, y2;
    d.records.push_back({t, x, y});
  }
  d.provenance = {{"generator", d.name}, {"n", std::to_string(n)}};
  return d;
}

Dataset gen_brownian_sum(std::size_t n, double mu, double sigma, std::size_t n_traj, std::uint64_t seed) {
  if (n < 2) throw DatasetError("brownian_sum: n must be >= 2");
  if (n_traj == 0) throw DatasetError("brownian_sum: n_traj must be >= 1");
  if (!(sigma >= 0.0)) throw DatasetError("brownian_sum: sigma must be >= 0");
  auto rng = make_stream(seed, 0, StreamPurpose::kDataset);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto k = static_cast<Eigen::Index>(n_traj);
  Vector b = Vector::Zero(k);
  Dataset d;
  d.name = "brownian_sum";
  d.d_x = 1 + n_traj;
  d.d_y = n_traj;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      for (Eigen::Index i = 0; i < k; ++i) b(i) += mu + sigma * normal(rng);
    }
    const double drift = 0.1 * static_cast<double>(t);
    Vector x(1 + k);
    x(0) = drift;
    x.tail(k) = b;
    d.records.push_back({t, x, (b.array() + drift).matrix()});
  }
  d.provenance = {{"generator", "brownian_sum"}, {"n", std::to_string(n)}, {"mu", num(mu)},
                  {"sigma", num(sigma)}, {"n_traj", std::to_string(n_traj)}, {"seed", std::to_string(seed)}};
  return d;
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] == name) return columns[c - 1];
  }
  throw DatasetError("csv: missing column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("csv: cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("csv: '" + path + "' has no header row");
  table.header = split(line);
  if (table.header.size() < 2) throw DatasetError("csv: '" + path + "' needs a date column and at least one series");
  table.columns.resize(table.header.size() - 1);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw DatasetError("csv: row " + std::to_string(row) + " of '" + path + "' has " + std::to_string(cells.size()) +
                         " cells, header has " + std::to_string(table.header.size()));
    }
    table.dates.push_back(cells[0]);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const std::string& s = cells[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw DatasetError("csv: non-numeric cell '" + s + "' at row " + std::to_string(row) + ", column '" +
                           table.header[c] + "'");
      }
      table.columns[c - 1].push_back(v);
    }
  }
  return table;
}

Dataset load_boc_csv(const std::string& path, std::size_t n, std::size_t offset) {
  const CsvTable table = read_csv(path);
  const std::vector<std::string> names{"USD", "AUD", "EUR", "GBP", "JPY"};
  std::vector<const std::vector<double>*> series;
  for (const auto& iso : names) series.push_back(&currency(table, iso));
  check_slice(table.dates.size(), n, offset, 2, "boc");

  Dataset d;
  d.name = "boc";
  d.d_x = 2 * names.size();
  d.d_y = 1;
  for (std::size_t r = 2; r < n; ++r) {
    const std::size_t row = offset + r;
    Vector x(static_cast<Eigen::Index>(d.d_x));
    for (std::size_t k = 0; k < series.size(); ++k) {
      x(static_cast<Eigen::Index>(2 * k)) = (*series[k])[row - 1];
      x(static_cast<Eigen::Index>(2 * k + 1)) = (*series[k])[row - 2];
    }
    d.records.push_back({r - 2, x, scalar((*series[0])[row])});
  }
  d.provenance = {{"source", path}, {"offset", std::to_string(offset)}, {"n", std::to_string(n)},
                  {"first_date", table.dates[offset]}};
  return d;
}

Dataset load_ett_csv(const std::string& path, std::size_t n, bool normalize, std::size_t offset,
                     const std::map<std::string, double>& scales) {
  const CsvTable table = read_csv(path);
  const std::vector<std::string> expected{"date", "HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"};
  if (table.header != expected) {
    std::string got;
    for (const auto& h : table.header) got += (got.empty() ? "" : ",") + h;
    throw DatasetError("ett: schema mismatch, expected date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT but got " + got);
  }
  check_slice(table.dates.size(), n, offset, 3, "ett");

  std::map<std::string, std::vector<double>> raw;
  std::map<std::string, double> used;
  for (std::size_t c = 1; c < expected.size(); ++c) {
    const auto& name = expected[c];
    const auto& col = table.column(name);
    std::vector<double> slice(col.begin() + static_cast<std::ptrdiff_t>(offset),
                              col.begin() + static_cast<std::ptrdiff_t>(offset + n));
    if (normalize) {
      double s = 0.0;
      if (auto it = scales.find(name); it != scales.end()) {
        s = it->second;
      } else {
        for (double v : slice) s = std::max(s, std::abs(v));
      }
      if (!(s > 0.0) || !std::isfinite(s)) throw DatasetError("ett: zero max for series '" + name + "'");
      for (double& v : slice) v /= s;
      used[name] = s;
    }
    raw[name] = std::move(slice);
  }

  Dataset d;
  d.name = "ett";
  d.d_x = 2 + 6 * 3;
  d.d_y = 1;
  const auto& ot = raw["OT"];
  for (std::size_t r = 3; r < n; ++r) {
    Vector x(static_cast<Eigen::Index>(d.d_x));
    Eigen::Index k = 0;
    x(k++) = ot[r - 1];
    x(k++) = ot[r - 2];
    for (std::size_t c = 1; c + 1 < expected.size(); ++c) {
      const auto& s = raw[expected[c]];
      for (std::size_t lag = 1; lag <= 3; ++lag) x(k++) = s[r - lag];
    }
    d.records.push_back({r - 3, x, scalar(ot[r])});
  }
  d.scales = used;
  d.provenance = {{"source", path}, {"offset", std::to_string(offset)}, {"n", std::to_string(n)},
                  {"normalized", normalize ? "true" : "false"}};
  return d;
}

Dataset normalize_by_max(const Dataset& d) {
  d.validate();
  Dataset out = d;
  auto scale_column = [&out](bool is_x, Eigen::Index c, const std::string& key) {
    double s = 0.0;
    for (const auto& r : out.records) s = std::max(s, std::abs(is_x ? r.x(c) : r.y(c)));
    if (!(s > 0.0)) throw DatasetError("normalize: zero max for " + key);
    for (auto& r : out.records) (is_x ? r.x(c) : r.y(c)) /= s;
    out.scales[key] = s;
  };
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d.d_x); ++c) scale_column(true, c, "x" + std::to_string(c));
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d.d_y); ++c) scale_column(false, c, "y" + std::to_string(c));
  out.provenance["normalized"] = "true";
  return out;
}

Dataset make_dataset(const DatasetSpec& spec) {
  Dataset d;
  if (spec.name == "periodic") {
    d = gen_periodic(spec.n, spec.period);
  } else if (spec.name == "logistic") {
    d = gen_logistic(spec.n, spec.logistic_c, spec.logistic_x0);
  } else if (spec.name == "concept_drift") {
    d = gen_concept_drift(spec.n, false);
  } else if (spec.name == "concept_drift_1d") {
    d = gen_concept_drift(spec.n, true);
  } else if (spec.name == "brownian_sum") {
    d = gen_brownian_sum(spec.n, spec.mu, spec.sigma, spec.n_traj, spec.seed);
  } else if (spec.name == "boc") {
    if (spec.path.empty()) throw DatasetError("boc: a CSV path is required");
    d = load_boc_csv(spec.path, spec.n, spec.offset);
  } else if (spec.name == "ett") {
    if (spec.path.empty()) throw DatasetError("ett: a CSV path is required");
    d = load_ett_csv(spec.path, spec.n, spec.normalize, spec.offset);
  } else {
    throw DatasetError("unknown dataset '" + spec.name + "'");
  }
  d.validate();
  return d;
}

}  // namespace fedmoe
