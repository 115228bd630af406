#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedmoe/core_types.hpp"

namespace fedmoe {

// Record t holds the target y_t and the features x_t available for predicting
// it; x_t never depends on y_t or later targets.
struct Dataset {
  std::string name;
  std::vector<SeriesRecord> records;
  std::size_t d_x = 0;
  std::size_t d_y = 0;
  // Generator parameters or source file and slice, as flat key/value strings.
  std::map<std::string, std::string> provenance;
  // Per raw series divisor applied by max normalization, keyed by series name.
  std::map<std::string, double> scales;

  std::size_t size() const { return records.size(); }
  void validate() const;
  // First `n` records.
  Dataset prefix(std::size_t n) const;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// y_t = amplitude * sin(2 pi t / period), x_t = y_{t-1}.
Dataset gen_periodic(std::size_t n = 200, std::size_t period = 20, double amplitude = 0.9);

// z_{t+1} = c z_t (1 - z_t), z_0 = x0; y_t = 2 z_{t+1} - 1 and x_t = 2 z_t - 1.
Dataset gen_logistic(std::size_t n = 200, double c = 3.6, double x0 = 0.13);

double concept_drift_blend(double x1);
// d_y = 2, or d_y = 1 keeping the second target when `second_only`.
Dataset gen_concept_drift(std::size_t n = 200, bool second_only = false);

// n_traj drifted random walks b_i with b_{i,0} = 0 and unit time step.
// x_t = (0.1 t, b_{1,t}, ..., b_{n_traj,t}); y_{i,t} = 0.1 t + b_{i,t}.
Dataset gen_brownian_sum(std::size_t n = 200, double mu = 1.0, double sigma = 1.0, std::size_t n_traj = 3,
                         std::uint64_t seed = 0);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;  // one per header entry after the date column
  std::vector<std::string> dates;

  const std::vector<double>& column(const std::string& name) const;
};

// Strict reader: header row, first column is a date kept as text, every other
// cell must parse fully as a number.
CsvTable read_csv(const std::string& path);

// Uses raw rows [offset, offset + n). Produces n - 2 records.
Dataset load_boc_csv(const std::string& path, std::size_t n = 2000, std::size_t offset = 0);

// Uses raw rows [offset, offset + n). Produces n - 3 records. When normalizing,
// each raw series is divided by its max |value| over the slice unless `scales`
// supplies the divisor.
Dataset load_ett_csv(const std::string& path, std::size_t n = 2000, bool normalize = true, std::size_t offset = 0,
                     const std::map<std::string, double>& scales = {});

// Divides every x and y column by its max |value|. Idempotent.
Dataset normalize_by_max(const Dataset& d);

struct DatasetSpec {
  std::string name = "periodic";
  std::string path;
  std::size_t n = 200;
  std::size_t offset = 0;
  std::size_t period = 20;
  double logistic_c = 3.6;
  double logistic_x0 = 0.13;
  double mu = 1.0;
  double sigma = 1.0;
  std::size_t n_traj = 3;
  std::uint64_t seed = 0;
  bool normalize = true;
};

// periodic | logistic | concept_drift | concept_drift_1d | boc | ett | brownian_sum
Dataset make_dataset(const DatasetSpec& spec);

}  // namespace fedmoe
