#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedmoe/harness.hpp"

namespace fedmoe {

// Field order is fixed: t, y, y_hat, w, prediction, sq_error, synced, then
// time (only when `timings`). Without timings the output is reproducible byte
// for byte.
nlohmann::ordered_json to_json(const StepRecord& r, bool timings);
void write_jsonl(std::ostream& os, const std::vector<StepRecord>& records, bool timings);

nlohmann::ordered_json to_json(const RunSummary& s);
nlohmann::ordered_json to_json(const GridResult& g, const std::vector<GridAxis>& axes);
nlohmann::ordered_json to_json(const BenchReport& b);
// Infinite ratios are written as the string "inf".
nlohmann::ordered_json to_json(const RatioSeries& r);

// Header: axis,seed,mse,runtime_total_s,runtime_per_sync_s
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace fedmoe
