#pragma once

// JSON round-tripping for domain objects, gate parameters, configs, result
// tables, and search traces, plus the CSV report layouts. Documents carry a
// schema_version and a kind tag; parsing rejects unknown versions, unknown
// keys, and anything that fails the target type's own validation.

#include <cstdint>
#include <string>
#include <vector>

#include "moe2/gating.hpp"
#include "moe2/harness.hpp"
#include "moe2/smo.hpp"
#include "moe2/synth.hpp"
#include "moe2/types.hpp"

namespace moe2 {

inline constexpr int kSchemaVersion = 1;

std::string workload_to_json(const Workload& w);
Workload workload_from_json(const std::string& text);

std::string fleet_to_json(const Fleet& f);
Fleet fleet_from_json(const std::string& text);

std::string gating_to_json(const GatingParams& p);
GatingParams gating_from_json(const std::string& text);

std::string result_table_to_json(const ResultTable& t);
ResultTable result_table_from_json(const std::string& text);

// flat per-row listing, one line per (method, cell, seed)
std::string result_table_to_csv(const ResultTable& t);

// one report per delay row: methods as rows, energy budgets as columns,
// cells hold accuracy averaged over replicates ("-" when never feasible)
std::string sweep_table_csv(const ResultTable& t, const std::vector<double>& tau_row);

std::string smo_result_to_json(const SmoResult& r);

// Everything one run needs, as one document with per-module sections.
struct RunConfig {
  std::uint64_t seed = 1;
  ExperimentConfig experiment;
};

// Calibrated desk-scale defaults: 8 experts over 8 clusters in two hardware
// tiers (3 fast and power-hungry, 5 slow and frugal), 1,000 prompts, and a
// 3x7 budget grid spanning tight to slack.
RunConfig default_run_config();

std::string run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace moe2
