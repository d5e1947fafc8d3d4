// Scenario files, report serialisation, presets and the batch runner.
#pragma once

#include "spid/sim.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace spid {

ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& c);
ScenarioConfig load_config(const std::filesystem::path& path);

nlohmann::json report_to_json(const MetricsReport& r);
std::string tip_pool_csv(const MetricsReport& r);
std::string finality_csv(const MetricsReport& r);
std::string throughput_csv(const MetricsReport& r);

enum class Emit { metrics, event_log, dag_snapshot, csv_series };

struct RunManifest {
    std::vector<std::filesystem::path> scenarios;
    std::filesystem::path output_dir;
    std::vector<uint64_t> seeds;
    unsigned parallelism = 1;
    std::set<Emit> emit{Emit::metrics, Emit::event_log, Emit::dag_snapshot, Emit::csv_series};
};

// Relative scenario paths resolve against the manifest's directory; an empty
// output falls back to `default_out`.
RunManifest load_manifest(const std::filesystem::path& path, const std::filesystem::path& default_out);

struct BatchOutcome {
    int exit_code = 0;            // 0 ok, 1 validation failure, 2 runtime failure
    std::size_t runs = 0;
    std::vector<std::string> errors;
};

// One report per (scenario, seed) plus aggregate.json per scenario.
BatchOutcome run_batch(const RunManifest& m);
// Same, for configs already in memory.
BatchOutcome run_configs(const std::vector<ScenarioConfig>& configs, const std::vector<uint64_t>& seeds,
                         const std::filesystem::path& out, unsigned parallelism, const std::set<Emit>& emit);

// Mean of every numeric metric over the reports.
nlohmann::json aggregate_reports(const std::vector<MetricsReport>& reports);

std::vector<std::string> preset_names();
// Throws ConfigError for an unknown name.
std::vector<ScenarioConfig> preset_scenarios(const std::string& name, bool paper_scale = false);

} // namespace spid
