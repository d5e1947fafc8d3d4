#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "spid/config.hpp"

namespace {

std::filesystem::path default_out()
{
    const char* env = std::getenv("SPID_OUT_DIR");
    return env && *env ? std::filesystem::path(env) : std::filesystem::path("spid-out");
}

int report(const spid::BatchOutcome& r)
{
    for (const auto& e : r.errors) std::cerr << "error: " << e << "\n";
    std::cout << r.runs << " run(s) completed\n";
    return r.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"spid scenario runner"};
    app.require_subcommand(1);

    std::string manifest;
    auto* run = app.add_subcommand("run", "run every scenario listed in a manifest");
    run->add_option("manifest", manifest, "manifest JSON")->required();

    std::string preset, out;
    bool paper = false;
    uint64_t seeds = 1;
    unsigned jobs = 1;
    auto* pre = app.add_subcommand("preset", "run a named preset");
    pre->add_option("name", preset, "preset name")->required();
    pre->add_option("--out", out, "output directory (defaults to $SPID_OUT_DIR)");
    pre->add_flag("--paper-scale", paper, "use full-size parameters");
    pre->add_option("--seeds", seeds, "number of seeds, 1..k")->check(CLI::PositiveNumber);
    pre->add_option("-j,--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);

    std::string cfg_path;
    auto* val = app.add_subcommand("validate", "check a scenario file");
    val->add_option("config", cfg_path, "scenario JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*val) {
            auto c = spid::load_config(cfg_path);
            std::cout << "ok: " << c.name << " (mu_crit " << c.mu_crit() << ")\n";
            return 0;
        }
        if (*run) return report(spid::run_batch(spid::load_manifest(manifest, default_out())));
        if (*pre) {
            auto configs = spid::preset_scenarios(preset, paper);
            std::vector<uint64_t> s;
            for (uint64_t k = 1; k <= seeds; ++k) s.push_back(k);
            std::filesystem::path dir = out.empty() ? default_out() : std::filesystem::path(out);
            return report(spid::run_configs(configs, s, dir, jobs,
                                            {spid::Emit::metrics, spid::Emit::event_log, spid::Emit::dag_snapshot,
                                             spid::Emit::csv_series}));
        }
    } catch (const spid::ConfigError& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
