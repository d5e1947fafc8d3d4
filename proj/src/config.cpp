#include "spid/config.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

namespace spid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
void take(const json& j, const char* key, T& dst)
{
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        dst = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(key) + ": wrong type");
    }
}

void take_count(const json& j, const char* key, uint32_t& dst)
{
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number_integer() || it->get<int64_t>() < 0) throw ConfigError(std::string(key) + ": must be a non-negative integer");
    dst = it->get<uint32_t>();
}

void take_size(const json& j, const char* key, std::size_t& dst)
{
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number_integer() || it->get<int64_t>() < 0) throw ConfigError(std::string(key) + ": must be a non-negative integer");
    dst = it->get<std::size_t>();
}

const std::set<std::string>& known_fields()
{
    static const std::set<std::string> k{
        "name", "N", "n", "M", "K", "lambda", "eta", "mu", "adversary_fraction", "gamma", "duration_min",
        "link_latency_ms", "bandwidth_mbps", "task_timeout_ms", "vote_timeout_ms", "coding_enabled", "seed",
        "genesis_balance", "genesis", "compute_ns_per_entry", "invalid_tx_fraction", "tx_per_block",
        "spend_fraction", "weights", "ds_pairs", "ds_regular", "tip_sample_s", "max_reassign_rounds"};
    return k;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError(p.string() + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt(double v)
{
    std::ostringstream ss;
    ss.precision(9);
    ss << v;
    return ss.str();
}

} // namespace

ScenarioConfig config_from_json(const json& j)
{
    if (!j.is_object()) throw ConfigError("config: expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known_fields().count(it.key())) throw ConfigError(it.key() + ": unknown field");
    ScenarioConfig c;
    take(j, "name", c.name);
    take_count(j, "N", c.N);
    take_count(j, "n", c.n);
    take_size(j, "M", c.M);
    take_size(j, "K", c.K);
    take(j, "lambda", c.lambda);
    take(j, "eta", c.eta);
    take(j, "mu", c.mu);
    take(j, "adversary_fraction", c.adversary_fraction);
    take(j, "gamma", c.gamma);
    take(j, "duration_min", c.duration_min);
    take(j, "link_latency_ms", c.link_latency_ms);
    take(j, "bandwidth_mbps", c.bandwidth_mbps);
    take(j, "task_timeout_ms", c.task_timeout_ms);
    take(j, "vote_timeout_ms", c.vote_timeout_ms);
    take(j, "coding_enabled", c.coding_enabled);
    take(j, "seed", c.seed);
    take(j, "genesis_balance", c.genesis_balance);
    take(j, "genesis", c.genesis);
    take(j, "compute_ns_per_entry", c.compute_ns_per_entry);
    take(j, "invalid_tx_fraction", c.invalid_tx_fraction);
    take_size(j, "tx_per_block", c.tx_per_block);
    take(j, "spend_fraction", c.spend_fraction);
    take(j, "weights", c.weights);
    take_size(j, "ds_pairs", c.ds_pairs);
    take_size(j, "ds_regular", c.ds_regular);
    take(j, "tip_sample_s", c.tip_sample_s);
    take_count(j, "max_reassign_rounds", c.max_reassign_rounds);
    validate_config(c);
    return c;
}

json config_to_json(const ScenarioConfig& c)
{
    json j;
    j["name"] = c.name;
    j["N"] = c.N;
    j["n"] = c.n;
    j["M"] = c.M;
    j["K"] = c.K;
    j["lambda"] = c.lambda;
    j["eta"] = c.eta;
    j["mu"] = c.mu;
    j["adversary_fraction"] = c.adversary_fraction;
    j["gamma"] = c.gamma;
    j["duration_min"] = c.duration_min;
    j["link_latency_ms"] = c.link_latency_ms;
    j["bandwidth_mbps"] = c.bandwidth_mbps;
    j["task_timeout_ms"] = c.task_timeout_ms;
    j["vote_timeout_ms"] = c.vote_timeout_ms;
    j["coding_enabled"] = c.coding_enabled;
    j["seed"] = c.seed;
    j["genesis_balance"] = c.genesis_balance;
    j["genesis"] = c.genesis;
    j["compute_ns_per_entry"] = c.compute_ns_per_entry;
    j["invalid_tx_fraction"] = c.invalid_tx_fraction;
    j["tx_per_block"] = c.tx_per_block;
    j["spend_fraction"] = c.spend_fraction;
    j["weights"] = c.weights;
    j["ds_pairs"] = c.ds_pairs;
    j["ds_regular"] = c.ds_regular;
    j["tip_sample_s"] = c.tip_sample_s;
    j["max_reassign_rounds"] = c.max_reassign_rounds;
    return j;
}

ScenarioConfig load_config(const fs::path& path)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

json report_to_json(const MetricsReport& r)
{
    json j;
    j["config"] = config_to_json(r.config);
    j["seed"] = r.config.seed;
    j["mu_crit"] = r.config.mu_crit();
    j["intra_throughput"] = r.intra_throughput;
    j["inter_throughput"] = r.inter_throughput;
    json gs = json::array();
    for (auto& g : r.gini_series) gs.push_back(opt(g));
    j["gini_series"] = gs;
    j["gini_mean"] = opt(r.gini_mean);
    j["final_tip_pool"] = r.final_tip_pool;
    j["mean_finality_s"] = opt(r.mean_finality_s);
    j["finality_count"] = r.finality_samples.size();
    j["throughput_per_minute"] = r.throughput_per_minute;
    const auto& d = r.double_spend;
    j["double_spend"] = {{"pairs", d.pairs},
                         {"regular", d.regular},
                         {"detected_pairs", d.detected_pairs},
                         {"false_alarms", d.false_alarms},
                         {"p_d", d.p_d},
                         {"p_fa", d.p_fa},
                         {"mean_delay_s", opt(d.mean_delay_s)}};
    j["honest_blocks"] = r.honest_blocks;
    j["adversarial_blocks"] = r.adversarial_blocks;
    j["adversarial_confirmed"] = r.adversarial_confirmed;
    j["stage_timeouts"] = r.stage_timeouts;
    j["straggler_messages"] = r.straggler_messages;
    j["superblocks"] = r.superblocks;
    j["conservation_ok"] = r.conservation_ok;
    j["ledgers_consistent"] = r.ledgers_consistent;
    return j;
}

std::string tip_pool_csv(const MetricsReport& r)
{
    std::string s = "time_s,count\n";
    for (auto& [t, c] : r.tip_pool_series) s += fmt(t) + "," + std::to_string(c) + "\n";
    return s;
}

std::string finality_csv(const MetricsReport& r)
{
    std::string s = "block_id,seconds\n";
    for (auto& [id, sec] : r.finality_samples) s += std::to_string(id) + "," + fmt(sec) + "\n";
    return s;
}

std::string throughput_csv(const MetricsReport& r)
{
    std::string s = "minute,blocks\n";
    for (std::size_t m = 0; m < r.throughput_per_minute.size(); ++m)
        s += std::to_string(m) + "," + std::to_string(r.throughput_per_minute[m]) + "\n";
    return s;
}

RunManifest load_manifest(const fs::path& path, const fs::path& default_out)
{
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    static const std::set<std::string> known{"scenarios", "output", "seeds", "parallelism", "emit"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ConfigError(it.key() + ": unknown manifest field");
    RunManifest m;
    const fs::path base = path.parent_path();
    if (!j.contains("scenarios") || !j["scenarios"].is_array() || j["scenarios"].empty())
        throw ConfigError("scenarios: must be a non-empty list of paths");
    for (auto& s : j["scenarios"]) {
        fs::path p = s.get<std::string>();
        m.scenarios.push_back(p.is_absolute() ? p : base / p);
    }
    m.output_dir = j.contains("output") ? fs::path(j["output"].get<std::string>()) : default_out;
    if (m.output_dir.empty()) throw ConfigError("output: no output directory given");
    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        if (s.is_number_integer()) {
            for (uint64_t k = 1; k <= s.get<uint64_t>(); ++k) m.seeds.push_back(k);
        } else if (s.is_array()) {
            m.seeds = s.get<std::vector<uint64_t>>();
        } else {
            throw ConfigError("seeds: must be a count or a list");
        }
    } else {
        m.seeds = {1};
    }
    if (m.seeds.empty()) throw ConfigError("seeds: must not be empty");
    if (j.contains("parallelism")) m.parallelism = std::max(1u, j["parallelism"].get<unsigned>());
    if (j.contains("emit")) {
        m.emit.clear();
        for (auto& e : j["emit"]) {
            auto s = e.get<std::string>();
            if (s == "metrics") m.emit.insert(Emit::metrics);
            else if (s == "event-log") m.emit.insert(Emit::event_log);
            else if (s == "dag-snapshot") m.emit.insert(Emit::dag_snapshot);
            else if (s == "csv-series") m.emit.insert(Emit::csv_series);
            else throw ConfigError("emit: unknown artifact '" + s + "'");
        }
    }
    return m;
}

json aggregate_reports(const std::vector<MetricsReport>& reports)
{
    json j;
    j["runs"] = reports.size();
    if (reports.empty()) return j;
    auto mean = [&](auto get) -> json {
        double s = 0;
        std::size_t n = 0;
        for (const auto& r : reports) {
            std::optional<double> v = get(r);
            if (v) s += *v, ++n;
        }
        return n ? json(s / double(n)) : json(nullptr);
    };
    j["config"] = config_to_json(reports.front().config);
    j["config"].erase("seed");
    j["seeds"] = json::array();
    for (const auto& r : reports) j["seeds"].push_back(r.config.seed);
    j["mu_crit"] = reports.front().config.mu_crit();
    j["intra_throughput"] = mean([](const MetricsReport& r) { return std::optional<double>(r.intra_throughput); });
    j["inter_throughput"] = mean([](const MetricsReport& r) { return std::optional<double>(r.inter_throughput); });
    j["gini_mean"] = mean([](const MetricsReport& r) { return r.gini_mean; });
    j["final_tip_pool"] = mean([](const MetricsReport& r) { return std::optional<double>(double(r.final_tip_pool)); });
    j["mean_finality_s"] = mean([](const MetricsReport& r) { return r.mean_finality_s; });
    j["p_d"] = mean([](const MetricsReport& r) { return std::optional<double>(r.double_spend.p_d); });
    j["p_fa"] = mean([](const MetricsReport& r) { return std::optional<double>(r.double_spend.p_fa); });
    j["mean_delay_s"] = mean([](const MetricsReport& r) { return r.double_spend.mean_delay_s; });
    j["honest_blocks"] = mean([](const MetricsReport& r) { return std::optional<double>(double(r.honest_blocks)); });
    j["adversarial_blocks"] =
        mean([](const MetricsReport& r) { return std::optional<double>(double(r.adversarial_blocks)); });
    j["stage_timeouts"] = mean([](const MetricsReport& r) { return std::optional<double>(double(r.stage_timeouts)); });
    bool cons = true;
    for (const auto& r : reports) cons = cons && r.conservation_ok && r.ledgers_consistent;
    j["conservation_ok"] = cons;
    return j;
}

BatchOutcome run_configs(const std::vector<ScenarioConfig>& configs, const std::vector<uint64_t>& seeds,
                         const fs::path& out, unsigned parallelism, const std::set<Emit>& emit)
{
    BatchOutcome res;
    try {
        fs::create_directories(out);
        const fs::path probe = out / ".spid-write-probe";
        write_file(probe, "");
        fs::remove(probe);
    } catch (const std::exception& e) {
        res.exit_code = 2;
        res.errors.push_back("output directory not writable: " + out.string());
        return res;
    }

    struct Job {
        std::size_t scenario;
        ScenarioConfig cfg;
        fs::path dir;
    };
    std::vector<Job> jobs;
    std::vector<std::string> names;
    std::set<std::string> used;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        std::string name = configs[i].name.empty() ? "scenario" : configs[i].name;
        std::string unique = name;
        for (int k = 2; used.count(unique); ++k) unique = name + "-" + std::to_string(k);
        used.insert(unique);
        names.push_back(unique);
        for (uint64_t s : seeds) {
            ScenarioConfig c = configs[i];
            c.seed = s;
            jobs.push_back({i, c, out / unique / ("seed-" + std::to_string(s))});
        }
    }

    std::vector<std::optional<MetricsReport>> reports(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::vector<int> codes(jobs.size(), 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            auto& job = jobs[k];
            try {
                validate_config(job.cfg);
            } catch (const ConfigError& e) {
                codes[k] = 1;
                errors[k] = names[job.scenario] + ": " + e.what();
                continue;
            }
            try {
                ScenarioArtifacts art;
                auto r = run_scenario(job.cfg, &art);
                fs::create_directories(job.dir);
                if (emit.count(Emit::metrics)) write_file(job.dir / "metrics.json", report_to_json(r).dump(2) + "\n");
                if (emit.count(Emit::event_log)) {
                    std::string s;
                    for (auto& l : art.event_log) s += l + "\n";
                    write_file(job.dir / "events.jsonl", s);
                }
                if (emit.count(Emit::dag_snapshot)) write_file(job.dir / "dag.txt", art.dag_snapshot);
                if (emit.count(Emit::csv_series)) {
                    write_file(job.dir / "tip_pool.csv", tip_pool_csv(r));
                    write_file(job.dir / "finality.csv", finality_csv(r));
                    write_file(job.dir / "throughput.csv", throughput_csv(r));
                }
                reports[k] = std::move(r);
            } catch (const std::exception& e) {
                codes[k] = 2;
                errors[k] = names[job.scenario] + " seed " + std::to_string(job.cfg.seed) + ": " + e.what();
            }
        }
    };
    unsigned threads = std::max(1u, std::min<unsigned>(parallelism, unsigned(jobs.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < configs.size(); ++i) {
        std::vector<MetricsReport> ok;
        for (std::size_t k = 0; k < jobs.size(); ++k)
            if (jobs[k].scenario == i && reports[k]) ok.push_back(*reports[k]);
        if (!ok.empty()) {
            fs::create_directories(out / names[i]);
            write_file(out / names[i] / "aggregate.json", aggregate_reports(ok).dump(2) + "\n");
        }
    }
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (reports[k]) ++res.runs;
        if (codes[k]) {
            res.errors.push_back(errors[k]);
            res.exit_code = std::max(res.exit_code, codes[k]);
        }
    }
    // a validation failure takes precedence in the exit status
    for (int c : codes)
        if (c == 1) res.exit_code = 1;
    return res;
}

BatchOutcome run_batch(const RunManifest& m)
{
    std::vector<ScenarioConfig> configs;
    BatchOutcome bad;
    std::vector<std::string> load_errors;
    for (const auto& p : m.scenarios) {
        try {
            auto c = load_config(p);
            if (c.name == ScenarioConfig{}.name) c.name = p.stem().string();
            configs.push_back(c);
        } catch (const ConfigError& e) {
            load_errors.push_back(p.string() + ": " + e.what());
        }
    }
    auto res = run_configs(configs, m.seeds, m.output_dir, m.parallelism, m.emit);
    if (res.exit_code == 2 && res.runs == 0 && !res.errors.empty() &&
        res.errors.front().rfind("output directory", 0) == 0)
        return res;
    for (auto& e : load_errors) res.errors.push_back(e);
    if (!load_errors.empty()) res.exit_code = 1;
    return res;
}

// ---------------------------------------------------------------------------

std::vector<std::string> preset_names()
{
    return {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig7-k2", "fig7-k4", "fig8"};
}

namespace {

ScenarioConfig desk(bool paper)
{
    ScenarioConfig c;
    c.N = 10;
    c.n = paper ? 100 : 20;
    c.M = paper ? 1000 : 100;
    c.lambda = 0.1;
    c.eta = 0.67;
    c.K = 2;
    c.seed = 1;
    return c;
}

std::string tag(double v)
{
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

} // namespace

std::vector<ScenarioConfig> preset_scenarios(const std::string& name, bool paper)
{
    std::vector<ScenarioConfig> out;
    const double scale = paper ? 5.0 : 1.0;   // full-size runs last five times longer
    if (name == "fig2") {
        for (double lambda : {0.1, 0.3})
            for (bool coded : {true, false})
                for (double rate : {15.0, 30.0, 60.0}) {
                    auto c = desk(paper);
                    c.lambda = lambda;
                    c.coding_enabled = coded;
                    c.gamma = rate * c.N;
                    c.duration_min = 1 * scale;
                    c.name = "fig2-lambda" + tag(lambda) + (coded ? "-coded" : "-uncoded") + "-rate" + tag(rate);
                    out.push_back(c);
                }
    } else if (name == "fig3") {
        for (uint32_t N : {5u, 15u})
            for (double lambda : {0.1, 0.3}) {
                auto c = desk(paper);
                c.N = N;
                c.lambda = lambda;
                c.gamma = 30.0 * N;
                c.duration_min = 1 * scale;
                c.name = "fig3-N" + std::to_string(N) + "-lambda" + tag(lambda);
                out.push_back(c);
            }
    } else if (name == "fig4") {
        for (double mu : {0.1, 0.55})
            for (double gamma : {30.0, 60.0, 120.0}) {
                auto c = desk(paper);
                c.mu = mu;
                c.adversary_fraction = 0.2;
                c.gamma = gamma;
                c.duration_min = scale;
                c.name = "fig4-mu" + tag(mu) + "-gamma" + tag(gamma);
                out.push_back(c);
            }
    } else if (name == "fig5") {
        for (uint32_t n : paper ? std::vector<uint32_t>{100, 200} : std::vector<uint32_t>{20, 40})
            for (double gamma : {30.0, 60.0, 120.0}) {
                auto c = desk(paper);
                c.n = n;
                c.mu = 0.1;
                c.adversary_fraction = 0.2;
                c.gamma = gamma;
                c.duration_min = scale;
                c.name = "fig5-n" + std::to_string(n) + "-gamma" + tag(gamma);
                out.push_back(c);
            }
    } else if (name == "fig6") {
        for (std::size_t K : {2u, 4u})
            for (double mu : {0.1, 0.3, 0.55, 0.8}) {
                auto c = desk(paper);
                c.K = K;
                c.mu = mu;
                c.adversary_fraction = 0.2;
                c.gamma = 60;
                c.duration_min = paper ? 5 : 4;
                c.name = "fig6-K" + std::to_string(K) + "-mu" + tag(mu);
                out.push_back(c);
            }
    } else if (name == "fig7-k2" || name == "fig7-k4" || name == "fig7") {
        auto add = [&](std::size_t K, std::initializer_list<double> mus) {
            for (double mu : mus) {
                auto c = desk(paper);
                c.K = K;
                c.mu = mu;
                c.adversary_fraction = 0.2;
                c.gamma = 60;
                c.duration_min = paper ? 12 : 4;
                c.name = "fig7-k" + std::to_string(K) + "-mu" + tag(mu);
                out.push_back(c);
            }
        };
        if (name != "fig7-k4") add(2, {0.35, 0.55});
        if (name != "fig7-k2") add(4, {0.6, 0.8});
    } else if (name == "fig8") {
        for (std::size_t K : {2u, 4u}) {
            auto c = desk(paper);
            c.K = K;
            c.mu = 0.2;
            c.adversary_fraction = 0.2;
            c.gamma = 60;
            c.ds_pairs = paper ? 50 : 10;
            c.ds_regular = paper ? 300 : 60;
            c.duration_min = paper ? 12 : 4;
            c.name = "fig8-K" + std::to_string(K);
            out.push_back(c);
        }
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    for (auto& c : out) validate_config(c);
    return out;
}

} // namespace spid
