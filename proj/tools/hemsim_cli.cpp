// hemsim: run, sweep and benchmark community simulations.
//
// Exit codes: 0 ok, 1 run failure, 2 input or validation failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hemsim/hemsim.hpp"

namespace fs = std::filesystem;
using namespace hemsim;

namespace {

struct Options {
    std::string scenario;
    std::string controller;
    std::string grid;
    std::string startup;
    std::string weather;
    std::string loads;
    std::string circuit_map;
    bool synth = false;
    bool allow_upsample = false;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string matrix;
    unsigned jobs = 1;
    int repetitions = 3;
    int days = 7;
    int profiles = 4;
    double dt_minutes = 10.0;
    bool dump = false;
};

void add_scenario_flags(CLI::App* cmd, Options& o)
{
    cmd->add_option("--scenario", o.scenario, "Scenario YAML file (default: built-in four-house community)");
    cmd->add_option("--controller", o.controller, "baseline, rulebased or a registered plug-in name");
    cmd->add_option("--grid", o.grid, "Grid mode override")->transform(CLI::IsMember({"on", "off", "on_grid", "off_grid"}, CLI::ignore_case));
    cmd->add_option("--startup", o.startup, "Startup mode override")->transform(CLI::IsMember({"wacsc", "woacsc"}, CLI::ignore_case));
    cmd->add_option("--weather", o.weather, "NSRDB-style weather CSV");
    cmd->add_option("--loads", o.loads, "Pecan-Street-style circuit load CSV");
    cmd->add_option("--circuit-map", o.circuit_map, "Circuit column to priority map");
    cmd->add_flag("--allow-upsample", o.allow_upsample, "Interpolate data coarser than the step");
    cmd->add_flag("--synth", o.synth, "Use seeded synthetic disturbances");
    cmd->add_option("--seed", o.seed, "Seed for synthetic disturbances");
}

DisturbanceSource file_source(const Options& o)
{
    if (o.weather.empty() != o.loads.empty())
        throw ValidationError("--weather and --loads must be given together");
    if (!fs::exists(o.weather)) throw DataError(fmt::format("weather file not found: {}", o.weather));
    if (!fs::exists(o.loads)) throw DataError(fmt::format("loads file not found: {}", o.loads));
    if (!o.circuit_map.empty() && !fs::exists(o.circuit_map))
        throw DataError(fmt::format("circuit map file not found: {}", o.circuit_map));
    DisturbanceSource d;
    d.weather_path = fs::absolute(o.weather).string();
    d.loads_path = fs::absolute(o.loads).string();
    if (!o.circuit_map.empty()) d.circuit_map_path = fs::absolute(o.circuit_map).string();
    d.allow_upsample = o.allow_upsample;
    return d;
}

void apply_controller(ScenarioConfig& s, const std::string& name)
{
    if (name.empty()) return;
    if (name == "baseline") {
        s.controller = ControllerKind::Baseline;
    } else if (name == "rulebased") {
        s.controller = ControllerKind::RuleBased;
    } else {
        if (!ControllerRegistry::instance().contains(name))
            throw ValidationError(fmt::format("unknown controller '{}'", name));
        s.controller = ControllerKind::External;
        s.plugin = name;
    }
}

ScenarioConfig build_scenario(const Options& o)
{
    ScenarioConfig s = o.scenario.empty() ? community_scenario(*find_community("Community")) : load_scenario(o.scenario);
    if (!o.weather.empty() || !o.loads.empty()) {
        s.disturbances = file_source(o);
    } else if (o.synth && !s.disturbances.synthetic) {
        s.disturbances = DisturbanceSource{};
        s.disturbances.synthetic = SyntheticSpec{};
    }
    if (!o.circuit_map.empty() && o.weather.empty()) s.disturbances.circuit_map_path = fs::absolute(o.circuit_map).string();
    if (o.allow_upsample) s.disturbances.allow_upsample = true;
    if (!o.grid.empty()) s.grid = *grid_mode_from_string(o.grid);
    if (!o.startup.empty()) s.startup.mode = *startup_mode_from_string(o.startup);
    apply_controller(s, o.controller);
    validate(s);
    return s;
}

std::string case_label(const ScenarioConfig& s)
{
    if (s.controller != ControllerKind::External) return CaseSpec{s.name, s.grid, s.controller, s.startup.mode}.label();
    return fmt::format("{} {} {} ({})", s.name, s.grid == GridMode::OffGrid ? "Off-Grid" : "On-Grid",
                       s.plugin.empty() ? "external" : s.plugin, s.startup.mode == StartupMode::WACSC ? "WACSC" : "WOACSC");
}

int cmd_run(const Options& o)
{
    const ScenarioConfig s = build_scenario(o);
    const Trace trace = run_episode(s, std::string(), o.seed);
    MetricsReport m = compute_metrics(trace);
    const TimingStats timing = *m.timing;
    m.timing.reset();

    fs::create_directories(o.out);
    write_trace_csv(trace, fs::path(o.out) / "trace.csv");
    write_timeseries_csv(trace, fs::path(o.out) / "timeseries.csv");
    {
        std::ofstream out(fs::path(o.out) / "metrics.txt");
        write_metrics_text(trace, m, out);
    }
    SweepRow row;
    row.spec = CaseSpec{s.name, s.grid, s.controller, s.startup.mode};
    row.metrics = m;
    row.metrics->timing = timing;
    row.label = case_label(s);
    std::cout << sweep_header() << '\n' << sweep_csv_row(row) << '\n';
    return 0;
}

int cmd_sweep(const Options& o)
{
    CaseResolver resolver;
    resolver.seed = o.seed.value_or(0);
    std::vector<CaseSpec> cases;
    if (!o.weather.empty() || !o.loads.empty()) resolver.disturbances = file_source(o);
    if (!o.scenario.empty()) {
        ScenarioConfig s = load_scenario(o.scenario);
        if (resolver.disturbances) s.disturbances = *resolver.disturbances;
        resolver.scenarios.push_back(s);
        cases = simulation_types(s.name);
    }
    if (!o.matrix.empty()) cases = load_case_matrix(o.matrix);
    if (cases.empty()) cases = default_case_matrix();
    if (!o.startup.empty() || !o.grid.empty() || !o.controller.empty())
        std::cerr << "note: --grid/--startup/--controller are ignored by sweep; the matrix fixes them\n";

    fs::create_directories(fs::path(o.out) / "cases");
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = run_sweep(cases, resolver, o.seed, o.jobs, fs::path(o.out) / "cases");
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream summary(fs::path(o.out) / "summary.csv");
    summary << "case,TRM_h,LRM_cri,LRM_o,LGR,status\n";
    std::cout << sweep_header() << '\n';
    bool failed = false;
    for (const auto& r : rows) {
        std::cout << sweep_csv_row(r) << '\n';
        if (r.metrics)
            summary << fmt::format("\"{}\",{:.6f},{:.6f},{:.6f},{},ok\n", r.spec.label(), r.metrics->trm_h,
                                   r.metrics->lrm_cri, r.metrics->lrm_o, format_metric(r.metrics->lgr));
        else
            summary << fmt::format("\"{}\",,,,,\"{}\"\n", r.spec.label(), r.status);
        failed = failed || !r.metrics;
    }
    std::cerr << fmt::format("{} cases in {:.3f} s\n", rows.size(), wall);
    return failed ? 1 : 0;
}

int cmd_bench(const Options& o)
{
    if (o.repetitions < 3) throw ValidationError("minimum 3 repetitions");
    const ScenarioConfig s = build_scenario(o);
    Environment env(s);
    env.reset(o.seed);
    while (!env.done()) env.step();  // warm-up

    std::vector<double> all;
    std::vector<double> rep_means;
    for (int r = 0; r < o.repetitions; ++r) {
        env.reset(o.seed);
        while (!env.done()) env.step();
        const auto& ms = env.trace().step_ms;
        all.insert(all.end(), ms.begin(), ms.end());
        rep_means.push_back(timing_stats(ms).mean_ms);
    }
    const TimingStats t = timing_stats(all);
    std::cout << "case,houses,steps,repetitions,mean_ms,p95_ms,max_ms\n";
    std::cout << fmt::format("\"{}\",{},{},{},{:.6f},{:.6f},{:.6f}\n", case_label(s), s.houses.size(),
                             s.horizon_steps, o.repetitions, t.mean_ms, t.p95_ms, t.max_ms);
    for (std::size_t r = 0; r < rep_means.size(); ++r)
        std::cerr << fmt::format("repetition {}: mean {:.6f} ms\n", r + 1, rep_means[r]);
    return 0;
}

int cmd_synth(const Options& o)
{
    SyntheticSpec spec;
    spec.days = o.days;
    const double dt = o.dt_minutes / 60.0;
    const SyntheticData d = synth_disturbances(spec, o.seed.value_or(0), dt, static_cast<std::size_t>(o.profiles));
    fs::create_directories(o.out);
    write_weather_csv(d.weather, fs::path(o.out) / "weather.csv");
    write_loads_csv(d.loads, fs::path(o.out) / "loads.csv");
    std::cout << fmt::format("wrote {} steps, {} load profiles to {}\n", d.weather.size(), d.loads.profile_ids.size(),
                             o.out);
    return 0;
}

int cmd_serve(const Options& o)
{
    std::optional<ScenarioConfig> s;
    s = build_scenario(o);
    ProtocolSession session(s);
    std::string line;
    while (!session.closed() && std::getline(std::cin, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::cout << session.handle(line) << '\n' << std::flush;
    }
    return 0;
}

int cmd_validate(const Options& o)
{
    const ScenarioConfig s = build_scenario(o);
    if (o.dump) {
        std::cout << to_yaml(s);
        return 0;
    }
    std::cout << fmt::format("ok: {} ({} houses, {} steps, digest {:016x})\n", s.name, s.houses.size(),
                             s.horizon_steps, scenario_digest(s));
    return 0;
}

int cmd_schema(const Options& o)
{
    const ScenarioConfig s = build_scenario(o);
    std::cout << schema_json(s.houses).dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Discrete-time smart residential community simulator"};
    app.require_subcommand(1);
    Options o;

    auto* run = app.add_subcommand("run", "Run one case and write trace, time series and metrics");
    add_scenario_flags(run, o);
    run->add_option("--out", o.out, "Output directory");

    auto* sweep = app.add_subcommand("sweep", "Run the case matrix and print one row per case");
    sweep->add_option("--scenario", o.scenario, "Sweep this scenario's five simulation types");
    sweep->add_option("--matrix", o.matrix, "Case list: config,grid,controller,startup per line");
    sweep->add_option("--weather", o.weather, "NSRDB-style weather CSV");
    sweep->add_option("--loads", o.loads, "Pecan-Street-style circuit load CSV");
    sweep->add_option("--circuit-map", o.circuit_map, "Circuit column to priority map");
    sweep->add_flag("--allow-upsample", o.allow_upsample, "Interpolate data coarser than the step");
    sweep->add_flag("--synth", o.synth, "Use seeded synthetic disturbances (default)");
    sweep->add_option("--seed", o.seed, "Seed for synthetic disturbances");
    sweep->add_option("--controller", o.controller, "Ignored; the matrix fixes the controller");
    sweep->add_option("--grid", o.grid, "Ignored; the matrix fixes the grid mode");
    sweep->add_option("--startup", o.startup, "Ignored; the matrix fixes the startup mode");
    sweep->add_option("--jobs", o.jobs, "Parallel cases")->check(CLI::PositiveNumber);
    sweep->add_option("--out", o.out, "Output directory");

    auto* bench = app.add_subcommand("bench", "Per-iteration latency after one warm-up episode");
    add_scenario_flags(bench, o);
    bench->add_option("--repetitions", o.repetitions, "Timed episodes (>= 3)");

    auto* synth = app.add_subcommand("synth", "Write seeded synthetic weather and load CSVs");
    synth->add_option("--seed", o.seed, "Generator seed");
    synth->add_option("--days", o.days, "Days to generate");
    synth->add_option("--profiles", o.profiles, "Independent load profiles")->check(CLI::PositiveNumber);
    synth->add_option("--dt-minutes", o.dt_minutes, "Step length in minutes");
    synth->add_option("--out", o.out, "Output directory");

    auto* serve = app.add_subcommand("serve", "JSON-lines step/reset protocol on stdin/stdout");
    add_scenario_flags(serve, o);

    auto* val = app.add_subcommand("validate", "Load and validate a scenario");
    add_scenario_flags(val, o);
    val->add_flag("--dump", o.dump, "Print the canonical YAML form");

    auto* schema = app.add_subcommand("schema", "Print observation and action schema as JSON");
    add_scenario_flags(schema, o);

    app.add_subcommand("controllers", "List registered controllers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*run) return cmd_run(o);
        if (*sweep) return cmd_sweep(o);
        if (*bench) return cmd_bench(o);
        if (*synth) return cmd_synth(o);
        if (*serve) return cmd_serve(o);
        if (*val) return cmd_validate(o);
        if (*schema) return cmd_schema(o);
        for (const auto& n : ControllerRegistry::instance().names()) std::cout << n << '\n';
        return 0;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
