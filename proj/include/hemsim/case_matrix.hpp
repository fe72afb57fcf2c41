#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "hemsim/data_pipeline.hpp"
#include "hemsim/metrics.hpp"
#include "hemsim/scenario_config.hpp"
#include "hemsim/sim_env.hpp"

namespace hemsim {

/// A community composition: an id and one DER class per house.
struct CommunityConfig {
    std::string id;
    std::vector<DerClass> ders;
};

/// The four-house mixed community followed by the four single-house cases.
inline std::vector<CommunityConfig> default_communities()
{
    using D = DerClass;
    return {
        {"Community", {D::PvAndBattery, D::BatteryOnly, D::PvOnly, D::NoDer}},
        {"1PV+Bat", {D::PvAndBattery}},
        {"1Bat", {D::BatteryOnly}},
        {"1PV", {D::PvOnly}},
        {"1No-DER", {D::NoDer}},
    };
}

inline std::optional<CommunityConfig> find_community(const std::string& id)
{
    for (auto& c : default_communities())
        if (c.id == id) return c;
    return std::nullopt;
}

/// Synthetic 7-day scenario for a community, houses named h1..hN.
inline ScenarioConfig community_scenario(const CommunityConfig& c, std::uint64_t seed = 0, double dt_hours = 1.0 / 6.0,
                                         int days = 7)
{
    ScenarioConfig s;
    s.name = c.id;
    s.dt_hours = dt_hours;
    s.horizon_steps = static_cast<std::size_t>(std::llround(days * 24.0 / dt_hours));
    for (std::size_t i = 0; i < c.ders.size(); ++i) s.houses.push_back(make_house(fmt::format("h{}", i + 1), c.ders[i], dt_hours));
    SyntheticSpec syn;
    syn.days = days;
    syn.seed = seed;
    s.disturbances.synthetic = syn;
    return s;
}

struct CaseSpec {
    std::string config;
    GridMode grid = GridMode::OffGrid;
    ControllerKind controller = ControllerKind::Baseline;
    StartupMode startup = StartupMode::WACSC;

    std::string type_label() const
    {
        return fmt::format("{} {} ({})", grid == GridMode::OffGrid ? "Off-Grid" : "On-Grid",
                           controller == ControllerKind::RuleBased ? "RB" : "BL",
                           startup == StartupMode::WACSC ? "WACSC" : "WOACSC");
    }
    std::string label() const { return fmt::format("{} {}", config, type_label()); }
    bool operator==(const CaseSpec&) const = default;
};

/// Five simulation types per configuration, in table order.
inline std::vector<CaseSpec> simulation_types(const std::string& config)
{
    using G = GridMode;
    using C = ControllerKind;
    using S = StartupMode;
    return {
        {config, G::OffGrid, C::Baseline, S::WACSC},  {config, G::OffGrid, C::Baseline, S::WOACSC},
        {config, G::OffGrid, C::RuleBased, S::WACSC}, {config, G::OffGrid, C::RuleBased, S::WOACSC},
        {config, G::OnGrid, C::Baseline, S::WOACSC},
    };
}

inline std::vector<CaseSpec> case_matrix(const std::vector<std::string>& configs)
{
    std::vector<CaseSpec> out;
    for (const auto& c : configs) {
        auto t = simulation_types(c);
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

inline std::vector<CaseSpec> default_case_matrix()
{
    std::vector<std::string> ids;
    for (const auto& c : default_communities()) ids.push_back(c.id);
    return case_matrix(ids);
}

/// Matrix file: one case per line, "config,grid,controller,startup", '#'
/// comments. config is a built-in community id or a scenario file path.
inline std::vector<CaseSpec> load_case_matrix(const std::filesystem::path& path)
{
    const auto lines = csv::read_lines(path, "matrix");
    std::vector<CaseSpec> out;
    bool first = true;
    for (std::size_t r = 0; r < lines.size(); ++r) {
        const std::string line = csv::trim(lines[r]);
        if (line.empty() || line[0] == '#') continue;
        const auto f = csv::split(line);
        const std::string where = fmt::format("matrix line {}", r + 1);
        if (f.size() != 4) throw ParseError(where + ": expected config,grid,controller,startup");
        if (std::exchange(first, false) && csv::lower(f[0]) == "config") continue;
        CaseSpec c;
        c.config = f[0];
        const auto g = grid_mode_from_string(csv::lower(f[1]));
        const auto s = startup_mode_from_string(csv::lower(f[3]));
        const std::string ctl = csv::lower(f[2]);
        if (!g) throw ParseError(fmt::format("{}: unknown grid mode '{}'", where, f[1]));
        if (!s) throw ParseError(fmt::format("{}: unknown startup mode '{}'", where, f[3]));
        if (ctl == "baseline" || ctl == "bl")
            c.controller = ControllerKind::Baseline;
        else if (ctl == "rulebased" || ctl == "rb")
            c.controller = ControllerKind::RuleBased;
        else
            throw ParseError(fmt::format("{}: unknown controller '{}'", where, f[2]));
        c.grid = *g;
        c.startup = *s;
        out.push_back(c);
    }
    return out;
}

inline ScenarioConfig apply_case(ScenarioConfig s, const CaseSpec& c)
{
    s.grid = c.grid;
    s.controller = c.controller;
    s.plugin.clear();
    s.startup.mode = c.startup;
    return s;
}

/// Shrinks every PV array by whole panels until the community's rated PV is
/// at most `fraction` of its peak demand (all desired loads plus every AC at
/// rated power).
inline void size_pv_for_scarcity(ScenarioConfig& s, const DisturbanceSeries& d, double fraction = 0.5)
{
    double peak = 0.0;
    double ac = 0.0;
    for (const auto& h : s.houses) ac += h.thermal.p_ac_rated;
    for (std::size_t k = 0; k < d.steps; ++k) {
        double kw = ac;
        for (const auto& l : d.desired(k)) kw += sum(l) / s.dt_hours;
        peak = std::max(peak, kw);
    }
    auto rated = [&] {
        double r = 0.0;
        for (const auto& h : s.houses)
            if (h.pv) r += h.pv->rated_kw();
        return r;
    };
    while (rated() > fraction * peak) {
        bool changed = false;
        for (auto& h : s.houses)
            if (h.pv && h.pv->n_panels > 0) {
                --h.pv->n_panels;
                changed = true;
            }
        if (!changed) break;
    }
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepRow {
    CaseSpec spec;
    std::optional<MetricsReport> metrics;
    std::string status = "ok";
    double wall_s = 0.0;
    std::string label;  // overrides spec.label() when set

    std::string name() const { return label.empty() ? spec.label() : label; }
};

inline std::string sweep_header()
{
    return "case,TRM_h,LRM_cri,LRM_o,LGR,mean_ms,p95_ms,max_ms,status";
}

inline std::string sweep_csv_row(const SweepRow& r)
{
    if (!r.metrics) return fmt::format("\"{}\",,,,,,,,\"{}\"", r.name(), r.status);
    const auto& m = *r.metrics;
    const TimingStats t = m.timing.value_or(TimingStats{});
    return fmt::format("\"{}\",{:.6f},{:.6f},{:.6f},{},{:.6f},{:.6f},{:.6f},{}", r.name(), m.trm_h, m.lrm_cri,
                       m.lrm_o, format_metric(m.lgr), t.mean_ms, t.p95_ms, t.max_ms, r.status);
}

/// Resolves a case's configuration: a scenario given by the caller when its
/// name matches, a built-in community, or a scenario file path.
struct CaseResolver {
    std::vector<ScenarioConfig> scenarios;
    std::uint64_t seed = 0;
    std::optional<DisturbanceSource> disturbances;  // replaces built-in communities' synthetic data

    ScenarioConfig resolve(const std::string& config) const
    {
        for (const auto& s : scenarios)
            if (s.name == config) return s;
        if (auto c = find_community(config)) {
            ScenarioConfig s = community_scenario(*c, seed);
            if (disturbances) s.disturbances = *disturbances;
            return s;
        }
        if (std::filesystem::exists(config)) return load_scenario(config);
        throw ValidationError(fmt::format("unknown community configuration '{}'", config));
    }
};

/// Runs every case; failures become rows with a status. `jobs` caps worker
/// threads. When `seed` is set it overrides synthetic seeds.
inline std::vector<SweepRow> run_sweep(const std::vector<CaseSpec>& cases, const CaseResolver& resolver,
                                       std::optional<std::uint64_t> seed, unsigned jobs = 1,
                                       const std::filesystem::path& case_dir = {})
{
    std::vector<SweepRow> rows(cases.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) {
            SweepRow& row = rows[i];
            row.spec = cases[i];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                ScenarioConfig s = apply_case(resolver.resolve(cases[i].config), cases[i]);
                const Trace trace = run_episode(std::move(s), std::string(), seed);
                row.metrics = compute_metrics(trace);
                if (!case_dir.empty()) {
                    std::ofstream out(case_dir / fmt::format("case{:02d}_metrics.txt", i + 1));
                    MetricsReport stable = *row.metrics;
                    stable.timing.reset();
                    write_metrics_text(trace, stable, out);
                }
            } catch (const std::exception& e) {
                row.status = fmt::format("failed: {}", e.what());
            }
            row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cases.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

}  // namespace hemsim
