#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hemsim/error.hpp"
#include "hemsim/sim_env.hpp"

namespace hemsim {

struct TimingStats {
    double mean_ms = 0.0;
    double p95_ms = 0.0;  // nearest rank
    double max_ms = 0.0;
    std::size_t samples = 0;
};

struct HouseMetrics {
    std::string id;
    double trm_h = 1.0;
    double lrm_cri = 1.0;
    double lrm_o = 1.0;
    std::optional<double> lgr;
    double trm_deviation_degC = 0.0;
};

struct MetricsReport {
    double trm_h = 1.0;
    double lrm_cri = 1.0;
    double lrm_o = 1.0;
    std::optional<double> lgr;     // absent when the episode had no demand
    double trm_deviation_degC = 0.0;
    bool lrm_cri_vacuous = false;  // nothing critical was desired
    bool lrm_o_vacuous = false;
    std::size_t steps = 0;
    std::size_t served_steps = 0;
    std::vector<HouseMetrics> houses;
    std::optional<TimingStats> timing;
};

/// Ratio with the "nothing desired means fully served" convention.
inline double served_ratio(double served, double desired, bool* vacuous = nullptr)
{
    if (vacuous) *vacuous = !(desired > 0.0);
    return desired > 0.0 ? served / desired : 1.0;
}

inline double lrm_critical(const Trace& t)
{
    double s = 0.0, d = 0.0;
    for (const auto& r : t.steps)
        for (std::size_t i = 0; i < r.energies.size(); ++i) {
            s += r.energies[i].e_loads[0];
            d += r.desired[i][0];
        }
    return served_ratio(s, d);
}

inline double lrm_other(const Trace& t)
{
    double s = 0.0, d = 0.0;
    for (const auto& r : t.steps) {
        s += r.served_total();
        d += r.desired_total();
    }
    return served_ratio(s, d);
}

/// Fraction of (house, step) pairs with the post-step indoor temperature in
/// [t_mode_low, t_mode_high].
inline double trm_thermal(const Trace& t)
{
    std::size_t in = 0, total = 0;
    for (const auto& r : t.steps)
        for (std::size_t i = 0; i < r.t_house.size(); ++i) {
            const auto& p = t.thermostats[i];
            in += (r.t_house[i] >= p.t_mode_low && r.t_house[i] <= p.t_mode_high) ? 1 : 0;
            ++total;
        }
    return total ? static_cast<double>(in) / static_cast<double>(total) : 1.0;
}

/// Mean out-of-band excursion per (house, step), °C.
inline double trm_deviation(const Trace& t)
{
    double s = 0.0;
    std::size_t total = 0;
    for (const auto& r : t.steps)
        for (std::size_t i = 0; i < r.t_house.size(); ++i) {
            s += band_violation(r.t_house[i], t.thermostats[i]);
            ++total;
        }
    return total ? s / static_cast<double>(total) : 0.0;
}

inline std::optional<double> lgr(const Trace& t)
{
    double g = 0.0, d = 0.0;
    for (const auto& r : t.steps) {
        g += r.balance.e_gen;
        d += r.balance.e_dem;
    }
    if (!(d > 0.0)) return std::nullopt;
    return g / d;
}

inline TimingStats timing_stats(std::vector<double> ms)
{
    if (ms.empty()) throw Error("timing_stats: empty trace");
    TimingStats s;
    s.samples = ms.size();
    double total = 0.0;
    for (double v : ms) total += v;
    s.mean_ms = total / static_cast<double>(ms.size());
    std::sort(ms.begin(), ms.end());
    s.max_ms = ms.back();
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(ms.size())));
    s.p95_ms = ms[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

inline TimingStats timing_stats(const Trace& t) { return timing_stats(t.step_ms); }

inline MetricsReport compute_metrics(const Trace& t, bool with_timing = true)
{
    MetricsReport m;
    m.steps = t.steps.size();
    const std::size_t n = t.house_ids.size();
    std::vector<double> s1(n), d1(n), so(n), dO(n), gen(n), dem(n), dev(n);
    std::vector<std::size_t> in_band(n);
    double s1_all = 0.0, d1_all = 0.0, so_all = 0.0, do_all = 0.0;
    for (const auto& r : t.steps) {
        if (r.outcome.serve()) ++m.served_steps;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& e = r.energies[i];
            s1[i] += e.e_loads[0];
            d1[i] += r.desired[i][0];
            so[i] += e.e_load_total;
            dO[i] += sum(r.desired[i]);
            gen[i] += e.generation();
            dem[i] += e.demand();
            const auto& p = t.thermostats[i];
            in_band[i] += (r.t_house[i] >= p.t_mode_low && r.t_house[i] <= p.t_mode_high) ? 1 : 0;
            dev[i] += band_violation(r.t_house[i], p);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        s1_all += s1[i];
        d1_all += d1[i];
        so_all += so[i];
        do_all += dO[i];
        HouseMetrics h;
        h.id = t.house_ids[i];
        h.lrm_cri = served_ratio(s1[i], d1[i]);
        h.lrm_o = served_ratio(so[i], dO[i]);
        if (m.steps) {
            h.trm_h = static_cast<double>(in_band[i]) / static_cast<double>(m.steps);
            h.trm_deviation_degC = dev[i] / static_cast<double>(m.steps);
        }
        if (dem[i] > 0.0) h.lgr = gen[i] / dem[i];
        m.houses.push_back(std::move(h));
    }
    m.lrm_cri = served_ratio(s1_all, d1_all, &m.lrm_cri_vacuous);
    m.lrm_o = served_ratio(so_all, do_all, &m.lrm_o_vacuous);
    m.trm_h = trm_thermal(t);
    m.trm_deviation_degC = trm_deviation(t);
    m.lgr = lgr(t);
    if (with_timing && !t.step_ms.empty()) m.timing = timing_stats(t.step_ms);
    return m;
}

inline std::string format_metric(std::optional<double> v) { return v ? fmt::format("{:.6f}", *v) : "absent"; }

/// Structured text report; `key: value` lines, houses indented.
inline void write_metrics_text(const Trace& t, const MetricsReport& m, std::ostream& out)
{
    out << "scenario: " << t.scenario_name << '\n';
    out << fmt::format("scenario_digest: {:016x}\n", t.scenario_digest);
    out << "grid_mode: " << to_string(t.grid) << '\n';
    out << "controller: " << t.controller << '\n';
    out << "startup_mode: " << to_string(t.startup) << '\n';
    out << "steps: " << m.steps << '\n';
    out << "served_steps: " << m.served_steps << '\n';
    out << fmt::format("trm_h: {:.6f}\n", m.trm_h);
    out << fmt::format("lrm_cri: {:.6f}{}\n", m.lrm_cri, m.lrm_cri_vacuous ? " (vacuous: nothing desired)" : "");
    out << fmt::format("lrm_o: {:.6f}{}\n", m.lrm_o, m.lrm_o_vacuous ? " (vacuous: nothing desired)" : "");
    out << "lgr: " << format_metric(m.lgr) << (m.lgr ? "" : " (no demand)") << '\n';
    out << fmt::format("trm_deviation_degC: {:.6f}\n", m.trm_deviation_degC);
    out << "houses:\n";
    for (const auto& h : m.houses) {
        out << "  - id: " << h.id << '\n';
        out << fmt::format("    trm_h: {:.6f}\n    lrm_cri: {:.6f}\n    lrm_o: {:.6f}\n", h.trm_h, h.lrm_cri, h.lrm_o);
        out << "    lgr: " << format_metric(h.lgr) << '\n';
        out << fmt::format("    trm_deviation_degC: {:.6f}\n", h.trm_deviation_degC);
    }
    if (m.timing)
        out << fmt::format("timing:\n  mean_ms: {:.6f}\n  p95_ms: {:.6f}\n  max_ms: {:.6f}\n", m.timing->mean_ms,
                           m.timing->p95_ms, m.timing->max_ms);
}

}  // namespace hemsim
