#pragma once

#include <algorithm>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "hemsim/device_models.hpp"
#include "hemsim/params.hpp"

namespace hemsim {

/// Community energy balance for one step. Positive e_grid is export.
struct CommunityBalance {
    double e_gen = 0.0;
    double e_dem = 0.0;
    double e_mis = 0.0;
    double e_grid = 0.0;
    double p_mis_ac = 0.0;  // kW
    std::vector<bool> startup_flags;

    bool operator==(const CommunityBalance&) const = default;
};

enum class Verdict { ServeAll, ServeNone };
enum class Reason { Feasible, EnergyDeficit, StartupDeficit, OnGrid };

struct FeasibilityOutcome {
    Verdict verdict = Verdict::ServeAll;
    Reason reason = Reason::Feasible;

    bool serve() const { return verdict == Verdict::ServeAll; }
    bool operator==(const FeasibilityOutcome&) const = default;
};

inline std::string_view to_string(Verdict v) { return v == Verdict::ServeAll ? "serve_all" : "serve_none"; }

inline std::string_view to_string(Reason r)
{
    switch (r) {
    case Reason::Feasible: return "feasible";
    case Reason::EnergyDeficit: return "energy_deficit";
    case Reason::StartupDeficit: return "startup_deficit";
    case Reason::OnGrid: return "on_grid";
    }
    return "?";
}

inline CommunityBalance community_balance(std::span<const DeviceEnergies> houses)
{
    CommunityBalance b;
    for (const auto& e : houses) {
        b.e_gen += e.e_pv + e.e_bat_d;
        b.e_dem += e.e_ac + e.e_bat_c + sum(e.e_loads);
    }
    b.e_mis = b.e_gen - b.e_dem;
    b.e_grid = b.e_mis;
    return b;
}

struct StartupMismatch {
    double p_mis_ac = 0.0;  // kW
    std::vector<bool> flags;
};

/// AC startup power mismatch. A house counts as starting when its AC goes
/// from off at the previous step to on now; `p_su` is per house.
inline StartupMismatch startup_mismatch(double e_gen, std::span<const bool> u_ac_now, std::span<const bool> u_ac_prev,
                                        std::span<const double> p_su, double dt_hours)
{
    StartupMismatch r;
    r.p_mis_ac = e_gen / dt_hours;
    r.flags.resize(u_ac_now.size());
    for (std::size_t i = 0; i < u_ac_now.size(); ++i) {
        r.flags[i] = u_ac_now[i] && !u_ac_prev[i];
        if (r.flags[i]) r.p_mis_ac -= p_su[i];
    }
    return r;
}

inline StartupMismatch startup_mismatch(double e_gen, std::span<const bool> u_ac_now, std::span<const bool> u_ac_prev,
                                        double p_su, double dt_hours)
{
    const std::vector<double> per_house(u_ac_now.size(), p_su);
    return startup_mismatch(e_gen, u_ac_now, u_ac_prev, per_house, dt_hours);
}

/// Serve/curtail decision for a candidate step.
inline FeasibilityOutcome resolve_step(double e_mis, double p_mis_ac, GridMode grid, StartupMode startup)
{
    if (grid == GridMode::OnGrid) return {Verdict::ServeAll, Reason::OnGrid};
    if (e_mis < 0.0) return {Verdict::ServeNone, Reason::EnergyDeficit};
    if (startup == StartupMode::WACSC && p_mis_ac < 0.0) return {Verdict::ServeNone, Reason::StartupDeficit};
    return {Verdict::ServeAll, Reason::Feasible};
}

inline FeasibilityOutcome resolve_step(const CommunityBalance& b, GridMode grid, StartupMode startup)
{
    return resolve_step(b.e_mis, b.p_mis_ac, grid, startup);
}

/// Off-grid generation cannot leave the community: trims a non-negative
/// surplus, battery discharge first and then PV, in house order.
inline void curtail_surplus(std::span<DeviceEnergies> houses, double surplus)
{
    for (auto& e : houses) {
        if (surplus <= 0.0) return;
        const double cut = std::min(e.e_bat_d, surplus);
        e.e_bat_d -= cut;
        surplus -= cut;
    }
    for (auto& e : houses) {
        if (surplus <= 0.0) return;
        const double cut = std::min(e.e_pv, surplus);
        e.e_pv -= cut;
        surplus -= cut;
    }
}

/// Everything the engine derives from one candidate action set.
struct StepEvaluation {
    std::vector<DeviceEnergies> energies;
    std::vector<double> e_bat_next;
    CommunityBalance balance;
    FeasibilityOutcome outcome;
};

/// Candidate device energies, balance, startup mismatch and verdict for one
/// step. All spans are indexed by house.
inline StepEvaluation evaluate_step(std::span<const HouseConfig> houses, std::span<const HouseState> states,
                                    std::span<const ActionVector> actions, std::span<const double> potentials,
                                    std::span<const LoadVector> desired, GridMode grid, const StartupParams& startup,
                                    double dt_hours)
{
    const std::size_t n = houses.size();
    StepEvaluation ev;
    ev.energies.resize(n);
    ev.e_bat_next.resize(n);
    std::vector<double> p_su(n);
    auto now = std::make_unique<bool[]>(n);
    auto prev = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const HouseStepEnergies h =
            house_energies(houses[i], states[i], actions[i], potentials[i], desired[i], grid, dt_hours);
        ev.energies[i] = h.energies;
        ev.e_bat_next[i] = h.e_bat_next;
        p_su[i] = ac_startup_power(startup, houses[i].thermal.p_ac_rated);
        now[i] = actions[i].u_ac;
        prev[i] = states[i].u_ac_prev;
    }
    ev.balance = community_balance(ev.energies);
    StartupMismatch sm = startup_mismatch(ev.balance.e_gen, std::span<const bool>(now.get(), n),
                                          std::span<const bool>(prev.get(), n), p_su, dt_hours);
    ev.balance.p_mis_ac = sm.p_mis_ac;
    ev.balance.startup_flags = std::move(sm.flags);
    ev.outcome = resolve_step(ev.balance, grid, startup.mode);
    return ev;
}

}  // namespace hemsim
