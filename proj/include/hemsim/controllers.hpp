#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hemsim/device_models.hpp"
#include "hemsim/error.hpp"
#include "hemsim/grid_physics.hpp"
#include "hemsim/params.hpp"

namespace hemsim {

/// What a controller sees at step k, before acting. Spans are indexed by
/// house and stay valid for the duration of one `decide` call.
struct ControllerInput {
    std::size_t step = 0;
    std::span<const HouseConfig> houses;
    std::span<const HouseState> states;
    std::span<const double> pv_potential;  // kWh
    std::span<const LoadVector> desired;   // kWh
    double ghi = 0.0;
    double t_ambient = 0.0;
    double wind = 0.0;
    GridMode grid = GridMode::OffGrid;
    StartupParams startup;
    double dt_hours = 1.0 / 6.0;
};

// ---------------------------------------------------------------------------
// Baseline subsystem logic

struct ThermostatCommand {
    bool u_ac = false;
    AcMode u_mode = AcMode::Cool;

    bool operator==(const ThermostatCommand&) const = default;
};

/// Hysteresis thermostat. The mode switches at the outer band, the
/// compressor at the inner band; in heating mode the inner band is mirrored.
inline ThermostatCommand thermostat(double t_house, bool u_ac_prev, AcMode u_mode_prev, const ThermostatParams& p)
{
    ThermostatCommand cmd;
    if (p.paper_literal_mode) {
        if (t_house <= p.t_mode_low)
            cmd.u_mode = AcMode::Cool;
        else if (t_house >= p.t_mode_high)
            cmd.u_mode = AcMode::Heat;
        else
            cmd.u_mode = u_mode_prev;
        if (t_house >= p.t_ac_high)
            cmd.u_ac = true;
        else if (t_house <= p.t_ac_low)
            cmd.u_ac = false;
        else
            cmd.u_ac = u_ac_prev;
        return cmd;
    }

    if (t_house <= p.t_mode_low)
        cmd.u_mode = AcMode::Heat;
    else if (t_house >= p.t_mode_high)
        cmd.u_mode = AcMode::Cool;
    else
        cmd.u_mode = u_mode_prev;

    const bool cooling = cmd.u_mode == AcMode::Cool;
    if (t_house >= p.t_ac_high)
        cmd.u_ac = cooling;
    else if (t_house <= p.t_ac_low)
        cmd.u_ac = !cooling;
    else
        cmd.u_ac = u_ac_prev;
    return cmd;
}

/// PV fraction: load matching off-grid, uncurtailed on-grid.
inline double baseline_pv(GridMode grid, double potential, double e_d1)
{
    if (potential <= 0.0) return 0.0;
    if (grid == GridMode::OnGrid) return 1.0;
    return std::clamp(e_d1 / potential, 0.0, 1.0);
}

struct BatteryCommand {
    double c = 0.0;
    double d = 0.0;

    bool operator==(const BatteryCommand&) const = default;
};

/// Passive inverter-battery logic off-grid (charging wins when both
/// conditions hold), charge-to-full on-grid.
inline BatteryCommand baseline_battery(GridMode grid, double potential, double e_pv, double e_d2, double e_bat,
                                       const BatteryParams& p)
{
    if (grid == GridMode::OnGrid) return {e_bat < p.e_max ? 1.0 : 0.0, 0.0};
    const bool charge = potential >= e_d2;
    const bool discharge = e_pv < e_d2;
    if (charge) return {1.0, 0.0};
    return {0.0, discharge ? 1.0 : 0.0};
}

inline LoadSwitches baseline_loads(const LoadVector& desired)
{
    LoadSwitches u{};
    for (std::size_t j = 0; j < kPriorities; ++j) u[j] = desired[j] > 0.0;
    return u;
}

inline ActionVector baseline_house(const HouseConfig& house, const HouseState& state, double potential,
                                   const LoadVector& desired, GridMode grid, double dt_hours)
{
    ActionVector a;
    const ThermostatCommand th = thermostat(state.t_house, state.u_ac_prev, state.u_mode_prev, house.thermostat);
    a.u_ac = th.u_ac;
    a.u_mode = th.u_mode;
    a.u_loads = baseline_loads(desired);

    const double e_d2 = load_energy(a.u_loads, desired).total + ac_energy(a.u_ac, house.thermal.p_ac_rated, dt_hours);
    const double pot = house.pv ? potential : 0.0;
    double e_c = 0.0;
    double e_d = 0.0;
    if (house.battery) {
        // Battery is decided before PV, so the PV estimate is the full potential.
        const BatteryCommand cmd = baseline_battery(grid, pot, pot, e_d2, state.e_bat, *house.battery);
        a.c = cmd.c;
        a.d = cmd.d;
        const double bound =
            (grid == GridMode::OnGrid && a.c > 0.0) ? std::numeric_limits<double>::infinity() : std::abs(pot - e_d2);
        const BatteryStep b = battery_step(state.e_bat, a.c, a.d, bound, *house.battery);
        e_c = b.e_c;
        e_d = b.e_d;
    }
    if (house.pv) a.u_pv = baseline_pv(grid, pot, e_d2 + e_c - e_d);
    return a;
}

inline std::vector<ActionVector> baseline_step(const ControllerInput& in)
{
    std::vector<ActionVector> out(in.houses.size());
    for (std::size_t i = 0; i < in.houses.size(); ++i)
        out[i] = baseline_house(in.houses[i], in.states[i], in.pv_potential[i], in.desired[i], in.grid, in.dt_hours);
    return out;
}

// ---------------------------------------------------------------------------
// Rule-based curtailment

/// Largest charge the battery could accept this step, kWh.
inline double max_charge_dispatch(double e_bat, const BatteryParams& p)
{
    return std::min((p.e_max - e_bat) / p.eta_c, p.e_charge_cap);
}

/// Community-wide priority stack. Loads are visited P1 first, houses in
/// index order within a level, and served while the running total stays
/// within (total desired - e_mis_l); the first load that does not fit ends
/// the stack.
inline std::vector<LoadSwitches> priority_stack(std::span<const LoadVector> desired, double e_mis_l)
{
    std::vector<LoadSwitches> u(desired.size(), LoadSwitches{});
    double total = 0.0;
    for (std::size_t j = 0; j < kPriorities; ++j)
        for (const auto& d : desired) total += d[j];
    const double budget = total - std::max(0.0, e_mis_l);

    double served = 0.0;
    for (std::size_t j = 0; j < kPriorities; ++j) {
        for (std::size_t i = 0; i < desired.size(); ++i) {
            const double e = desired[i][j];
            if (e <= 0.0) continue;
            if (served + e > budget) return u;
            served += e;
            u[i][j] = true;
        }
    }
    return u;
}

namespace detail {

class CandidateSearch {
public:
    CandidateSearch(const ControllerInput& in, std::vector<ActionVector> actions)
        : in_(in), actions_(std::move(actions))
    {
    }

    bool feasible() const
    {
        return evaluate_step(in_.houses, in_.states, actions_, in_.pv_potential, in_.desired, in_.grid, in_.startup,
                             in_.dt_hours)
            .outcome.serve();
    }

    std::vector<ActionVector>& actions() { return actions_; }

    /// Applies `edit` to each house in `order` until the set is feasible.
    template <typename Edit>
    bool apply_until_feasible(const std::vector<std::size_t>& order, Edit edit)
    {
        for (std::size_t i : order) {
            if (!edit(actions_[i])) continue;
            if (feasible()) return true;
        }
        return false;
    }

    /// Drops served loads from the bottom of the stack until feasible.
    bool shed_loads_until_feasible()
    {
        for (std::size_t j = kPriorities; j-- > 0;) {
            for (std::size_t i = actions_.size(); i-- > 0;) {
                if (!actions_[i].u_loads[j]) continue;
                actions_[i].u_loads[j] = false;
                if (feasible()) return true;
            }
        }
        return feasible();
    }

private:
    const ControllerInput& in_;
    std::vector<ActionVector> actions_;
};

inline bool ac_off(ActionVector& a)
{
    if (!a.u_ac) return false;
    a.u_ac = false;
    return true;
}

inline bool charge_off(ActionVector& a)
{
    if (a.c <= 0.0) return false;
    a.c = 0.0;
    return true;
}

}  // namespace detail

/// Off-grid rule-based controller. Starts from the baseline commands and
/// curtails, in order, turning-on ACs, running ACs, battery charging and
/// finally loads through the priority stack. Every returned action set is
/// feasible for off-grid physics.
inline std::vector<ActionVector> rule_based_step(const ControllerInput& in)
{
    if (in.grid != GridMode::OffGrid) throw Error("rule-based controller requires off-grid mode");
    const std::size_t n = in.houses.size();
    const std::vector<ActionVector> base = baseline_step(in);

    auto evaluate = [&](const std::vector<ActionVector>& a) {
        return evaluate_step(in.houses, in.states, a, in.pv_potential, in.desired, in.grid, in.startup, in.dt_hours);
    };
    if (evaluate(base).outcome.serve()) return base;

    // Curtailment frees PV from house-level load matching so that any surplus
    // serves the rest of the community.
    std::vector<ActionVector> released = base;
    for (std::size_t i = 0; i < n; ++i)
        if (in.houses[i].pv && in.pv_potential[i] > 0.0) released[i].u_pv = 1.0;
    const StepEvaluation ev = evaluate(released);
    if (ev.outcome.serve()) return released;

    std::vector<std::size_t> turning_on, running, charging;
    for (std::size_t i = 0; i < n; ++i) {
        if (base[i].u_ac && !in.states[i].u_ac_prev) turning_on.push_back(i);
        if (base[i].u_ac && in.states[i].u_ac_prev) running.push_back(i);
        if (base[i].c > 0.0) charging.push_back(i);
    }
    std::vector<std::size_t> all_acs = turning_on;
    all_acs.insert(all_acs.end(), running.begin(), running.end());

    detail::CandidateSearch search(in, released);

    if (ev.balance.e_mis >= 0.0) {
        // Energy suffices; only AC startups are short.
        if (search.apply_until_feasible(turning_on, detail::ac_off)) return search.actions();
    } else {
        const double deficit = -ev.balance.e_mis;
        double ac_total = 0.0;
        double charge_total = 0.0;
        double load_total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ac_total += ac_energy(base[i].u_ac, in.houses[i].thermal.p_ac_rated, in.dt_hours);
            if (in.houses[i].battery)
                charge_total += base[i].c * max_charge_dispatch(in.states[i].e_bat, *in.houses[i].battery);
            load_total += sum(in.desired[i]);
        }

        if (deficit <= ac_total) {
            if (search.apply_until_feasible(all_acs, detail::ac_off)) return search.actions();
        } else if (deficit <= ac_total + charge_total) {
            for (auto& a : search.actions()) detail::ac_off(a);
            if (search.feasible() || search.apply_until_feasible(charging, detail::charge_off))
                return search.actions();
        } else if (deficit <= ac_total + charge_total + load_total) {
            const std::vector<LoadSwitches> stack = priority_stack(in.desired, deficit - ac_total - charge_total);
            for (std::size_t i = 0; i < n; ++i) {
                auto& a = search.actions()[i];
                a.u_ac = false;
                a.c = 0.0;
                a.u_loads = stack[i];
            }
            if (search.feasible()) return search.actions();
        } else {
            std::vector<ActionVector> idle(n);
            for (std::size_t i = 0; i < n; ++i) idle[i].u_mode = base[i].u_mode;
            return idle;
        }
    }

    // The bookkeeping above is an estimate (battery output follows house
    // demand); keep escalating along the same ladder until feasible.
    if (search.apply_until_feasible(all_acs, detail::ac_off)) return search.actions();
    if (search.apply_until_feasible(charging, detail::charge_off)) return search.actions();
    search.shed_loads_until_feasible();
    return search.actions();
}

// ---------------------------------------------------------------------------
// Plug-in contract

/// A control policy. Implementations may keep memory between calls; `reset`
/// is invoked at the start of every episode.
class Controller {
public:
    virtual ~Controller() = default;
    virtual std::vector<ActionVector> decide(const ControllerInput& in) = 0;
    virtual void reset() {}
};

class BaselineController final : public Controller {
public:
    std::vector<ActionVector> decide(const ControllerInput& in) override { return baseline_step(in); }
};

class RuleBasedController final : public Controller {
public:
    std::vector<ActionVector> decide(const ControllerInput& in) override { return rule_based_step(in); }
};

/// Name -> factory map. Built-ins: "baseline", "rulebased".
class ControllerRegistry {
public:
    using Factory = std::function<std::unique_ptr<Controller>()>;

    static ControllerRegistry& instance()
    {
        static ControllerRegistry registry;
        return registry;
    }

    void add(const std::string& name, Factory factory)
    {
        std::lock_guard lock(mutex_);
        factories_[name] = std::move(factory);
    }

    bool contains(const std::string& name) const
    {
        std::lock_guard lock(mutex_);
        return factories_.count(name) != 0;
    }

    std::unique_ptr<Controller> create(const std::string& name) const
    {
        std::lock_guard lock(mutex_);
        auto it = factories_.find(name);
        if (it == factories_.end()) throw ValidationError(fmt::format("unknown controller '{}'", name));
        return it->second();
    }

    std::vector<std::string> names() const
    {
        std::lock_guard lock(mutex_);
        std::vector<std::string> out;
        for (const auto& [k, v] : factories_) out.push_back(k);
        return out;
    }

private:
    ControllerRegistry()
    {
        factories_["baseline"] = [] { return std::make_unique<BaselineController>(); };
        factories_["rulebased"] = [] { return std::make_unique<RuleBasedController>(); };
    }

    mutable std::mutex mutex_;
    std::map<std::string, Factory> factories_;
};

}  // namespace hemsim
