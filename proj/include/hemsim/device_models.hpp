#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "hemsim/error.hpp"
#include "hemsim/params.hpp"

namespace hemsim {

inline constexpr std::size_t kPriorities = 8;

/// Per-priority energies P1..P8, kWh per step.
using LoadVector = std::array<double, kPriorities>;
using LoadSwitches = std::array<bool, kPriorities>;

enum class AcMode : int { Cool = -1, Heat = +1 };

struct HouseState {
    double t_house = 24.0;  // °C
    double e_bat = 0.0;     // kWh
    bool u_ac_prev = false;
    AcMode u_mode_prev = AcMode::Cool;

    bool operator==(const HouseState&) const = default;
};

struct ActionVector {
    bool u_ac = false;
    AcMode u_mode = AcMode::Cool;
    double u_pv = 0.0;
    double c = 0.0;
    double d = 0.0;
    LoadSwitches u_loads{};

    bool operator==(const ActionVector&) const = default;
};

struct DeviceEnergies {
    double e_pv = 0.0;
    double e_pv_potential = 0.0;
    double e_bat_c = 0.0;
    double e_bat_d = 0.0;
    double e_ac = 0.0;
    LoadVector e_loads{};
    double e_load_total = 0.0;
    double e_house_demand_d2 = 0.0;  // loads + AC
    double e_mismatch = 0.0;         // |e_pv - e_house_demand_d2|

    double generation() const { return e_pv + e_bat_d; }
    double demand() const { return e_ac + e_bat_c + e_load_total; }
    bool operator==(const DeviceEnergies&) const = default;
};

inline double sum(const LoadVector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// ---------------------------------------------------------------------------
// Thermal

inline double thermal_step(const HouseState& state, bool u_ac, AcMode u_mode, double t_ambient,
                           const ThermalParams& p)
{
    const double hvac = u_ac ? static_cast<int>(u_mode) * p.heat_gain * p.q_ac() : 0.0;
    return p.a * state.t_house + hvac + p.d * t_ambient;
}

// ---------------------------------------------------------------------------
// PV

/// Faiman module temperature, °C.
inline double module_temperature(double ghi, double t_ambient, double wind, const PvParams& p)
{
    const double u = p.faiman_paper_literal ? p.u0 + p.u1 + wind : p.u0 + p.u1 * wind;
    return t_ambient + ghi / u;
}

/// Available PV energy over one step at full output, kWh. Never negative.
inline double pv_potential(double ghi, double t_ambient, double wind, const PvParams& p, double dt_hours)
{
    if (ghi <= 0.0 || p.n_panels == 0) return 0.0;
    const double t_m = module_temperature(ghi, t_ambient, wind, p);
    const double derate = 1.0 + p.gamma_pct_per_degC / 100.0 * (t_m - p.t_std);
    const double e = p.n_panels * p.p_panel_rated * (ghi / p.g_std) * derate * dt_hours;
    return std::max(0.0, e);
}

inline double pv_output(double u_pv, double potential)
{
    if (!(u_pv >= 0.0 && u_pv <= 1.0)) throw ActionError(fmt::format("u_pv={} outside [0, 1]", u_pv));
    return u_pv * potential;
}

// ---------------------------------------------------------------------------
// Battery

struct BatteryStep {
    double e_bat_next = 0.0;
    double e_c = 0.0;
    double e_d = 0.0;
};

/// Bucket battery update. `e_mismatch` bounds both charge and discharge; pass
/// +infinity to drop that bound (grid-backed charging).
inline BatteryStep battery_step(double e_bat, double c, double d, double e_mismatch, const BatteryParams& p)
{
    if (!(c >= 0.0 && c <= 1.0)) throw ActionError(fmt::format("battery c={} outside [0, 1]", c));
    if (!(d >= 0.0 && d <= 1.0)) throw ActionError(fmt::format("battery d={} outside [0, 1]", d));
    if (c * d != 0.0) throw ActionError("battery c*d != 0 (simultaneous charge and discharge)");
    if (!(e_mismatch >= 0.0)) throw ActionError(fmt::format("battery mismatch {} < 0", e_mismatch));
    constexpr double kSlack = 1e-9;
    if (e_bat < p.e_min - kSlack || e_bat > p.e_max + kSlack)
        throw Error(fmt::format("battery state {} outside [{}, {}]", e_bat, p.e_min, p.e_max));
    e_bat = std::clamp(e_bat, p.e_min, p.e_max);

    BatteryStep r;
    r.e_c = c * std::min({(p.e_max - e_bat) / p.eta_c, p.e_charge_cap, e_mismatch});
    r.e_d = d * std::min({(e_bat - p.e_min) * p.eta_d, p.e_discharge_cap, e_mismatch});
    r.e_bat_next = std::clamp(e_bat + p.eta_c * r.e_c - r.e_d / p.eta_d, p.e_min, p.e_max);
    return r;
}

/// State after delivering already-sized charge/discharge energies.
inline double battery_advance(double e_bat, double e_c, double e_d, const BatteryParams& p)
{
    return std::clamp(e_bat + p.eta_c * e_c - e_d / p.eta_d, p.e_min, p.e_max);
}

// ---------------------------------------------------------------------------
// Loads

inline double ac_energy(bool u_ac, double p_ac_rated, double dt_hours) { return u_ac ? p_ac_rated * dt_hours : 0.0; }

struct LoadEnergy {
    LoadVector served{};
    double total = 0.0;
};

inline LoadEnergy load_energy(const LoadSwitches& u, const LoadVector& desired)
{
    LoadEnergy r;
    for (std::size_t j = 0; j < kPriorities; ++j) {
        r.served[j] = u[j] ? desired[j] : 0.0;
        r.total += r.served[j];
    }
    return r;
}

/// Locked-rotor startup power of an AC compressor, kW.
inline double ac_startup_power(const StartupParams& p, double p_ac_rated)
{
    return (1.0 - p.alpha_v) * p.alpha_i * p_ac_rated;
}

// ---------------------------------------------------------------------------
// House composition

struct HouseStepEnergies {
    DeviceEnergies energies;
    double e_bat_next = 0.0;
};

/// Candidate energies of one house for one step under `action`.
///
/// The battery mismatch bound is |e_pv - e_d2| with e_pv the commanded PV
/// output; charging on-grid is unbounded by it.
inline HouseStepEnergies house_energies(const HouseConfig& house, const HouseState& state, const ActionVector& a,
                                        double pv_potential_kwh, const LoadVector& desired, GridMode grid,
                                        double dt_hours)
{
    HouseStepEnergies out;
    DeviceEnergies& e = out.energies;
    e.e_pv_potential = house.pv ? pv_potential_kwh : 0.0;
    e.e_pv = house.pv ? pv_output(a.u_pv, e.e_pv_potential) : 0.0;
    e.e_ac = ac_energy(a.u_ac, house.thermal.p_ac_rated, dt_hours);
    const LoadEnergy loads = load_energy(a.u_loads, desired);
    e.e_loads = loads.served;
    e.e_load_total = loads.total;
    e.e_house_demand_d2 = e.e_load_total + e.e_ac;
    e.e_mismatch = std::abs(e.e_pv - e.e_house_demand_d2);
    out.e_bat_next = state.e_bat;
    if (house.battery) {
        const double bound =
            (grid == GridMode::OnGrid && a.c > 0.0) ? std::numeric_limits<double>::infinity() : e.e_mismatch;
        const BatteryStep b = battery_step(state.e_bat, a.c, a.d, bound, *house.battery);
        e.e_bat_c = b.e_c;
        e.e_bat_d = b.e_d;
        out.e_bat_next = b.e_bat_next;
    }
    return out;
}

}  // namespace hemsim
