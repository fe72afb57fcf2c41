#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "hemsim/error.hpp"

namespace hemsim {

enum class DerClass { PvAndBattery, BatteryOnly, PvOnly, NoDer };
enum class GridMode { OffGrid, OnGrid };
enum class StartupMode { WACSC, WOACSC };

constexpr bool has_pv(DerClass c) { return c == DerClass::PvAndBattery || c == DerClass::PvOnly; }
constexpr bool has_battery(DerClass c) { return c == DerClass::PvAndBattery || c == DerClass::BatteryOnly; }

inline std::string_view to_string(DerClass c)
{
    switch (c) {
    case DerClass::PvAndBattery: return "pv_battery";
    case DerClass::BatteryOnly: return "battery";
    case DerClass::PvOnly: return "pv";
    case DerClass::NoDer: return "none";
    }
    return "?";
}

inline std::string_view to_string(GridMode m) { return m == GridMode::OffGrid ? "off_grid" : "on_grid"; }
inline std::string_view to_string(StartupMode m) { return m == StartupMode::WACSC ? "wacsc" : "woacsc"; }

inline std::optional<DerClass> der_class_from_string(std::string_view s)
{
    if (s == "pv_battery" || s == "pv+bat") return DerClass::PvAndBattery;
    if (s == "battery" || s == "bat") return DerClass::BatteryOnly;
    if (s == "pv") return DerClass::PvOnly;
    if (s == "none" || s == "no_der") return DerClass::NoDer;
    return std::nullopt;
}

inline std::optional<GridMode> grid_mode_from_string(std::string_view s)
{
    if (s == "off_grid" || s == "off") return GridMode::OffGrid;
    if (s == "on_grid" || s == "on") return GridMode::OnGrid;
    return std::nullopt;
}

inline std::optional<StartupMode> startup_mode_from_string(std::string_view s)
{
    if (s == "wacsc") return StartupMode::WACSC;
    if (s == "woacsc") return StartupMode::WOACSC;
    return std::nullopt;
}

/// First-order house thermal model coefficients.
///
/// T(k+1) = a*T(k) + u_ac*u_mode*heat_gain*cop*p_ac_rated + d*T_am(k).
/// heat_gain = 1 gives the bare form where the thermal power enters directly
/// as a per-step temperature increment.
struct ThermalParams {
    double a = std::exp(-(1.0 / 6.0) / 3.0);
    double d = 1.0 - std::exp(-(1.0 / 6.0) / 3.0);
    double cop = 3.0;
    double p_ac_rated = 3.0;  // kW
    double heat_gain = (1.0 - std::exp(-(1.0 / 6.0) / 3.0)) * 1.5;  // °C per kW thermal per step

    double q_ac() const { return cop * p_ac_rated; }
    bool operator==(const ThermalParams&) const = default;
};

struct PvParams {
    int n_panels = 31;
    double p_panel_rated = 0.325;      // kW
    double gamma_pct_per_degC = -0.35;
    double g_std = 1000.0;             // W/m²
    double t_std = 25.0;               // °C
    double u0 = 25.0;                  // W/m²·°C
    double u1 = 6.84;                  // W·s/m³·°C
    bool faiman_paper_literal = false; // U0 + U1 + Ws instead of U0 + U1*Ws

    double rated_kw() const { return n_panels * p_panel_rated; }
    bool operator==(const PvParams&) const = default;
};

/// Energy-bucket battery. Caps are per simulation step.
struct BatteryParams {
    double e_max = 13.5;                   // kWh
    double e_min = 0.0;                    // kWh
    double e_charge_cap = 5.0 / 6.0;       // kWh per step
    double e_discharge_cap = 7.0 / 6.0;    // kWh per step
    double eta_c = 0.95;
    double eta_d = 0.95;

    bool operator==(const BatteryParams&) const = default;
};

struct ThermostatParams {
    double t_ac_low = 23.0;
    double t_ac_high = 25.0;
    double t_mode_low = 18.0;
    double t_mode_high = 30.0;
    bool paper_literal_mode = false;  // cool at T <= t_mode_low, heat at T >= t_mode_high

    bool operator==(const ThermostatParams&) const = default;
};

struct StartupParams {
    double alpha_v = 0.3;
    double alpha_i = 5.0;
    StartupMode mode = StartupMode::WACSC;

    bool operator==(const StartupParams&) const = default;
};

/// One house of a community. Device blocks are present exactly when the DER
/// class has that device.
struct HouseConfig {
    std::string id;
    DerClass der = DerClass::NoDer;
    ThermalParams thermal;
    std::optional<PvParams> pv;
    std::optional<BatteryParams> battery;
    ThermostatParams thermostat;
    double initial_t_house = 24.0;  // °C
    double initial_e_bat = 0.0;     // kWh, ignored without battery
    std::string data_id;            // load-profile key; empty means the house id

    bool operator==(const HouseConfig&) const = default;
};

/// Case-study parameter set for a given step length.
struct ParameterBundle {
    double dt_hours = 1.0 / 6.0;
    ThermalParams thermal;
    PvParams pv;
    BatteryParams battery;
    ThermostatParams thermostat;
    StartupParams startup;
};

inline ParameterBundle default_parameters(double dt_hours = 1.0 / 6.0)
{
    ParameterBundle b;
    b.dt_hours = dt_hours;
    const double a = std::exp(-dt_hours / 3.0);
    b.thermal.a = a;
    b.thermal.d = 1.0 - a;
    b.thermal.heat_gain = (1.0 - a) * 1.5;
    b.battery.e_charge_cap = 5.0 * dt_hours;
    b.battery.e_discharge_cap = 7.0 * dt_hours;
    return b;
}

namespace detail {
inline void require(bool ok, std::string_view ctx, std::string_view what)
{
    if (!ok) throw ValidationError(fmt::format("{}: {} violated", ctx, what));
}
}  // namespace detail

inline void validate(const ThermalParams& p, std::string_view ctx)
{
    detail::require(p.a > 0.0 && p.a <= 1.0, ctx, "thermal.a in (0, 1]");
    detail::require(p.d >= 0.0, ctx, "thermal.d >= 0");
    detail::require(p.cop > 0.0, ctx, "thermal.cop > 0");
    detail::require(p.p_ac_rated > 0.0, ctx, "thermal.p_ac_rated > 0");
    detail::require(p.heat_gain >= 0.0, ctx, "thermal.heat_gain >= 0");
}

inline void validate(const PvParams& p, std::string_view ctx)
{
    detail::require(p.n_panels >= 0, ctx, "pv.n_panels >= 0");
    detail::require(p.p_panel_rated > 0.0, ctx, "pv.p_panel_rated > 0");
    detail::require(p.g_std > 0.0, ctx, "pv.g_std > 0");
    detail::require(p.u0 > 0.0, ctx, "pv.u0 > 0");
    detail::require(p.u1 >= 0.0, ctx, "pv.u1 >= 0");
}

inline void validate(const BatteryParams& p, std::string_view ctx)
{
    detail::require(p.e_min >= 0.0, ctx, "battery.e_min >= 0");
    detail::require(p.e_min < p.e_max, ctx, "battery.e_min < battery.e_max");
    detail::require(p.e_charge_cap > 0.0, ctx, "battery.e_charge_cap > 0");
    detail::require(p.e_discharge_cap > 0.0, ctx, "battery.e_discharge_cap > 0");
    detail::require(p.eta_c > 0.0 && p.eta_c <= 1.0, ctx, "battery.eta_c in (0, 1]");
    detail::require(p.eta_d > 0.0 && p.eta_d <= 1.0, ctx, "battery.eta_d in (0, 1]");
}

inline void validate(const ThermostatParams& p, std::string_view ctx)
{
    detail::require(p.t_mode_low < p.t_ac_low, ctx, "t_mode_low < t_ac_low");
    detail::require(p.t_ac_low < p.t_ac_high, ctx, "t_ac_low < t_ac_high");
    detail::require(p.t_ac_high < p.t_mode_high, ctx, "t_ac_high < t_mode_high");
}

inline void validate(const StartupParams& p, std::string_view ctx)
{
    detail::require(p.alpha_v >= 0.0 && p.alpha_v < 1.0, ctx, "startup.alpha_v in [0, 1)");
    detail::require(p.alpha_i >= 3.0 && p.alpha_i <= 8.0, ctx, "startup.alpha_i in [3, 8]");
}

}  // namespace hemsim
