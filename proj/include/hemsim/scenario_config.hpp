#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hemsim/device_models.hpp"
#include "hemsim/error.hpp"
#include "hemsim/params.hpp"

namespace hemsim {

enum class ControllerKind { Baseline, RuleBased, External };

inline std::string_view to_string(ControllerKind k)
{
    switch (k) {
    case ControllerKind::Baseline: return "baseline";
    case ControllerKind::RuleBased: return "rulebased";
    case ControllerKind::External: return "external";
    }
    return "?";
}

/// Seeded synthetic weather and load generator settings.
struct SyntheticSpec {
    int days = 7;
    double peak_ghi = 900.0;       // W/m²
    double t_mean = 28.0;          // °C
    double t_range = 10.0;         // °C, peak to trough
    double wind_mean = 3.0;        // m/s
    double sunrise_hour = 6.5;
    double sunset_hour = 19.5;
    double cloudiness = 0.3;       // 0 = clear sky every day
    LoadVector mean_kw{0.15, 0.10, 0.12, 0.10, 0.15, 0.12, 0.20, 0.25};
    double load_sigma = 0.35;      // lognormal shape
    double night_factor = 0.6;     // 00:00-06:00
    double evening_factor = 1.4;   // 17:00-22:00
    int profiles = 0;              // independent load profiles; 0 = one per house
    std::string start = "2017-09-11T00:00:00";
    std::uint64_t seed = 0;

    bool operator==(const SyntheticSpec&) const = default;
};

struct DisturbanceSource {
    std::optional<SyntheticSpec> synthetic;
    std::string weather_path;
    std::string loads_path;
    std::string circuit_map_path;  // empty: built-in mapping
    bool allow_upsample = false;

    bool operator==(const DisturbanceSource&) const = default;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::vector<HouseConfig> houses;
    GridMode grid = GridMode::OffGrid;
    ControllerKind controller = ControllerKind::Baseline;
    std::string plugin;  // registry name for External; empty means actions come from the caller
    StartupParams startup;
    double dt_hours = 1.0 / 6.0;
    std::size_t horizon_steps = 1008;
    DisturbanceSource disturbances;

    bool operator==(const ScenarioConfig&) const = default;
};

/// House with case-study defaults for its DER class.
inline HouseConfig make_house(std::string id, DerClass der, double dt_hours = 1.0 / 6.0)
{
    const ParameterBundle b = default_parameters(dt_hours);
    HouseConfig h;
    h.id = std::move(id);
    h.der = der;
    h.thermal = b.thermal;
    h.thermostat = b.thermostat;
    if (has_pv(der)) h.pv = b.pv;
    if (has_battery(der)) {
        h.battery = b.battery;
        h.initial_e_bat = b.battery.e_min + 0.5 * (b.battery.e_max - b.battery.e_min);
    }
    return h;
}

/// Checks every invariant; the message names the first violated field.
inline void validate(const ScenarioConfig& s)
{
    if (s.horizon_steps < 1) throw ValidationError("horizon_steps >= 1 violated");
    if (!(s.dt_hours > 0.0)) throw ValidationError("dt_hours > 0 violated");
    if (s.houses.empty()) throw ValidationError("houses: at least one house required");
    validate(s.startup, "startup");
    if (s.controller == ControllerKind::RuleBased && s.grid != GridMode::OffGrid)
        throw ValidationError("controller rulebased requires grid_mode off_grid");

    std::set<std::string> ids;
    for (const auto& h : s.houses) {
        const std::string ctx = fmt::format("house '{}'", h.id);
        if (h.id.empty()) throw ValidationError("house id must be non-empty");
        if (!ids.insert(h.id).second) throw ValidationError(fmt::format("{}: duplicate house id", ctx));
        validate(h.thermal, ctx);
        validate(h.thermostat, ctx);
        if (has_pv(h.der) != h.pv.has_value())
            throw ValidationError(fmt::format("{}: pv block {} for der class {}", ctx,
                                              h.pv ? "given" : "missing", to_string(h.der)));
        if (has_battery(h.der) != h.battery.has_value())
            throw ValidationError(fmt::format("{}: battery block {} for der class {}", ctx,
                                              h.battery ? "given" : "missing", to_string(h.der)));
        if (h.pv) validate(*h.pv, ctx);
        if (h.battery) {
            validate(*h.battery, ctx);
            if (h.initial_e_bat < h.battery->e_min || h.initial_e_bat > h.battery->e_max)
                throw ValidationError(fmt::format("{}: initial.e_bat in [e_min, e_max] violated", ctx));
        }
    }

    const auto& d = s.disturbances;
    if (d.synthetic) {
        if (d.synthetic->days < 1) throw ValidationError("disturbances.synthetic.days >= 1 violated");
        if (d.synthetic->profiles < 0) throw ValidationError("disturbances.synthetic.profiles >= 0 violated");
    } else if (d.weather_path.empty() || d.loads_path.empty()) {
        throw ValidationError("disturbances: either synthetic or both weather and loads paths required");
    }
}

/// Parses scenario YAML. Unknown keys are a ParseError; relative data paths
/// resolve against `base_dir`. The result is validated.
ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir = ".");

ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Canonical, fully explicit YAML form; parse_scenario(to_yaml(s)) == s.
std::string to_yaml(const ScenarioConfig& s);

inline void save_scenario(const ScenarioConfig& s, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << to_yaml(s);
}

/// 64-bit FNV-1a of the canonical YAML form.
inline std::uint64_t scenario_digest(const ScenarioConfig& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : to_yaml(s)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace hemsim
