#include "hemsim/scenario_config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace hemsim {

// ---------------------------------------------------------------------------
// YAML reading

namespace {

void check_keys(const YAML::Node& node, std::string_view ctx, std::initializer_list<std::string_view> allowed)
{
    if (!node.IsMap()) throw ParseError(fmt::format("{}: expected a mapping", ctx));
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ParseError(fmt::format("{}: unknown key '{}'", ctx, key));
    }
}

template <typename T>
void read(const YAML::Node& node, std::string_view key, T& out, std::string_view ctx)
{
    const YAML::Node v = node[std::string(key)];
    if (!v) return;
    try {
        out = v.as<T>();
    } catch (const YAML::Exception&) {
        throw ParseError(fmt::format("{}.{}: cannot convert '{}'", ctx, key, YAML::Dump(v)));
    }
}

template <typename T, typename Conv>
void read_enum(const YAML::Node& node, std::string_view key, T& out, std::string_view ctx, Conv conv)
{
    std::string s;
    read(node, key, s, ctx);
    if (s.empty()) return;
    std::string low = s;
    std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return std::tolower(c); });
    auto v = conv(low);
    if (!v) throw ParseError(fmt::format("{}.{}: unknown value '{}'", ctx, key, s));
    out = *v;
}

void read_thermal(const YAML::Node& n, ThermalParams& p, const std::string& ctx)
{
    if (!n) return;
    check_keys(n, ctx, {"a", "d", "cop", "p_ac_rated", "heat_gain"});
    read(n, "a", p.a, ctx);
    read(n, "d", p.d, ctx);
    read(n, "cop", p.cop, ctx);
    read(n, "p_ac_rated", p.p_ac_rated, ctx);
    read(n, "heat_gain", p.heat_gain, ctx);
}

void read_pv(const YAML::Node& n, PvParams& p, const std::string& ctx)
{
    if (!n) return;
    check_keys(n, ctx,
               {"n_panels", "p_panel_rated", "gamma_pct_per_degC", "g_std", "t_std", "u0", "u1",
                "faiman_paper_literal"});
    read(n, "n_panels", p.n_panels, ctx);
    read(n, "p_panel_rated", p.p_panel_rated, ctx);
    read(n, "gamma_pct_per_degC", p.gamma_pct_per_degC, ctx);
    read(n, "g_std", p.g_std, ctx);
    read(n, "t_std", p.t_std, ctx);
    read(n, "u0", p.u0, ctx);
    read(n, "u1", p.u1, ctx);
    read(n, "faiman_paper_literal", p.faiman_paper_literal, ctx);
}

void read_battery(const YAML::Node& n, BatteryParams& p, double dt_hours, const std::string& ctx)
{
    if (!n) return;
    check_keys(n, ctx,
               {"e_max", "e_min", "e_charge_cap", "e_discharge_cap", "p_charge_kw", "p_discharge_kw", "eta_c",
                "eta_d"});
    read(n, "e_max", p.e_max, ctx);
    read(n, "e_min", p.e_min, ctx);
    double kw = 0.0;
    if (n["p_charge_kw"]) {
        read(n, "p_charge_kw", kw, ctx);
        p.e_charge_cap = kw * dt_hours;
    }
    if (n["p_discharge_kw"]) {
        read(n, "p_discharge_kw", kw, ctx);
        p.e_discharge_cap = kw * dt_hours;
    }
    read(n, "e_charge_cap", p.e_charge_cap, ctx);
    read(n, "e_discharge_cap", p.e_discharge_cap, ctx);
    read(n, "eta_c", p.eta_c, ctx);
    read(n, "eta_d", p.eta_d, ctx);
}

void read_thermostat(const YAML::Node& n, ThermostatParams& p, const std::string& ctx)
{
    if (!n) return;
    check_keys(n, ctx, {"t_ac_low", "t_ac_high", "t_mode_low", "t_mode_high", "paper_literal_mode"});
    read(n, "t_ac_low", p.t_ac_low, ctx);
    read(n, "t_ac_high", p.t_ac_high, ctx);
    read(n, "t_mode_low", p.t_mode_low, ctx);
    read(n, "t_mode_high", p.t_mode_high, ctx);
    read(n, "paper_literal_mode", p.paper_literal_mode, ctx);
}

void read_synthetic(const YAML::Node& n, SyntheticSpec& s)
{
    const std::string ctx = "disturbances.synthetic";
    check_keys(n, ctx,
               {"days", "peak_ghi", "t_mean", "t_range", "wind_mean", "sunrise_hour", "sunset_hour", "cloudiness",
                "mean_kw", "load_sigma", "night_factor", "evening_factor", "profiles", "start", "seed"});
    read(n, "days", s.days, ctx);
    read(n, "peak_ghi", s.peak_ghi, ctx);
    read(n, "t_mean", s.t_mean, ctx);
    read(n, "t_range", s.t_range, ctx);
    read(n, "wind_mean", s.wind_mean, ctx);
    read(n, "sunrise_hour", s.sunrise_hour, ctx);
    read(n, "sunset_hour", s.sunset_hour, ctx);
    read(n, "cloudiness", s.cloudiness, ctx);
    if (n["mean_kw"]) {
        std::vector<double> v;
        read(n, "mean_kw", v, ctx);
        if (v.size() != kPriorities) throw ParseError(ctx + ".mean_kw: expected 8 values (P1..P8)");
        std::copy(v.begin(), v.end(), s.mean_kw.begin());
    }
    read(n, "load_sigma", s.load_sigma, ctx);
    read(n, "night_factor", s.night_factor, ctx);
    read(n, "evening_factor", s.evening_factor, ctx);
    read(n, "profiles", s.profiles, ctx);
    read(n, "start", s.start, ctx);
    read(n, "seed", s.seed, ctx);
}

std::string resolve_path(const std::string& p, const std::filesystem::path& base)
{
    if (p.empty()) return p;
    std::filesystem::path path(p);
    if (path.is_relative()) path = base / path;
    return std::filesystem::absolute(path).lexically_normal().string();
}

}  // namespace

/// Parses scenario YAML text. Relative data paths resolve against `base_dir`.
ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ParseError(fmt::format("scenario: {}", e.what()));
    }
    if (!root || !root.IsMap()) throw ParseError("scenario: top level must be a mapping");
    check_keys(root, "scenario",
                       {"name", "grid_mode", "controller", "plugin", "startup", "dt_hours", "dt_minutes",
                        "horizon_steps", "defaults", "houses", "disturbances"});

    ScenarioConfig s;
    read(root, "name", s.name, "scenario");
    read_enum(root, "grid_mode", s.grid, "scenario", grid_mode_from_string);
    read_enum(root, "controller", s.controller, "scenario", [](std::string_view v) {
        std::optional<ControllerKind> k;
        if (v == "baseline") k = ControllerKind::Baseline;
        if (v == "rulebased" || v == "rule_based") k = ControllerKind::RuleBased;
        if (v == "external") k = ControllerKind::External;
        return k;
    });
    read(root, "plugin", s.plugin, "scenario");
    if (root["dt_minutes"]) {
        double minutes = 0.0;
        read(root, "dt_minutes", minutes, "scenario");
        s.dt_hours = minutes / 60.0;
    }
    read(root, "dt_hours", s.dt_hours, "scenario");
    read(root, "horizon_steps", s.horizon_steps, "scenario");

    if (const auto st = root["startup"]) {
        check_keys(st, "startup", {"mode", "alpha_v", "alpha_i"});
        read_enum(st, "mode", s.startup.mode, "startup", startup_mode_from_string);
        read(st, "alpha_v", s.startup.alpha_v, "startup");
        read(st, "alpha_i", s.startup.alpha_i, "startup");
    }

    const ParameterBundle dflt = default_parameters(s.dt_hours);
    ThermalParams thermal = dflt.thermal;
    PvParams pv = dflt.pv;
    BatteryParams battery = dflt.battery;
    ThermostatParams thermostat = dflt.thermostat;
    if (const auto d = root["defaults"]) {
        check_keys(d, "defaults", {"thermal", "pv", "battery", "thermostat"});
        read_thermal(d["thermal"], thermal, "defaults.thermal");
        read_pv(d["pv"], pv, "defaults.pv");
        read_battery(d["battery"], battery, s.dt_hours, "defaults.battery");
        read_thermostat(d["thermostat"], thermostat, "defaults.thermostat");
    }

    const auto houses = root["houses"];
    if (!houses || !houses.IsSequence()) throw ParseError("scenario.houses: expected a list");
    for (std::size_t i = 0; i < houses.size(); ++i) {
        const YAML::Node hn = houses[i];
        const std::string ctx = fmt::format("houses[{}]", i);
        check_keys(hn, ctx, {"id", "der", "data_id", "thermal", "pv", "battery", "thermostat", "initial"});
        HouseConfig h;
        read(hn, "id", h.id, ctx);
        std::string der;
        read(hn, "der", der, ctx);
        const auto cls = der_class_from_string(der);
        if (!cls) throw ParseError(fmt::format("{}.der: unknown DER class '{}'", ctx, der));
        h.der = *cls;
        read(hn, "data_id", h.data_id, ctx);
        h.thermal = thermal;
        h.thermostat = thermostat;
        read_thermal(hn["thermal"], h.thermal, ctx + ".thermal");
        read_thermostat(hn["thermostat"], h.thermostat, ctx + ".thermostat");
        if (has_pv(h.der) || hn["pv"]) {
            h.pv = pv;
            read_pv(hn["pv"], *h.pv, ctx + ".pv");
        }
        if (has_battery(h.der) || hn["battery"]) {
            h.battery = battery;
            read_battery(hn["battery"], *h.battery, s.dt_hours, ctx + ".battery");
            h.initial_e_bat = h.battery->e_min + 0.5 * (h.battery->e_max - h.battery->e_min);
        }
        if (const auto init = hn["initial"]) {
            check_keys(init, ctx + ".initial", {"t_house", "e_bat"});
            read(init, "t_house", h.initial_t_house, ctx + ".initial");
            read(init, "e_bat", h.initial_e_bat, ctx + ".initial");
        }
        s.houses.push_back(std::move(h));
    }

    if (const auto d = root["disturbances"]) {
        check_keys(d, "disturbances", {"synthetic", "weather", "loads", "circuit_map", "allow_upsample"});
        if (d["synthetic"]) {
            s.disturbances.synthetic = SyntheticSpec{};
            read_synthetic(d["synthetic"], *s.disturbances.synthetic);
        }
        read(d, "weather", s.disturbances.weather_path, "disturbances");
        read(d, "loads", s.disturbances.loads_path, "disturbances");
        read(d, "circuit_map", s.disturbances.circuit_map_path, "disturbances");
        read(d, "allow_upsample", s.disturbances.allow_upsample, "disturbances");
        s.disturbances.weather_path = resolve_path(s.disturbances.weather_path, base_dir);
        s.disturbances.loads_path = resolve_path(s.disturbances.loads_path, base_dir);
        s.disturbances.circuit_map_path = resolve_path(s.disturbances.circuit_map_path, base_dir);
    }

    validate(s);
    return s;
}

ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(fmt::format("scenario file not found: {}", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------
// YAML writing

std::string to_yaml(const ScenarioConfig& s)
{
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << s.name;
    out << YAML::Key << "grid_mode" << YAML::Value << std::string(to_string(s.grid));
    out << YAML::Key << "controller" << YAML::Value << std::string(to_string(s.controller));
    if (!s.plugin.empty()) out << YAML::Key << "plugin" << YAML::Value << s.plugin;
    out << YAML::Key << "dt_hours" << YAML::Value << s.dt_hours;
    out << YAML::Key << "horizon_steps" << YAML::Value << s.horizon_steps;
    out << YAML::Key << "startup" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "mode" << YAML::Value << std::string(to_string(s.startup.mode));
    out << YAML::Key << "alpha_v" << YAML::Value << s.startup.alpha_v;
    out << YAML::Key << "alpha_i" << YAML::Value << s.startup.alpha_i;
    out << YAML::EndMap;

    out << YAML::Key << "houses" << YAML::Value << YAML::BeginSeq;
    for (const auto& h : s.houses) {
        out << YAML::BeginMap;
        out << YAML::Key << "id" << YAML::Value << h.id;
        out << YAML::Key << "der" << YAML::Value << std::string(to_string(h.der));
        if (!h.data_id.empty()) out << YAML::Key << "data_id" << YAML::Value << h.data_id;
        out << YAML::Key << "thermal" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "a" << YAML::Value << h.thermal.a;
        out << YAML::Key << "d" << YAML::Value << h.thermal.d;
        out << YAML::Key << "cop" << YAML::Value << h.thermal.cop;
        out << YAML::Key << "p_ac_rated" << YAML::Value << h.thermal.p_ac_rated;
        out << YAML::Key << "heat_gain" << YAML::Value << h.thermal.heat_gain;
        out << YAML::EndMap;
        if (h.pv) {
            const auto& p = *h.pv;
            out << YAML::Key << "pv" << YAML::Value << YAML::BeginMap;
            out << YAML::Key << "n_panels" << YAML::Value << p.n_panels;
            out << YAML::Key << "p_panel_rated" << YAML::Value << p.p_panel_rated;
            out << YAML::Key << "gamma_pct_per_degC" << YAML::Value << p.gamma_pct_per_degC;
            out << YAML::Key << "g_std" << YAML::Value << p.g_std;
            out << YAML::Key << "t_std" << YAML::Value << p.t_std;
            out << YAML::Key << "u0" << YAML::Value << p.u0;
            out << YAML::Key << "u1" << YAML::Value << p.u1;
            out << YAML::Key << "faiman_paper_literal" << YAML::Value << p.faiman_paper_literal;
            out << YAML::EndMap;
        }
        if (h.battery) {
            const auto& b = *h.battery;
            out << YAML::Key << "battery" << YAML::Value << YAML::BeginMap;
            out << YAML::Key << "e_max" << YAML::Value << b.e_max;
            out << YAML::Key << "e_min" << YAML::Value << b.e_min;
            out << YAML::Key << "e_charge_cap" << YAML::Value << b.e_charge_cap;
            out << YAML::Key << "e_discharge_cap" << YAML::Value << b.e_discharge_cap;
            out << YAML::Key << "eta_c" << YAML::Value << b.eta_c;
            out << YAML::Key << "eta_d" << YAML::Value << b.eta_d;
            out << YAML::EndMap;
        }
        out << YAML::Key << "thermostat" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "t_ac_low" << YAML::Value << h.thermostat.t_ac_low;
        out << YAML::Key << "t_ac_high" << YAML::Value << h.thermostat.t_ac_high;
        out << YAML::Key << "t_mode_low" << YAML::Value << h.thermostat.t_mode_low;
        out << YAML::Key << "t_mode_high" << YAML::Value << h.thermostat.t_mode_high;
        out << YAML::Key << "paper_literal_mode" << YAML::Value << h.thermostat.paper_literal_mode;
        out << YAML::EndMap;
        out << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "t_house" << YAML::Value << h.initial_t_house;
        if (h.battery) out << YAML::Key << "e_bat" << YAML::Value << h.initial_e_bat;
        out << YAML::EndMap;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    const auto& d = s.disturbances;
    out << YAML::Key << "disturbances" << YAML::Value << YAML::BeginMap;
    if (d.synthetic) {
        const auto& y = *d.synthetic;
        out << YAML::Key << "synthetic" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "days" << YAML::Value << y.days;
        out << YAML::Key << "peak_ghi" << YAML::Value << y.peak_ghi;
        out << YAML::Key << "t_mean" << YAML::Value << y.t_mean;
        out << YAML::Key << "t_range" << YAML::Value << y.t_range;
        out << YAML::Key << "wind_mean" << YAML::Value << y.wind_mean;
        out << YAML::Key << "sunrise_hour" << YAML::Value << y.sunrise_hour;
        out << YAML::Key << "sunset_hour" << YAML::Value << y.sunset_hour;
        out << YAML::Key << "cloudiness" << YAML::Value << y.cloudiness;
        out << YAML::Key << "mean_kw" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (double v : y.mean_kw) out << v;
        out << YAML::EndSeq;
        out << YAML::Key << "load_sigma" << YAML::Value << y.load_sigma;
        out << YAML::Key << "night_factor" << YAML::Value << y.night_factor;
        out << YAML::Key << "evening_factor" << YAML::Value << y.evening_factor;
        out << YAML::Key << "profiles" << YAML::Value << y.profiles;
        out << YAML::Key << "start" << YAML::Value << y.start;
        out << YAML::Key << "seed" << YAML::Value << y.seed;
        out << YAML::EndMap;
    }
    if (!d.weather_path.empty()) out << YAML::Key << "weather" << YAML::Value << d.weather_path;
    if (!d.loads_path.empty()) out << YAML::Key << "loads" << YAML::Value << d.loads_path;
    if (!d.circuit_map_path.empty()) out << YAML::Key << "circuit_map" << YAML::Value << d.circuit_map_path;
    out << YAML::Key << "allow_upsample" << YAML::Value << d.allow_upsample;
    out << YAML::EndMap;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace hemsim
