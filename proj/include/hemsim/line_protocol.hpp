#pragma once

// JSON-lines session over the engine: one request object per line, one
// response object per line.
//
//   {"op":"schema"}
//   {"op":"reset", "seed":0, "scenario":"path.yaml", "controller":"baseline"}
//   {"op":"step"}                                   built-in controller
//   {"op":"step", "actions":[{"u_ac":1, "u_mode":-1, "u_pv":0.5,
//                             "c":0, "d":0, "u_loads":[1,1,1,1,1,1,1,1]}, ...]}
//   {"op":"close"}
//
// Responses carry "ok":true plus payload, or "ok":false with "error". Doubles
// are written with round-trip precision; unbounded schema limits are null.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemsim/error.hpp"
#include "hemsim/scenario_config.hpp"
#include "hemsim/sim_env.hpp"

namespace hemsim {

inline constexpr int kProtocolVersion = 1;

inline nlohmann::json schema_json(std::span<const HouseConfig> houses)
{
    using nlohmann::json;
    auto bound = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json obs = json::array();
    for (const auto& s : observation_schema(houses))
        obs.push_back({{"name", s.name}, {"unit", s.unit}, {"low", bound(s.low)}, {"high", bound(s.high)}});
    json acts = json::array();
    for (const auto& h : houses) {
        acts.push_back({{"house", h.id},
                        {"der", std::string(to_string(h.der))},
                        {"u_ac", {{"type", "discrete"}, {"values", {0, 1}}}},
                        {"u_mode", {{"type", "discrete"}, {"values", {-1, 1}}}},
                        {"u_pv", {{"type", "box"}, {"low", 0.0}, {"high", h.pv ? 1.0 : 0.0}}},
                        {"c", {{"type", "box"}, {"low", 0.0}, {"high", h.battery ? 1.0 : 0.0}}},
                        {"d", {{"type", "box"}, {"low", 0.0}, {"high", h.battery ? 1.0 : 0.0}}},
                        {"u_loads", {{"type", "multi_binary"}, {"n", kPriorities}}}});
    }
    json ids = json::array();
    for (const auto& h : houses) ids.push_back(h.id);
    return {{"version", kProtocolVersion},
            {"houses", ids},
            {"observation_size", observation_size(houses.size())},
            {"observation", obs},
            {"action", acts}};
}

inline ActionVector action_from_json(const nlohmann::json& j, std::size_t house)
{
    auto fail = [&](const std::string& what) {
        throw ActionError(fmt::format("actions[{}]: {}", house, what));
    };
    if (!j.is_object()) fail("expected an object");
    ActionVector a;
    auto num = [&](const char* key, double dflt) {
        if (!j.contains(key)) return dflt;
        const auto& v = j.at(key);
        if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
        if (!v.is_number()) fail(fmt::format("{} must be a number", key));
        return v.get<double>();
    };
    const double u_ac = num("u_ac", 0.0);
    if (u_ac != 0.0 && u_ac != 1.0) fail("u_ac not in {0, 1}");
    a.u_ac = u_ac == 1.0;
    const double mode = num("u_mode", -1.0);
    if (mode != -1.0 && mode != 1.0) fail("u_mode not in {-1, +1}");
    a.u_mode = mode > 0 ? AcMode::Heat : AcMode::Cool;
    a.u_pv = num("u_pv", 0.0);
    a.c = num("c", 0.0);
    a.d = num("d", 0.0);
    if (j.contains("u_loads")) {
        const auto& l = j.at("u_loads");
        if (!l.is_array() || l.size() != kPriorities) fail("u_loads must be an array of 8");
        for (std::size_t k = 0; k < kPriorities; ++k) {
            const double v = l[k].is_boolean() ? (l[k].get<bool>() ? 1.0 : 0.0)
                                               : (l[k].is_number() ? l[k].get<double>() : -1.0);
            if (v != 0.0 && v != 1.0) fail(fmt::format("u_loads[{}] not in {{0, 1}}", k));
            a.u_loads[k] = v == 1.0;
        }
    }
    return a;
}

inline nlohmann::json action_to_json(const ActionVector& a)
{
    std::vector<int> loads;
    for (bool b : a.u_loads) loads.push_back(b ? 1 : 0);
    return {{"u_ac", a.u_ac ? 1 : 0}, {"u_mode", static_cast<int>(a.u_mode)}, {"u_pv", a.u_pv},
            {"c", a.c},               {"d", a.d},                             {"u_loads", loads}};
}

/// Compact step summary carried in the "info" field.
inline nlohmann::json record_summary(const StepRecord& r)
{
    nlohmann::json houses = nlohmann::json::array();
    for (std::size_t i = 0; i < r.energies.size(); ++i) {
        const auto& e = r.energies[i];
        houses.push_back({{"e_pv", e.e_pv},
                          {"e_bat_c", e.e_bat_c},
                          {"e_bat_d", e.e_bat_d},
                          {"e_ac", e.e_ac},
                          {"served", e.e_load_total},
                          {"desired", sum(r.desired[i])},
                          {"t_house", r.t_house[i]},
                          {"e_bat", r.e_bat[i]},
                          {"action", action_to_json(r.realized[i])}});
    }
    return {{"step", r.step},
            {"verdict", std::string(to_string(r.outcome.verdict))},
            {"reason", std::string(to_string(r.outcome.reason))},
            {"e_gen", r.balance.e_gen},
            {"e_dem", r.balance.e_dem},
            {"e_mis", r.balance.e_mis},
            {"e_grid", r.balance.e_grid},
            {"p_mis_ac", r.balance.p_mis_ac},
            {"served", r.served_total()},
            {"desired", r.desired_total()},
            {"houses", houses}};
}

class ProtocolSession {
public:
    explicit ProtocolSession(std::optional<ScenarioConfig> scenario = std::nullopt) : scenario_(std::move(scenario)) {}

    bool closed() const { return closed_; }

    /// Handles one request line and returns one response line (no newline).
    std::string handle(const std::string& line)
    {
        using nlohmann::json;
        json resp;
        try {
            const json req = json::parse(line);
            if (!req.is_object() || !req.contains("op") || !req["op"].is_string())
                throw ParseError("request must be an object with a string 'op'");
            const std::string op = req["op"];
            if (op == "schema")
                resp = on_schema(req);
            else if (op == "reset")
                resp = on_reset(req);
            else if (op == "step")
                resp = on_step(req);
            else if (op == "close") {
                closed_ = true;
                resp = {{"ok", true}};
            } else
                throw ParseError(fmt::format("unknown op '{}'", op));
        } catch (const json::exception& e) {
            resp = {{"ok", false}, {"error", fmt::format("bad request: {}", e.what())}};
        } catch (const std::exception& e) {
            resp = {{"ok", false}, {"error", e.what()}};
        }
        return resp.dump();
    }

private:
    const ScenarioConfig& scenario_or_throw(const nlohmann::json& req)
    {
        if (req.contains("scenario")) {
            scenario_ = load_scenario(req["scenario"].get<std::string>());
            env_.reset();
        }
        if (!scenario_) throw ValidationError("no scenario loaded; pass \"scenario\"");
        return *scenario_;
    }

    nlohmann::json on_schema(const nlohmann::json& req)
    {
        const auto& s = scenario_or_throw(req);
        nlohmann::json out = schema_json(s.houses);
        out["ok"] = true;
        return out;
    }

    nlohmann::json on_reset(const nlohmann::json& req)
    {
        ScenarioConfig s = scenario_or_throw(req);
        if (req.contains("controller")) {
            const std::string c = req["controller"];
            if (c == "baseline")
                s.controller = ControllerKind::Baseline;
            else if (c == "rulebased")
                s.controller = ControllerKind::RuleBased;
            else if (c == "external")
                s.controller = ControllerKind::External, s.plugin.clear();
            else {
                if (!ControllerRegistry::instance().contains(c))
                    throw ValidationError(fmt::format("unknown controller '{}'", c));
                s.controller = ControllerKind::External;
                s.plugin = c;
            }
        }
        std::optional<std::uint64_t> seed;
        if (req.contains("seed") && !req["seed"].is_null()) seed = req["seed"].get<std::uint64_t>();
        if (!env_ || !(env_->scenario() == s)) env_ = std::make_unique<Environment>(s);
        const Observation obs = env_->reset(seed);
        return {{"ok", true}, {"observation", obs}, {"step", env_->step_index()}};
    }

    nlohmann::json on_step(const nlohmann::json& req)
    {
        if (!env_) throw Error("reset() not called");
        StepResult r;
        if (req.contains("actions")) {
            const auto& a = req["actions"];
            if (!a.is_array()) throw ActionError("actions must be an array");
            std::vector<ActionVector> acts;
            for (std::size_t i = 0; i < a.size(); ++i) acts.push_back(action_from_json(a[i], i));
            r = env_->step(acts);
        } else {
            r = env_->step();
        }
        return {{"ok", true},
                {"observation", r.observation},
                {"reward", r.reward},
                {"terminated", r.terminated},
                {"truncated", r.truncated},
                {"info", record_summary(r.record)}};
    }

    std::optional<ScenarioConfig> scenario_;
    std::unique_ptr<Environment> env_;
    bool closed_ = false;
};

}  // namespace hemsim
