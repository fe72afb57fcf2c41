#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hemsim/controllers.hpp"
#include "hemsim/data_pipeline.hpp"
#include "hemsim/device_models.hpp"
#include "hemsim/error.hpp"
#include "hemsim/grid_physics.hpp"
#include "hemsim/scenario_config.hpp"

namespace hemsim {

// ---------------------------------------------------------------------------
// Observation schema
//
//   [0]            step            step index k
//   [1]            hour_of_day     h, in [0, 24)
//   per house i, 11 slots starting at 2 + 11 i:
//     t_house °C, e_bat kWh, desired_P1..P8 kWh, pv_potential kWh
//   [2 + 11 H]     ghi             W/m²
//   [3 + 11 H]     t_ambient       °C
//   [4 + 11 H]     wind            m/s
//   [5 + 11 H]     e_grid_prev     kWh, previous step's grid exchange
//
// Disturbance slots refer to the step about to be taken. Houses without a
// battery report e_bat = 0; houses without PV report pv_potential = 0.

inline constexpr std::size_t kHouseSlots = 2 + kPriorities + 1;

inline constexpr std::size_t observation_size(std::size_t houses) { return 2 + houses * kHouseSlots + 3 + 1; }

struct SlotInfo {
    std::string name;
    std::string unit;
    double low = 0.0;
    double high = 0.0;
};

inline std::vector<SlotInfo> observation_schema(std::span<const HouseConfig> houses)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<SlotInfo> s;
    s.reserve(observation_size(houses.size()));
    s.push_back({"step", "count", 0.0, inf});
    s.push_back({"hour_of_day", "h", 0.0, 24.0});
    for (const auto& h : houses) {
        s.push_back({fmt::format("{}.t_house", h.id), "degC", -inf, inf});
        s.push_back({fmt::format("{}.e_bat", h.id), "kWh", 0.0, h.battery ? h.battery->e_max : 0.0});
        for (std::size_t j = 0; j < kPriorities; ++j)
            s.push_back({fmt::format("{}.desired_P{}", h.id, j + 1), "kWh", 0.0, inf});
        s.push_back({fmt::format("{}.pv_potential", h.id), "kWh", 0.0, h.pv ? inf : 0.0});
    }
    s.push_back({"ghi", "W/m2", 0.0, inf});
    s.push_back({"t_ambient", "degC", -inf, inf});
    s.push_back({"wind", "m/s", 0.0, inf});
    s.push_back({"e_grid_prev", "kWh", -inf, inf});
    return s;
}

using Observation = std::vector<double>;

// ---------------------------------------------------------------------------
// Records

struct StepRecord {
    std::size_t step = 0;
    std::vector<ActionVector> commanded;
    std::vector<ActionVector> realized;
    std::vector<DeviceEnergies> candidate;  // before the serve decision
    std::vector<DeviceEnergies> energies;   // realized
    CommunityBalance candidate_balance;
    CommunityBalance balance;               // realized
    FeasibilityOutcome outcome;
    std::vector<LoadVector> desired;
    std::vector<double> t_house;            // after the step
    std::vector<double> e_bat;              // after the step
    std::vector<double> band_violation;     // °C outside [t_mode_low, t_mode_high] after the step
    double ghi = 0.0;
    double t_ambient = 0.0;
    double wind = 0.0;
    double reward = 0.0;

    double desired_total() const
    {
        double s = 0.0;
        for (const auto& d : desired) s += sum(d);
        return s;
    }
    double served_total() const
    {
        double s = 0.0;
        for (const auto& e : energies) s += e.e_load_total;
        return s;
    }
    bool operator==(const StepRecord&) const = default;
};

struct Trace {
    std::string scenario_name;
    std::uint64_t scenario_digest = 0;
    GridMode grid = GridMode::OffGrid;
    std::string controller;
    StartupMode startup = StartupMode::WACSC;
    double dt_hours = 1.0 / 6.0;
    std::vector<std::string> house_ids;
    std::vector<ThermostatParams> thermostats;
    std::vector<std::string> timestamps;
    std::vector<StepRecord> steps;
    std::vector<double> step_ms;  // wall clock

    /// Equality of everything except wall-clock timings.
    bool same_outcome(const Trace& o) const
    {
        return scenario_name == o.scenario_name && scenario_digest == o.scenario_digest && grid == o.grid &&
               controller == o.controller && startup == o.startup && dt_hours == o.dt_hours &&
               house_ids == o.house_ids && thermostats == o.thermostats && timestamps == o.timestamps &&
               steps == o.steps;
    }
};

struct RewardWeights {
    double unserved = 1.0;   // per kWh
    double comfort = 0.1;    // per °C of mean band violation
    double import_ = 0.01;   // per kWh imported

    bool operator==(const RewardWeights&) const = default;
};

inline double mean_band_violation(const StepRecord& r)
{
    if (r.band_violation.empty()) return 0.0;
    double s = 0.0;
    for (double v : r.band_violation) s += v;
    return s / static_cast<double>(r.band_violation.size());
}

inline double default_reward(const StepRecord& r, const RewardWeights& w = {})
{
    const double unserved = std::max(0.0, r.desired_total() - r.served_total());
    return -w.unserved * unserved - w.comfort * mean_band_violation(r) - w.import_ * std::max(0.0, -r.balance.e_grid);
}

inline double band_violation(double t, const ThermostatParams& p)
{
    return std::max(0.0, t - p.t_mode_high) + std::max(0.0, p.t_mode_low - t);
}

// ---------------------------------------------------------------------------
// Action validation

inline void validate_actions(std::span<const HouseConfig> houses, std::span<const ActionVector> actions)
{
    if (actions.size() != houses.size())
        throw ActionError(fmt::format("expected {} action vectors, got {}", houses.size(), actions.size()));
    for (std::size_t i = 0; i < houses.size(); ++i) {
        const auto& a = actions[i];
        const auto& h = houses[i];
        auto fail = [&](std::string_view field, std::string_view what) {
            throw ActionError(fmt::format("house '{}': {} {}", h.id, field, what));
        };
        if (a.u_mode != AcMode::Cool && a.u_mode != AcMode::Heat) fail("u_mode", "not in {-1, +1}");
        if (!(a.u_pv >= 0.0 && a.u_pv <= 1.0)) fail("u_pv", "outside [0, 1]");
        if (!(a.c >= 0.0 && a.c <= 1.0)) fail("c", "outside [0, 1]");
        if (!(a.d >= 0.0 && a.d <= 1.0)) fail("d", "outside [0, 1]");
        if (a.c * a.d != 0.0) fail("c*d", "!= 0 (simultaneous charge and discharge)");
        if (!h.pv && a.u_pv != 0.0) fail("u_pv", "must be 0 for a house without PV");
        if (!h.battery && (a.c != 0.0 || a.d != 0.0)) fail(a.c != 0.0 ? "c" : "d", "must be 0 for a house without battery");
    }
}

// ---------------------------------------------------------------------------
// Engine

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool terminated = false;
    bool truncated = false;
    StepRecord record;
};

inline constexpr double kConservationTolerance = 1e-9;

class Environment {
public:
    explicit Environment(ScenarioConfig scenario, RewardWeights weights = {})
        : scenario_(std::move(scenario)), weights_(weights)
    {
        validate(scenario_);
        switch (scenario_.controller) {
        case ControllerKind::Baseline: controller_ = std::make_unique<BaselineController>(); break;
        case ControllerKind::RuleBased: controller_ = std::make_unique<RuleBasedController>(); break;
        case ControllerKind::External:
            if (!scenario_.plugin.empty()) controller_ = ControllerRegistry::instance().create(scenario_.plugin);
            break;
        }
        digest_ = scenario_digest(scenario_);
    }

    /// Replaces the built-in policy.
    void set_controller(std::unique_ptr<Controller> c) { controller_ = std::move(c); }

    /// Loads disturbances (synthetic ones seeded by `seed`, or the scenario's
    /// own seed when absent) and restores the initial state.
    Observation reset(std::optional<std::uint64_t> seed = std::nullopt)
    {
        const std::uint64_t key = seed.value_or(scenario_.disturbances.synthetic ? scenario_.disturbances.synthetic->seed : 0);
        if (!dist_ || !dist_seed_ || *dist_seed_ != key) {
            dist_ = load_disturbances(scenario_, seed);
            dist_seed_ = key;
        }
        return restart();
    }

    /// Resets with caller-supplied disturbances, which must cover the horizon.
    Observation reset(DisturbanceSeries disturbances)
    {
        if (disturbances.houses != scenario_.houses.size())
            throw DataError(fmt::format("disturbances cover {} houses, scenario has {}", disturbances.houses,
                                        scenario_.houses.size()));
        if (disturbances.steps < scenario_.horizon_steps)
            throw DataError(fmt::format("disturbance shorter than horizon ({} < {})", disturbances.steps,
                                        scenario_.horizon_steps));
        dist_ = std::move(disturbances);
        dist_seed_.reset();
        return restart();
    }

    /// One step with the scenario's controller.
    StepResult step()
    {
        if (!controller_) throw Error("scenario controller is external; pass actions to step()");
        return advance(nullptr);
    }

    /// One step with caller-supplied actions.
    StepResult step(std::span<const ActionVector> actions) { return advance(&actions); }

    const ScenarioConfig& scenario() const { return scenario_; }
    const std::vector<HouseState>& states() const { return states_; }
    const DisturbanceSeries& disturbances() const
    {
        if (!dist_) throw Error("reset() not called");
        return *dist_;
    }
    std::size_t step_index() const { return k_; }
    bool done() const { return k_ >= scenario_.horizon_steps; }
    const Trace& trace() const { return trace_; }
    Trace take_trace() { return std::move(trace_); }
    std::vector<SlotInfo> schema() const { return observation_schema(scenario_.houses); }

    /// Observation for the current step index.
    Observation observe() const
    {
        const std::size_t n = scenario_.houses.size();
        const std::size_t k = std::min(k_, scenario_.horizon_steps - 1);
        const auto desired = dist_->desired(k);
        Observation o;
        o.reserve(observation_size(n));
        o.push_back(static_cast<double>(k_));
        o.push_back(std::fmod(static_cast<double>(k_) * scenario_.dt_hours, 24.0));
        for (std::size_t i = 0; i < n; ++i) {
            o.push_back(states_[i].t_house);
            o.push_back(scenario_.houses[i].battery ? states_[i].e_bat : 0.0);
            for (double e : desired[i]) o.push_back(e);
            o.push_back(potential(i, k));
        }
        o.push_back(dist_->ghi[k]);
        o.push_back(dist_->t_ambient[k]);
        o.push_back(dist_->wind[k]);
        o.push_back(e_grid_prev_);
        return o;
    }

    ControllerInput controller_input(std::span<const double> potentials) const
    {
        ControllerInput in;
        in.step = k_;
        in.houses = scenario_.houses;
        in.states = states_;
        in.pv_potential = potentials;
        in.desired = dist_->desired(k_);
        in.ghi = dist_->ghi[k_];
        in.t_ambient = dist_->t_ambient[k_];
        in.wind = dist_->wind[k_];
        in.grid = scenario_.grid;
        in.startup = scenario_.startup;
        in.dt_hours = scenario_.dt_hours;
        return in;
    }

private:
    double potential(std::size_t house, std::size_t k) const
    {
        const auto& h = scenario_.houses[house];
        if (!h.pv) return 0.0;
        return pv_potential(dist_->ghi[k], dist_->t_ambient[k], dist_->wind[k], *h.pv, scenario_.dt_hours);
    }

    Observation restart()
    {
        k_ = 0;
        e_grid_prev_ = 0.0;
        states_.clear();
        for (const auto& h : scenario_.houses) {
            HouseState s;
            s.t_house = h.initial_t_house;
            s.e_bat = h.battery ? h.initial_e_bat : 0.0;
            states_.push_back(s);
        }
        if (controller_) controller_->reset();
        trace_ = Trace{};
        trace_.scenario_name = scenario_.name;
        trace_.scenario_digest = digest_;
        trace_.grid = scenario_.grid;
        trace_.controller = scenario_.controller == ControllerKind::External && !scenario_.plugin.empty()
                                ? scenario_.plugin
                                : std::string(to_string(scenario_.controller));
        trace_.startup = scenario_.startup.mode;
        trace_.dt_hours = scenario_.dt_hours;
        for (const auto& h : scenario_.houses) {
            trace_.house_ids.push_back(h.id);
            trace_.thermostats.push_back(h.thermostat);
        }
        trace_.steps.reserve(scenario_.horizon_steps);
        trace_.step_ms.reserve(scenario_.horizon_steps);
        return observe();
    }

    StepResult advance(const std::span<const ActionVector>* external)
    {
        if (!dist_) throw Error("reset() not called");
        if (done()) throw Error("episode finished; call reset()");
        const auto t_start = std::chrono::steady_clock::now();

        const auto& houses = scenario_.houses;
        const std::size_t n = houses.size();
        std::vector<double> pot(n);
        for (std::size_t i = 0; i < n; ++i) pot[i] = potential(i, k_);
        const ControllerInput in = controller_input(pot);

        std::vector<ActionVector> actions =
            external ? std::vector<ActionVector>(external->begin(), external->end()) : controller_->decide(in);
        validate_actions(houses, actions);

        StepEvaluation ev =
            evaluate_step(houses, states_, actions, pot, in.desired, scenario_.grid, scenario_.startup, scenario_.dt_hours);

        StepRecord rec;
        rec.step = k_;
        rec.commanded = actions;
        rec.candidate = ev.energies;
        rec.candidate_balance = ev.balance;
        rec.outcome = ev.outcome;
        rec.desired.assign(in.desired.begin(), in.desired.end());
        rec.ghi = in.ghi;
        rec.t_ambient = in.t_ambient;
        rec.wind = in.wind;

        std::vector<DeviceEnergies> real = ev.energies;
        std::vector<ActionVector> realized = actions;
        std::vector<double> e_bat_next(n);
        if (!ev.outcome.serve()) {
            for (std::size_t i = 0; i < n; ++i) {
                DeviceEnergies z;
                z.e_pv_potential = real[i].e_pv_potential;
                real[i] = z;
                ActionVector off;
                off.u_mode = actions[i].u_mode;
                realized[i] = off;
                e_bat_next[i] = states_[i].e_bat;
            }
        } else {
            if (scenario_.grid == GridMode::OffGrid) curtail_surplus(real, ev.balance.e_mis);
            for (std::size_t i = 0; i < n; ++i) {
                if (houses[i].battery)
                    e_bat_next[i] = battery_advance(states_[i].e_bat, real[i].e_bat_c, real[i].e_bat_d, *houses[i].battery);
                else
                    e_bat_next[i] = states_[i].e_bat;
                if (houses[i].pv)
                    realized[i].u_pv = real[i].e_pv_potential > 0.0 ? real[i].e_pv / real[i].e_pv_potential : 0.0;
            }
        }

        rec.balance = community_balance(real);
        {
            std::vector<double> p_su(n);
            auto now = std::make_unique<bool[]>(n);
            auto prev = std::make_unique<bool[]>(n);
            for (std::size_t i = 0; i < n; ++i) {
                p_su[i] = ac_startup_power(scenario_.startup, houses[i].thermal.p_ac_rated);
                now[i] = realized[i].u_ac;
                prev[i] = states_[i].u_ac_prev;
            }
            StartupMismatch sm = startup_mismatch(rec.balance.e_gen, std::span<const bool>(now.get(), n),
                                                  std::span<const bool>(prev.get(), n), p_su, scenario_.dt_hours);
            rec.balance.p_mis_ac = sm.p_mis_ac;
            rec.balance.startup_flags = std::move(sm.flags);
        }
        if (scenario_.grid == GridMode::OffGrid) {
            rec.balance.e_grid = 0.0;
            if (std::abs(rec.balance.e_gen - rec.balance.e_dem) > kConservationTolerance)
                throw Error(fmt::format("step {}: off-grid balance violated (gen {} dem {})", k_, rec.balance.e_gen,
                                        rec.balance.e_dem));
        }

        for (std::size_t i = 0; i < n; ++i) {
            HouseState& s = states_[i];
            s.t_house = thermal_step(s, realized[i].u_ac, realized[i].u_mode, in.t_ambient, houses[i].thermal);
            s.e_bat = e_bat_next[i];
            s.u_ac_prev = realized[i].u_ac;
            s.u_mode_prev = actions[i].u_mode;
            if (houses[i].battery && (s.e_bat < houses[i].battery->e_min || s.e_bat > houses[i].battery->e_max))
                throw Error(fmt::format("step {}: house '{}' battery left its bounds", k_, houses[i].id));
            rec.t_house.push_back(s.t_house);
            rec.e_bat.push_back(s.e_bat);
            rec.band_violation.push_back(band_violation(s.t_house, houses[i].thermostat));
        }
        rec.energies = std::move(real);
        rec.realized = std::move(realized);
        rec.reward = default_reward(rec, weights_);

        e_grid_prev_ = rec.balance.e_grid;
        trace_.timestamps.push_back(dist_->timestamps.empty() ? std::string() : dist_->timestamps[k_]);
        ++k_;

        StepResult out;
        out.reward = rec.reward;
        out.truncated = done();
        out.observation = observe();
        trace_.steps.push_back(rec);
        out.record = std::move(rec);
        const auto t_end = std::chrono::steady_clock::now();
        trace_.step_ms.push_back(std::chrono::duration<double, std::milli>(t_end - t_start).count());
        return out;
    }

    ScenarioConfig scenario_;
    RewardWeights weights_;
    std::unique_ptr<Controller> controller_;
    std::uint64_t digest_ = 0;
    std::optional<DisturbanceSeries> dist_;
    std::optional<std::uint64_t> dist_seed_;
    std::vector<HouseState> states_;
    std::size_t k_ = 0;
    double e_grid_prev_ = 0.0;
    Trace trace_;
};

/// Runs the scenario to its horizon. `controller` names a registry entry
/// ("baseline", "rulebased" or a plug-in); empty keeps the scenario's choice.
inline Trace run_episode(ScenarioConfig scenario, const std::string& controller = {},
                         std::optional<std::uint64_t> seed = std::nullopt)
{
    if (controller == "baseline")
        scenario.controller = ControllerKind::Baseline;
    else if (controller == "rulebased")
        scenario.controller = ControllerKind::RuleBased;
    else if (!controller.empty()) {
        if (!ControllerRegistry::instance().contains(controller))
            throw ValidationError(fmt::format("unknown controller '{}'", controller));
        scenario.controller = ControllerKind::External;
        scenario.plugin = controller;
    }
    Environment env(std::move(scenario));
    env.reset(seed);
    while (!env.done()) env.step();
    return env.take_trace();
}

/// Same as above with preloaded disturbances.
inline Trace run_episode(ScenarioConfig scenario, const DisturbanceSeries& disturbances)
{
    Environment env(std::move(scenario));
    env.reset(disturbances);
    while (!env.done()) env.step();
    return env.take_trace();
}

// ---------------------------------------------------------------------------
// Export

namespace detail {
inline std::string num(double v) { return fmt::format("{:.12g}", v); }
}  // namespace detail

/// One row per house per step, then one community row per step.
inline void write_trace_csv(const Trace& t, std::ostream& out)
{
    out << "step,timestamp,scope,verdict,reason,t_house,e_bat,u_ac,u_mode,u_pv,c,d,e_pv_potential,e_pv,e_bat_c,"
           "e_bat_d,e_ac,load_desired,load_served";
    for (std::size_t j = 1; j <= kPriorities; ++j) out << ",served_P" << j;
    out << ",e_gen,e_dem,e_mis,e_grid,p_mis_ac,candidate_e_mis,candidate_p_mis_ac,reward\n";
    using detail::num;
    for (const auto& r : t.steps) {
        const std::string head = fmt::format("{},{}", r.step, r.step < t.timestamps.size() ? t.timestamps[r.step] : "");
        const std::string verdict = fmt::format("{},{}", to_string(r.outcome.verdict), to_string(r.outcome.reason));
        for (std::size_t i = 0; i < r.energies.size(); ++i) {
            const auto& e = r.energies[i];
            const auto& a = r.realized[i];
            out << head << ',' << t.house_ids[i] << ',' << verdict << ',' << num(r.t_house[i]) << ','
                << num(r.e_bat[i]) << ',' << (a.u_ac ? 1 : 0) << ',' << static_cast<int>(a.u_mode) << ','
                << num(a.u_pv) << ',' << num(a.c) << ',' << num(a.d) << ',' << num(e.e_pv_potential) << ','
                << num(e.e_pv) << ',' << num(e.e_bat_c) << ',' << num(e.e_bat_d) << ',' << num(e.e_ac) << ','
                << num(sum(r.desired[i])) << ',' << num(e.e_load_total);
            for (double v : e.e_loads) out << ',' << num(v);
            out << ",,,,,,,," << '\n';
        }
        const auto& b = r.balance;
        out << head << ",community," << verdict << ",,,,,,,,,,,,," << num(r.desired_total()) << ','
            << num(r.served_total());
        for (std::size_t j = 0; j < kPriorities; ++j) {
            double s = 0.0;
            for (const auto& e : r.energies) s += e.e_loads[j];
            out << ',' << num(s);
        }
        out << ',' << num(b.e_gen) << ',' << num(b.e_dem) << ',' << num(b.e_mis) << ',' << num(b.e_grid) << ','
            << num(b.p_mis_ac) << ',' << num(r.candidate_balance.e_mis) << ',' << num(r.candidate_balance.p_mis_ac)
            << ',' << num(r.reward) << '\n';
    }
}

/// Plot-ready wide table, one row per step: PV, battery, temperature and
/// load per house, then community generation and demand.
inline void write_timeseries_csv(const Trace& t, std::ostream& out)
{
    out << "step,timestamp,t_ambient,ghi";
    for (const auto& id : t.house_ids)
        out << fmt::format(",{0}.pv_potential,{0}.pv,{0}.bat_charge,{0}.bat_discharge,{0}.e_bat,{0}.t_house,"
                           "{0}.load_desired,{0}.load_served,{0}.ac",
                           id);
    out << ",e_gen,e_dem,e_grid\n";
    using detail::num;
    for (const auto& r : t.steps) {
        out << r.step << ',' << (r.step < t.timestamps.size() ? t.timestamps[r.step] : "") << ',' << num(r.t_ambient)
            << ',' << num(r.ghi);
        for (std::size_t i = 0; i < r.energies.size(); ++i) {
            const auto& e = r.energies[i];
            out << ',' << num(e.e_pv_potential) << ',' << num(e.e_pv) << ',' << num(e.e_bat_c) << ','
                << num(e.e_bat_d) << ',' << num(r.e_bat[i]) << ',' << num(r.t_house[i]) << ','
                << num(sum(r.desired[i])) << ',' << num(e.e_load_total) << ',' << num(e.e_ac);
        }
        out << ',' << num(r.balance.e_gen) << ',' << num(r.balance.e_dem) << ',' << num(r.balance.e_grid) << '\n';
    }
}

inline void write_trace_csv(const Trace& t, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    write_trace_csv(t, out);
}

inline void write_timeseries_csv(const Trace& t, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    write_timeseries_csv(t, out);
}

}  // namespace hemsim
