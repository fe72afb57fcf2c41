#include <sstream>

#include <gtest/gtest.h>

#include "hemsim/case_matrix.hpp"
#include "hemsim/sim_env.hpp"

using namespace hemsim;

namespace {

// Constant disturbances: no sun, mild weather, the same loads every step.
DisturbanceSeries flat(std::size_t steps, std::size_t houses, LoadVector load, double ghi = 0.0,
                       double t_amb = 24.0)
{
    DisturbanceSeries d;
    d.steps = steps;
    d.houses = houses;
    d.timestamps.assign(steps, "2017-09-11T00:00:00");
    d.ghi.assign(steps, ghi);
    d.t_ambient.assign(steps, t_amb);
    d.wind.assign(steps, 2.0);
    d.loads.assign(steps * houses, load);
    return d;
}

ScenarioConfig scenario_of(std::vector<DerClass> ders, GridMode g, std::size_t horizon = 4)
{
    ScenarioConfig s;
    s.name = "t";
    s.grid = g;
    s.horizon_steps = horizon;
    for (std::size_t i = 0; i < ders.size(); ++i) s.houses.push_back(make_house(fmt::format("h{}", i + 1), ders[i]));
    s.disturbances.synthetic = SyntheticSpec{};
    return s;
}

ScenarioConfig community(std::uint64_t seed = 0) { return community_scenario(*find_community("Community"), seed); }

}  // namespace

TEST(Observation, SizeAndSchemaOrder)
{
    EXPECT_EQ(observation_size(4), 50u);
    EXPECT_EQ(observation_size(1), 17u);
    const auto s = community();
    const auto schema = observation_schema(s.houses);
    ASSERT_EQ(schema.size(), 50u);
    EXPECT_EQ(schema[0].name, "step");
    EXPECT_EQ(schema[1].name, "hour_of_day");
    EXPECT_EQ(schema[2].name, "h1.t_house");
    EXPECT_EQ(schema[3].name, "h1.e_bat");
    EXPECT_EQ(schema[4].name, "h1.desired_P1");
    EXPECT_EQ(schema[11].name, "h1.desired_P8");
    EXPECT_EQ(schema[12].name, "h1.pv_potential");
    EXPECT_EQ(schema[13].name, "h2.t_house");
    EXPECT_EQ(schema[46].name, "ghi");
    EXPECT_EQ(schema[49].name, "e_grid_prev");
    EXPECT_EQ(schema[3].high, 13.5);
    EXPECT_EQ(schema[13 + 1 + 1 + 8].high, 0.0);  // h2 has no PV
}

TEST(Observation, ValuesMatchStateAndDisturbances)
{
    Environment env(community());
    const Observation o = env.reset(0);
    ASSERT_EQ(o.size(), 50u);
    const auto& d = env.disturbances();
    EXPECT_EQ(o[0], 0.0);
    EXPECT_EQ(o[1], 0.0);
    EXPECT_EQ(o[2], 24.0);
    EXPECT_EQ(o[3], 6.75);
    for (std::size_t j = 0; j < kPriorities; ++j) EXPECT_EQ(o[4 + j], d.desired(0)[0][j]);
    EXPECT_EQ(o[46], d.ghi[0]);
    EXPECT_EQ(o[49], 0.0);
    const auto r = env.step();
    EXPECT_EQ(r.observation[0], 1.0);
    EXPECT_DOUBLE_EQ(r.observation[1], 1.0 / 6.0);
    EXPECT_EQ(r.observation[2], env.states()[0].t_house);
}

TEST(Environment, DeterministicAcrossRuns)
{
    const Trace a = run_episode(community(3), "rulebased");
    const Trace b = run_episode(community(3), "rulebased");
    EXPECT_TRUE(a.same_outcome(b));
    EXPECT_EQ(a.steps.size(), 1008u);
    const Trace c = run_episode(community(4), "rulebased");
    EXPECT_FALSE(a.same_outcome(c));
}

TEST(Environment, ResetReplaysTheEpisode)
{
    Environment env(community());
    const Observation o0 = env.reset(5);
    std::vector<double> rewards;
    for (int k = 0; k < 50; ++k) rewards.push_back(env.step().reward);
    EXPECT_EQ(env.reset(5), o0);
    for (int k = 0; k < 50; ++k) EXPECT_EQ(env.step().reward, rewards[static_cast<std::size_t>(k)]);
}

TEST(Environment, ShortDisturbanceRejected)
{
    auto s = scenario_of({DerClass::NoDer}, GridMode::OnGrid, 10);
    Environment env(s);
    EXPECT_THROW(env.reset(flat(9, 1, LoadVector{})), DataError);
    s.horizon_steps = 1009;
    Environment env2(s);
    EXPECT_THROW(env2.reset(0), DataError);
}

TEST(Environment, OffGridDeficitServesNothing)
{
    auto s = scenario_of({DerClass::NoDer}, GridMode::OffGrid);
    s.houses[0].initial_t_house = 26.0;
    Environment env(s);
    env.reset(flat(4, 1, LoadVector{0.1}));
    const auto r = env.step();
    EXPECT_EQ(r.record.outcome.verdict, Verdict::ServeNone);
    EXPECT_EQ(r.record.outcome.reason, Reason::EnergyDeficit);
    EXPECT_TRUE(r.record.commanded[0].u_ac);
    EXPECT_FALSE(r.record.realized[0].u_ac);
    EXPECT_EQ(r.record.energies[0], DeviceEnergies{});
    EXPECT_FALSE(env.states()[0].u_ac_prev);
    const auto& th = s.houses[0].thermal;
    EXPECT_DOUBLE_EQ(env.states()[0].t_house, th.a * 26.0 + th.d * 24.0);
    EXPECT_DOUBLE_EQ(r.reward, -0.1);
}

TEST(Environment, BlackoutKeepsBatteryCharge)
{
    auto s = scenario_of({DerClass::BatteryOnly}, GridMode::OffGrid);
    s.houses[0].initial_t_house = 26.0;
    Environment env(s);
    env.reset(flat(4, 1, LoadVector{0.05}));
    // Discharge covers the energy (0.55 kWh) but 3.3 kW cannot start the AC.
    std::vector<ActionVector> a(1);
    a[0].d = 1.0;
    a[0].u_loads[0] = true;
    a[0].u_ac = true;
    const auto r = env.step(a);
    EXPECT_GE(r.record.candidate_balance.e_mis, 0.0);
    EXPECT_EQ(r.record.outcome.reason, Reason::StartupDeficit);
    EXPECT_EQ(env.states()[0].e_bat, 6.75);
    EXPECT_FALSE(env.states()[0].u_ac_prev);

    s.startup.mode = StartupMode::WOACSC;
    Environment relaxed(s);
    relaxed.reset(flat(4, 1, LoadVector{0.05}));
    EXPECT_EQ(relaxed.step(a).record.outcome.verdict, Verdict::ServeAll);
    EXPECT_TRUE(relaxed.states()[0].u_ac_prev);
    EXPECT_LT(relaxed.states()[0].e_bat, 6.75);
}

TEST(Environment, OnGridImportAndReward)
{
    auto s = scenario_of({DerClass::NoDer}, GridMode::OnGrid);
    s.controller = ControllerKind::Baseline;
    Environment env(s);
    env.reset(flat(4, 1, LoadVector{0.3, 0.4}));
    const auto r = env.step();
    EXPECT_EQ(r.record.outcome.reason, Reason::OnGrid);
    EXPECT_DOUBLE_EQ(r.record.balance.e_grid, -0.7);
    EXPECT_DOUBLE_EQ(r.reward, -0.007);
    EXPECT_DOUBLE_EQ(env.step().observation.back(), -0.7);
}

TEST(Environment, RewardComponents)
{
    StepRecord r;
    r.desired = {LoadVector{0.5, 0.5}};
    r.energies.resize(1);
    r.energies[0].e_load_total = 1.0;
    r.band_violation = {0.0};
    EXPECT_EQ(default_reward(r), 0.0);
    r.energies[0].e_load_total = 0.0;
    EXPECT_DOUBLE_EQ(default_reward(r), -1.0);
    r.energies[0].e_load_total = 1.0;
    r.band_violation = {1.0, 3.0};
    EXPECT_DOUBLE_EQ(default_reward(r), -0.2);
    EXPECT_DOUBLE_EQ(band_violation(31.5, ThermostatParams{}), 1.5);
    EXPECT_DOUBLE_EQ(band_violation(17.0, ThermostatParams{}), 1.0);
}

TEST(Environment, RejectsInvalidActions)
{
    auto s = scenario_of({DerClass::PvAndBattery, DerClass::NoDer}, GridMode::OnGrid);
    Environment env(s);
    env.reset(flat(4, 2, LoadVector{}));
    std::vector<ActionVector> a(2);
    a[0].c = 1.0;
    a[0].d = 1.0;
    EXPECT_THROW(env.step(a), ActionError);
    a[0].d = 0.0;
    a[1].u_pv = 0.5;
    try {
        env.step(a);
        FAIL() << "expected ActionError";
    } catch (const ActionError& e) {
        EXPECT_NE(std::string(e.what()).find("house 'h2': u_pv"), std::string::npos) << e.what();
    }
    a[1].u_pv = 0.0;
    a[0].u_pv = 1.5;
    EXPECT_THROW(env.step(a), ActionError);
    EXPECT_THROW(env.step(std::vector<ActionVector>(1)), ActionError);
    EXPECT_EQ(env.step_index(), 0u);
}

TEST(Environment, ExternalControllerNeedsActions)
{
    auto s = scenario_of({DerClass::NoDer}, GridMode::OnGrid);
    s.controller = ControllerKind::External;
    Environment env(s);
    env.reset(flat(4, 1, LoadVector{}));
    EXPECT_THROW(env.step(), Error);
    EXPECT_NO_THROW(env.step(std::vector<ActionVector>(1)));
}

TEST(Environment, EpisodeEndsAtHorizon)
{
    auto s = scenario_of({DerClass::NoDer}, GridMode::OnGrid, 2);
    Environment env(s);
    env.reset(flat(2, 1, LoadVector{}));
    EXPECT_FALSE(env.step().truncated);
    EXPECT_TRUE(env.step().truncated);
    EXPECT_THROW(env.step(), Error);
}

TEST(Environment, OnGridServesAllDesiredLoad)
{
    auto s = apply_case(community(), CaseSpec{"Community", GridMode::OnGrid, ControllerKind::Baseline,
                                              StartupMode::WOACSC});
    const Trace t = run_episode(s);
    ASSERT_EQ(t.steps.size(), 1008u);
    for (const auto& r : t.steps) {
        ASSERT_EQ(r.served_total(), r.desired_total()) << "step " << r.step;
        ASSERT_EQ(r.outcome.verdict, Verdict::ServeAll);
    }
}

TEST(Environment, OffGridInvariantsHoldEveryStep)
{
    for (ControllerKind c : {ControllerKind::Baseline, ControllerKind::RuleBased})
        for (StartupMode m : {StartupMode::WACSC, StartupMode::WOACSC}) {
            auto s = apply_case(community(2), CaseSpec{"Community", GridMode::OffGrid, c, m});
            const Trace t = run_episode(s);
            for (const auto& r : t.steps) {
                ASSERT_LE(std::abs(r.balance.e_gen - r.balance.e_dem), 1e-9);
                ASSERT_EQ(r.balance.e_grid, 0.0);
                if (r.outcome.serve()) {
                    ASSERT_GE(r.candidate_balance.e_mis, 0.0);
                    if (m == StartupMode::WACSC) ASSERT_GE(r.candidate_balance.p_mis_ac, 0.0);
                }
                for (std::size_t i = 0; i < r.e_bat.size(); ++i) {
                    ASSERT_GE(r.e_bat[i], 0.0);
                    ASSERT_LE(r.e_bat[i], 13.5);
                    ASSERT_LE(r.energies[i].e_load_total, sum(r.desired[i]) + 1e-15);
                }
            }
        }
}

TEST(Export, TraceAndTimeseriesShapes)
{
    auto s = scenario_of({DerClass::PvAndBattery, DerClass::NoDer}, GridMode::OnGrid, 3);
    const Trace t = run_episode(s, flat(3, 2, LoadVector{0.1}, 500.0));
    std::ostringstream tr, ts;
    write_trace_csv(t, tr);
    write_timeseries_csv(t, ts);
    auto rows = [](const std::string& text) {
        std::vector<std::string> out;
        std::istringstream in(text);
        for (std::string line; std::getline(in, line);) out.push_back(line);
        return out;
    };
    auto fields = [](const std::string& line) { return std::count(line.begin(), line.end(), ',') + 1; };
    const auto a = rows(tr.str());
    ASSERT_EQ(a.size(), 1u + 3u * 3u);
    for (const auto& l : a) EXPECT_EQ(fields(l), 35) << l;
    EXPECT_NE(a[3].find(",community,"), std::string::npos);
    const auto b = rows(ts.str());
    ASSERT_EQ(b.size(), 4u);
    for (const auto& l : b) EXPECT_EQ(fields(l), 4 + 2 * 9 + 3) << l;
}
