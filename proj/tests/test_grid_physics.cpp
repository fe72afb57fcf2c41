#include <random>

#include <gtest/gtest.h>

#include "hemsim/grid_physics.hpp"

using namespace hemsim;

TEST(Balance, SumsGenerationAndDemand)
{
    std::vector<DeviceEnergies> e(2);
    e[0].e_pv = 1.0;
    e[0].e_bat_c = 0.2;
    e[0].e_ac = 0.5;
    e[0].e_loads[0] = 0.1;
    e[1].e_bat_d = 0.4;
    e[1].e_loads[7] = 0.3;
    const CommunityBalance b = community_balance(e);
    EXPECT_DOUBLE_EQ(b.e_gen, 1.4);
    EXPECT_NEAR(b.e_dem, 1.1, 1e-15);
    EXPECT_NEAR(b.e_mis, 0.3, 1e-15);
    EXPECT_EQ(b.e_grid, b.e_mis);
}

TEST(Startup, SingleStartingAcMismatch)
{
    const bool now[] = {true};
    const bool prev[] = {false};
    const auto m = startup_mismatch(1.0, now, prev, 10.5, 1.0 / 6.0);
    EXPECT_NEAR(m.p_mis_ac, 6.0 - 10.5, 1e-12);
    ASSERT_EQ(m.flags.size(), 1u);
    EXPECT_TRUE(m.flags[0]);
}

TEST(Startup, ExhaustivePairsAndModes)
{
    for (bool prev : {false, true})
        for (bool now : {false, true})
            for (StartupMode mode : {StartupMode::WACSC, StartupMode::WOACSC})
                for (double e_gen : {0.5, 1.0, 1.75, 2.0}) {
                    const bool n[] = {now};
                    const bool p[] = {prev};
                    const auto m = startup_mismatch(e_gen, n, p, 10.5, 1.0 / 6.0);
                    const bool starting = now && !prev;
                    EXPECT_EQ(m.flags[0], starting);
                    const double expect = e_gen * 6.0 - (starting ? 10.5 : 0.0);
                    EXPECT_NEAR(m.p_mis_ac, expect, 1e-12);
                    const auto r = resolve_step(0.0, m.p_mis_ac, GridMode::OffGrid, mode);
                    const bool serve = mode == StartupMode::WOACSC || m.p_mis_ac >= 0.0;
                    EXPECT_EQ(r.serve(), serve);
                    if (resolve_step(0.0, m.p_mis_ac, GridMode::OffGrid, StartupMode::WACSC).serve())
                        EXPECT_TRUE(resolve_step(0.0, m.p_mis_ac, GridMode::OffGrid, StartupMode::WOACSC).serve());
                }
}

TEST(Startup, PerHouseStartupPower)
{
    const bool now[] = {true, true, false};
    const bool prev[] = {false, false, false};
    const double p_su[] = {10.5, 6.3, 99.0};
    const auto m = startup_mismatch(3.0, now, prev, p_su, 0.5);
    EXPECT_NEAR(m.p_mis_ac, 6.0 - 16.8, 1e-12);
}

TEST(Resolve, OffGridDecisions)
{
    EXPECT_EQ(resolve_step(-0.01, 5.0, GridMode::OffGrid, StartupMode::WOACSC).reason, Reason::EnergyDeficit);
    EXPECT_EQ(resolve_step(0.0, -1.0, GridMode::OffGrid, StartupMode::WACSC).reason, Reason::StartupDeficit);
    EXPECT_TRUE(resolve_step(0.0, -1.0, GridMode::OffGrid, StartupMode::WOACSC).serve());
    EXPECT_TRUE(resolve_step(0.0, 0.0, GridMode::OffGrid, StartupMode::WACSC).serve());
    EXPECT_EQ(resolve_step(-5.0, -5.0, GridMode::OnGrid, StartupMode::WACSC).reason, Reason::OnGrid);
}

TEST(Resolve, WacscNeverMorePermissiveRandom)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 5000; ++i) {
        const double e = u(rng), p = u(rng);
        if (resolve_step(e, p, GridMode::OffGrid, StartupMode::WACSC).serve())
            EXPECT_TRUE(resolve_step(e, p, GridMode::OffGrid, StartupMode::WOACSC).serve());
    }
}

TEST(Curtail, BatteryDischargeFirstThenPv)
{
    std::vector<DeviceEnergies> e(2);
    e[0].e_pv = 1.0;
    e[0].e_bat_d = 0.3;
    e[1].e_pv = 0.5;
    e[1].e_bat_d = 0.2;
    curtail_surplus(e, 0.9);
    EXPECT_DOUBLE_EQ(e[0].e_bat_d, 0.0);
    EXPECT_DOUBLE_EQ(e[1].e_bat_d, 0.0);
    EXPECT_NEAR(e[0].e_pv, 0.6, 1e-15);
    EXPECT_DOUBLE_EQ(e[1].e_pv, 0.5);
}

TEST(Curtail, NonPositiveSurplusIsNoop)
{
    std::vector<DeviceEnergies> e(1);
    e[0].e_pv = 1.0;
    curtail_surplus(e, -0.5);
    EXPECT_DOUBLE_EQ(e[0].e_pv, 1.0);
}

TEST(Evaluate, ConservationHoldsForRandomCandidates)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<HouseConfig> houses(4);
    const DerClass classes[] = {DerClass::PvAndBattery, DerClass::BatteryOnly, DerClass::PvOnly, DerClass::NoDer};
    for (int i = 0; i < 4; ++i) {
        houses[i].der = classes[i];
        if (has_pv(classes[i])) houses[i].pv = PvParams{};
        if (has_battery(classes[i])) houses[i].battery = BatteryParams{};
    }
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<HouseState> states(4);
        std::vector<ActionVector> acts(4);
        std::vector<double> pot(4);
        std::vector<LoadVector> desired(4);
        for (int i = 0; i < 4; ++i) {
            states[i].e_bat = houses[i].battery ? u(rng) * 13.5 : 0.0;
            states[i].u_ac_prev = u(rng) < 0.5;
            acts[i].u_ac = u(rng) < 0.5;
            if (houses[i].pv) acts[i].u_pv = u(rng);
            if (houses[i].battery) (u(rng) < 0.5 ? acts[i].c : acts[i].d) = u(rng);
            for (auto& b : acts[i].u_loads) b = u(rng) < 0.7;
            pot[i] = houses[i].pv ? 2.0 * u(rng) : 0.0;
            for (auto& d : desired[i]) d = 0.1 * u(rng);
        }
        for (GridMode g : {GridMode::OffGrid, GridMode::OnGrid}) {
            const auto ev = evaluate_step(houses, states, acts, pot, desired, g, StartupParams{}, 1.0 / 6.0);
            EXPECT_NEAR(ev.balance.e_gen - ev.balance.e_dem - ev.balance.e_grid, 0.0, 1e-12);
            for (int i = 0; i < 4; ++i)
                if (houses[i].battery) {
                    EXPECT_GE(ev.e_bat_next[i], 0.0);
                    EXPECT_LE(ev.e_bat_next[i], 13.5);
                }
        }
    }
}
