#include <sstream>

#include <gtest/gtest.h>

#include "hemsim/metrics.hpp"

using namespace hemsim;

namespace {

// One house; each step is {t_house, desired P1, served P1, desired P2, served P2}.
struct Row {
    double t;
    double d1, s1, d2, s2;
};

Trace make_trace(const std::vector<Row>& rows, std::size_t houses = 1)
{
    Trace t;
    for (std::size_t i = 0; i < houses; ++i) {
        t.house_ids.push_back(fmt::format("h{}", i + 1));
        t.thermostats.push_back(ThermostatParams{});
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Row& r = rows[k];
        StepRecord rec;
        rec.step = k;
        for (std::size_t i = 0; i < houses; ++i) {
            LoadVector d{};
            d[0] = r.d1;
            d[1] = r.d2;
            DeviceEnergies e;
            e.e_loads[0] = r.s1;
            e.e_loads[1] = r.s2;
            e.e_load_total = r.s1 + r.s2;
            e.e_pv = e.e_load_total;
            rec.desired.push_back(d);
            rec.energies.push_back(e);
            rec.t_house.push_back(r.t);
        }
        rec.balance = community_balance(rec.energies);
        rec.outcome = {r.s1 + r.s2 > 0.0 ? Verdict::ServeAll : Verdict::ServeNone, Reason::Feasible};
        t.steps.push_back(rec);
    }
    return t;
}

}  // namespace

TEST(Metrics, ConstructedTrace)
{
    const Trace t = make_trace({{24.0, 1.0, 1.0, 1.0, 1.0},
                                {31.0, 1.0, 0.0, 1.0, 0.0},
                                {17.0, 1.0, 1.0, 2.0, 0.0},
                                {18.0, 1.0, 0.0, 2.0, 0.0}});
    const MetricsReport m = compute_metrics(t);
    EXPECT_DOUBLE_EQ(m.trm_h, 0.5);
    EXPECT_DOUBLE_EQ(m.lrm_cri, 0.5);
    EXPECT_DOUBLE_EQ(m.lrm_o, 3.0 / 10.0);
    EXPECT_DOUBLE_EQ(m.trm_deviation_degC, 0.5);
    ASSERT_TRUE(m.lgr);
    EXPECT_DOUBLE_EQ(*m.lgr, 1.0);
    EXPECT_EQ(m.served_steps, 2u);
    EXPECT_EQ(m.houses.size(), 1u);
    EXPECT_DOUBLE_EQ(m.houses[0].lrm_o, m.lrm_o);
    EXPECT_FALSE(m.timing);
}

TEST(Metrics, CommunityAggregatesOverHouseSteps)
{
    Trace t = make_trace({{24.0, 1.0, 1.0, 0.0, 0.0}, {24.0, 1.0, 1.0, 0.0, 0.0}}, 2);
    t.steps[1].t_house[1] = 35.0;
    t.steps[0].energies[1].e_loads[0] = 0.0;
    t.steps[0].energies[1].e_load_total = 0.0;
    const auto m = compute_metrics(t);
    EXPECT_DOUBLE_EQ(m.trm_h, 0.75);
    EXPECT_DOUBLE_EQ(m.trm_deviation_degC, 1.25);
    EXPECT_DOUBLE_EQ(m.lrm_cri, 0.75);
    EXPECT_DOUBLE_EQ(m.houses[1].trm_h, 0.5);
    EXPECT_DOUBLE_EQ(m.houses[1].lrm_cri, 0.5);
    EXPECT_DOUBLE_EQ(m.houses[0].lrm_cri, 1.0);
}

TEST(Metrics, NothingDesiredIsVacuouslyServed)
{
    const auto m = compute_metrics(make_trace({{24.0, 0.0, 0.0, 0.0, 0.0}}));
    EXPECT_EQ(m.lrm_cri, 1.0);
    EXPECT_EQ(m.lrm_o, 1.0);
    EXPECT_TRUE(m.lrm_cri_vacuous);
    EXPECT_TRUE(m.lrm_o_vacuous);
    EXPECT_FALSE(m.lgr);
    std::ostringstream out;
    write_metrics_text(Trace{}, m, out);
    EXPECT_NE(out.str().find("lgr: absent"), std::string::npos);
    EXPECT_NE(out.str().find("(vacuous: nothing desired)"), std::string::npos);
}

TEST(Metrics, LoadGenerationRatio)
{
    Trace t = make_trace({{24.0, 1.0, 1.0, 0.0, 0.0}});
    t.steps[0].balance.e_gen = 0.76;
    t.steps[0].balance.e_dem = 1.0;
    EXPECT_DOUBLE_EQ(*lgr(t), 0.76);
}

TEST(Metrics, RatiosInvariantToEnergyScaleProperty)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Row> rows;
        for (int k = 0; k < 20; ++k) {
            const double d1 = u(rng), d2 = u(rng);
            rows.push_back({16.0 + 16.0 * u(rng), d1, d1 * u(rng), d2, d2 * u(rng)});
        }
        const double lambda = 0.125 + 8.0 * u(rng);
        std::vector<Row> scaled = rows;
        for (auto& r : scaled) {
            r.d1 *= lambda;
            r.s1 *= lambda;
            r.d2 *= lambda;
            r.s2 *= lambda;
        }
        const auto a = compute_metrics(make_trace(rows));
        const auto b = compute_metrics(make_trace(scaled));
        EXPECT_NEAR(a.lrm_cri, b.lrm_cri, 1e-12);
        EXPECT_NEAR(a.lrm_o, b.lrm_o, 1e-12);
        EXPECT_EQ(a.trm_h, b.trm_h);
        EXPECT_GE(a.lrm_o, 0.0);
        EXPECT_LE(a.lrm_o, 1.0);
    }
}

TEST(Timing, MeanPercentileMax)
{
    const auto s = timing_stats(std::vector<double>{1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(s.mean_ms, 2.0);
    EXPECT_DOUBLE_EQ(s.p95_ms, 3.0);
    EXPECT_DOUBLE_EQ(s.max_ms, 3.0);
    std::vector<double> v;
    for (int i = 1; i <= 100; ++i) v.push_back(i);
    EXPECT_DOUBLE_EQ(timing_stats(v).p95_ms, 95.0);
    EXPECT_THROW(timing_stats(std::vector<double>{}), Error);
}

TEST(Metrics, TimingIncludedWhenRecorded)
{
    Trace t = make_trace({{24.0, 1.0, 1.0, 0.0, 0.0}});
    t.step_ms = {0.5};
    const auto m = compute_metrics(t);
    ASSERT_TRUE(m.timing);
    EXPECT_EQ(m.timing->samples, 1u);
    EXPECT_FALSE(compute_metrics(t, false).timing);
}
