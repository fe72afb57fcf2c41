#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "hemsim/case_matrix.hpp"

using namespace hemsim;
namespace fs = std::filesystem;

TEST(CaseMatrix, TwentyFiveCasesInTableOrder)
{
    const auto m = default_case_matrix();
    ASSERT_EQ(m.size(), 25u);
    const std::vector<std::string> configs{"Community", "1PV+Bat", "1Bat", "1PV", "1No-DER"};
    for (std::size_t c = 0; c < 5; ++c)
        for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(m[c * 5 + t].config, configs[c]);
    EXPECT_EQ(m[0].label(), "Community Off-Grid BL (WACSC)");
    EXPECT_EQ(m[1].type_label(), "Off-Grid BL (WOACSC)");
    EXPECT_EQ(m[2].type_label(), "Off-Grid RB (WACSC)");
    EXPECT_EQ(m[3].type_label(), "Off-Grid RB (WOACSC)");
    EXPECT_EQ(m[4].type_label(), "On-Grid BL (WOACSC)");
    for (const auto& c : m) EXPECT_FALSE(c.grid == GridMode::OnGrid && c.controller == ControllerKind::RuleBased);
}

TEST(CaseMatrix, CommunitiesHaveExpectedDers)
{
    const auto c = find_community("Community");
    ASSERT_TRUE(c);
    EXPECT_EQ(c->ders, (std::vector<DerClass>{DerClass::PvAndBattery, DerClass::BatteryOnly, DerClass::PvOnly,
                                              DerClass::NoDer}));
    EXPECT_FALSE(find_community("nope"));
    const auto s = community_scenario(*find_community("1PV"), 4);
    EXPECT_EQ(s.houses.size(), 1u);
    EXPECT_EQ(s.horizon_steps, 1008u);
    EXPECT_EQ(s.disturbances.synthetic->seed, 4u);
    EXPECT_NO_THROW(validate(s));
}

TEST(CaseMatrix, MatrixFile)
{
    const fs::path p = fs::temp_directory_path() / "hemsim_matrix.csv";
    std::ofstream(p) << "# two cases\nconfig,grid,controller,startup\nCommunity,off_grid,rb,WACSC\n1PV,on,baseline,woacsc\n";
    const auto m = load_case_matrix(p);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m[0], (CaseSpec{"Community", GridMode::OffGrid, ControllerKind::RuleBased, StartupMode::WACSC}));
    EXPECT_EQ(m[1], (CaseSpec{"1PV", GridMode::OnGrid, ControllerKind::Baseline, StartupMode::WOACSC}));
    std::ofstream(p) << "Community,sideways,rb,WACSC\n";
    EXPECT_THROW(load_case_matrix(p), ParseError);
    fs::remove(p);
}

TEST(CaseMatrix, ScarcitySizingHalvesRatedPv)
{
    ScenarioConfig s = community_scenario(*find_community("Community"), 0);
    const auto d = load_disturbances(s);
    size_pv_for_scarcity(s, d, 0.5);
    double peak = 0.0;
    for (std::size_t k = 0; k < d.steps; ++k) {
        double kw = 4 * 3.0;
        for (const auto& l : d.desired(k)) kw += sum(l) * 6.0;
        peak = std::max(peak, kw);
    }
    const double rated = s.houses[0].pv->rated_kw() + s.houses[2].pv->rated_kw();
    EXPECT_LE(rated, 0.5 * peak);
    EXPECT_GT(rated + 2 * 0.325, 0.5 * peak);
}

TEST(Sweep, RunsAndReportsFailures)
{
    std::vector<CaseSpec> cases = simulation_types("1PV");
    cases.push_back({"missing", GridMode::OffGrid, ControllerKind::Baseline, StartupMode::WACSC});
    CaseResolver r;
    const auto rows = run_sweep(cases, r, 0, 2);
    ASSERT_EQ(rows.size(), 6u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(rows[i].status, "ok") << rows[i].name();
        EXPECT_TRUE(rows[i].metrics);
    }
    EXPECT_EQ(rows[4].metrics->lrm_o, 1.0);
    EXPECT_FALSE(rows[5].metrics);
    EXPECT_NE(rows[5].status.find("unknown community configuration 'missing'"), std::string::npos);
    const std::string line = sweep_csv_row(rows[0]);
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8);
    EXPECT_EQ(sweep_header(), "case,TRM_h,LRM_cri,LRM_o,LGR,mean_ms,p95_ms,max_ms,status");
}

TEST(Sweep, ParallelMatchesSerial)
{
    const auto cases = simulation_types("Community");
    CaseResolver r;
    const auto a = run_sweep(cases, r, 1, 1);
    const auto b = run_sweep(cases, r, 1, 3);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        EXPECT_EQ(a[i].metrics->lrm_o, b[i].metrics->lrm_o);
        EXPECT_EQ(a[i].metrics->trm_h, b[i].metrics->trm_h);
        EXPECT_EQ(a[i].metrics->lgr, b[i].metrics->lgr);
    }
}
