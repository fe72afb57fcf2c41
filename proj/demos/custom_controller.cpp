// Registers a third-party policy and runs it on the built-in community.
//
// The policy keeps the baseline thermostat but only ever asks for the
// critical half of the load stack (P1-P4), leaving P5-P8 off.

#include <iostream>

#include "hemsim/hemsim.hpp"

namespace {

class CriticalOnly final : public hemsim::Controller {
public:
    std::vector<hemsim::ActionVector> decide(const hemsim::ControllerInput& in) override
    {
        auto actions = hemsim::baseline_step(in);
        for (auto& a : actions)
            for (std::size_t j = 4; j < hemsim::kPriorities; ++j) a.u_loads[j] = false;
        return actions;
    }
};

}  // namespace

int main()
{
    hemsim::ControllerRegistry::instance().add("critical_only", [] { return std::make_unique<CriticalOnly>(); });

    auto scenario = hemsim::community_scenario(*hemsim::find_community("Community"), 7);
    scenario.grid = hemsim::GridMode::OffGrid;
    for (const std::string name : {"baseline", "rulebased", "critical_only"}) {
        const hemsim::Trace trace = hemsim::run_episode(scenario, name);
        const hemsim::MetricsReport m = hemsim::compute_metrics(trace, false);
        std::cout << name << ": TRM_h " << m.trm_h << "  LRM_cri " << m.lrm_cri << "  LRM_o " << m.lrm_o
                  << "  LGR " << hemsim::format_metric(m.lgr) << '\n';
    }
}
