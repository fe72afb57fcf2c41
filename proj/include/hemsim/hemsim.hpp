#pragma once

#include "hemsim/error.hpp"
#include "hemsim/params.hpp"
#include "hemsim/device_models.hpp"
#include "hemsim/grid_physics.hpp"
#include "hemsim/controllers.hpp"
#include "hemsim/scenario_config.hpp"
#include "hemsim/data_pipeline.hpp"
#include "hemsim/sim_env.hpp"
#include "hemsim/metrics.hpp"
#include "hemsim/case_matrix.hpp"
#include "hemsim/line_protocol.hpp"
