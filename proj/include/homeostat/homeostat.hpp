#pragma once

#include "homeostat/agc_loop.hpp"
#include "homeostat/builtins.hpp"
#include "homeostat/device_models.hpp"
#include "homeostat/dpi_synapse.hpp"
#include "homeostat/errors.hpp"
#include "homeostat/neuron.hpp"
#include "homeostat/scenario_io.hpp"
#include "homeostat/sim_engine.hpp"
