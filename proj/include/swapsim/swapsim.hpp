#pragma once

#include "swapsim/errors.hpp"
#include "swapsim/qcore.hpp"
#include "swapsim/devices.hpp"
#include "swapsim/netlist.hpp"
#include "swapsim/rng.hpp"
#include "swapsim/numerics.hpp"
#include "swapsim/biphoton.hpp"
#include "swapsim/tomography.hpp"
#include "swapsim/report.hpp"
#include "swapsim/experiments.hpp"
#include "swapsim/config.hpp"
