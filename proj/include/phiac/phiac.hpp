#pragma once

// Umbrella header.

#include "phiac/errors.hpp"
#include "phiac/linalg.hpp"
#include "phiac/ph_system.hpp"
#include "phiac/assumptions.hpp"
#include "phiac/iac.hpp"
#include "phiac/closed_loop.hpp"
#include "phiac/mech.hpp"
#include "phiac/systems/pmsm.hpp"
#include "phiac/systems/manipulator.hpp"
#include "phiac/systems/vtol.hpp"
#include "phiac/sim.hpp"
#include "phiac/verify.hpp"
#include "phiac/presets.hpp"
#include "phiac/io.hpp"
