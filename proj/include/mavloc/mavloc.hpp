// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mavloc/aggregate.hpp"
#include "mavloc/aircraft.hpp"
#include "mavloc/core.hpp"
#include "mavloc/environment.hpp"
#include "mavloc/features.hpp"
#include "mavloc/harness.hpp"
#include "mavloc/io.hpp"
#include "mavloc/localizer.hpp"
#include "mavloc/noise.hpp"
#include "mavloc/phasemod.hpp"
#include "mavloc/rotor.hpp"
