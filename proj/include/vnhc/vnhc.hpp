#pragma once

#include "vnhc/chetaev.hpp"
#include "vnhc/config.hpp"
#include "vnhc/constraints.hpp"
#include "vnhc/control.hpp"
#include "vnhc/csv.hpp"
#include "vnhc/errors.hpp"
#include "vnhc/finite_diff.hpp"
#include "vnhc/integrate.hpp"
#include "vnhc/mechanical_system.hpp"
#include "vnhc/runner.hpp"
#include "vnhc/scenarios.hpp"
#include "vnhc/state.hpp"
