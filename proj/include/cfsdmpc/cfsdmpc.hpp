#pragma once

#include "core_types.hpp"
#include "deadlock.hpp"
#include "export.hpp"
#include "geometry.hpp"
#include "harness.hpp"
#include "planner.hpp"
#include "qp.hpp"
#include "scenario.hpp"
#include "serialization.hpp"
#include "vehicle.hpp"
