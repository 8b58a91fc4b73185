#pragma once

// Umbrella header: data-driven modeling and constrained trajectory
// optimization for a quadrotor carrying a soft growing arm, plus the
// synthetic plant the pipeline is exercised against.

#include "vinetraj/core.hpp"
#include "vinetraj/experiments.hpp"
#include "vinetraj/features.hpp"
#include "vinetraj/io.hpp"
#include "vinetraj/model.hpp"
#include "vinetraj/plant.hpp"
#include "vinetraj/reference.hpp"
#include "vinetraj/svg.hpp"
#include "vinetraj/sysid.hpp"
#include "vinetraj/trajopt.hpp"
