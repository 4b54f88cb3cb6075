#pragma once

// Everything in one include.

#include "eqmollify/core.hpp"
#include "eqmollify/quadrature.hpp"
#include "eqmollify/mollifier_kernel.hpp"
#include "eqmollify/ball_diffeomorphism.hpp"
#include "eqmollify/group_action.hpp"
#include "eqmollify/chart.hpp"
#include "eqmollify/currents.hpp"
#include "eqmollify/metric_fields.hpp"
#include "eqmollify/curvature.hpp"
#include "eqmollify/geometry_distances.hpp"
#include "eqmollify/scenarios.hpp"
#include "eqmollify/config.hpp"
#include "eqmollify/experiments.hpp"
