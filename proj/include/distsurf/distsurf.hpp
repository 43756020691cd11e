#pragma once

#include "distsurf/denoise.hpp"
#include "distsurf/derivatives.hpp"
#include "distsurf/distance_transform.hpp"
#include "distsurf/error.hpp"
#include "distsurf/event_io.hpp"
#include "distsurf/events.hpp"
#include "distsurf/flow_io.hpp"
#include "distsurf/flow_solver.hpp"
#include "distsurf/grid.hpp"
#include "distsurf/imu.hpp"
#include "distsurf/metrics.hpp"
#include "distsurf/pipeline.hpp"
#include "distsurf/render.hpp"
#include "distsurf/simulator.hpp"
