#pragma once

// Umbrella header: the full differentiable surfel rendering and inverse
// rendering toolkit.

#include "radsurf/brdf.hpp"
#include "radsurf/bvh.hpp"
#include "radsurf/camera.hpp"
#include "radsurf/config.hpp"
#include "radsurf/core.hpp"
#include "radsurf/cubemap.hpp"
#include "radsurf/grad.hpp"
#include "radsurf/image.hpp"
#include "radsurf/image_io.hpp"
#include "radsurf/losses.hpp"
#include "radsurf/metrics.hpp"
#include "radsurf/optim.hpp"
#include "radsurf/oracle.hpp"
#include "radsurf/parallel.hpp"
#include "radsurf/presets.hpp"
#include "radsurf/radiometry.hpp"
#include "radsurf/rng.hpp"
#include "radsurf/scene.hpp"
#include "radsurf/sh.hpp"
#include "radsurf/shading.hpp"
#include "radsurf/splitsum.hpp"
#include "radsurf/tracer.hpp"
