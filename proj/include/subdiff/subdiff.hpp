#pragma once

// Umbrella header.

#include "subdiff/errors.hpp"
#include "subdiff/scene.hpp"
#include "subdiff/quadrature.hpp"
#include "subdiff/optics.hpp"
#include "subdiff/channels.hpp"
#include "subdiff/random.hpp"
#include "subdiff/detect.hpp"
#include "subdiff/sim.hpp"
#include "subdiff/config.hpp"
#include "subdiff/report.hpp"
#include "subdiff/experiments.hpp"
