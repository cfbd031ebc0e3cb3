#pragma once

#include "loctomo/config.hpp"
#include "loctomo/error.hpp"
#include "loctomo/fbp.hpp"
#include "loctomo/filtering.hpp"
#include "loctomo/geometry.hpp"
#include "loctomo/io.hpp"
#include "loctomo/metrics.hpp"
#include "loctomo/mlp.hpp"
#include "loctomo/patch.hpp"
#include "loctomo/phantom.hpp"
#include "loctomo/pipeline.hpp"
#include "loctomo/projector.hpp"
#include "loctomo/random.hpp"
#include "loctomo/slices.hpp"
#include "loctomo/volume.hpp"
