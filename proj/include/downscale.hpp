#pragma once

#include "downscale/array2d.hpp"
#include "downscale/config.hpp"
#include "downscale/date.hpp"
#include "downscale/demo.hpp"
#include "downscale/error.hpp"
#include "downscale/geostat.hpp"
#include "downscale/manifest.hpp"
#include "downscale/metrics.hpp"
#include "downscale/npy.hpp"
#include "downscale/parallel.hpp"
#include "downscale/pipeline.hpp"
#include "downscale/predictor.hpp"
#include "downscale/raster.hpp"
#include "downscale/regrid.hpp"
#include "downscale/reports.hpp"
#include "downscale/similarity.hpp"
#include "downscale/stitch.hpp"
#include "downscale/synthetic.hpp"
#include "downscale/temporal.hpp"
