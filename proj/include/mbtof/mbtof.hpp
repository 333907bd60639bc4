#pragma once

#include "mbtof/band_plan.hpp"
#include "mbtof/channel.hpp"
#include "mbtof/core.hpp"
#include "mbtof/csi_pipeline.hpp"
#include "mbtof/csv_io.hpp"
#include "mbtof/estimator.hpp"
#include "mbtof/experiment.hpp"
#include "mbtof/follow.hpp"
#include "mbtof/hop_protocol.hpp"
#include "mbtof/localization.hpp"
#include "mbtof/ndft.hpp"
#include "mbtof/scenario.hpp"
#include "mbtof/spline.hpp"
#include "mbtof/tof_solver.hpp"
