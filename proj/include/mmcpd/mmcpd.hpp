#pragma once

#include "mmcpd/data_io.hpp"
#include "mmcpd/error.hpp"
#include "mmcpd/estimator.hpp"
#include "mmcpd/limits.hpp"
#include "mmcpd/linalg.hpp"
#include "mmcpd/moment_model.hpp"
#include "mmcpd/montecarlo.hpp"
#include "mmcpd/random.hpp"
#include "mmcpd/zprocess.hpp"
