#pragma once

#include "sbss/error.hpp"
#include "sbss/matrix.hpp"
#include "sbss/linalg.hpp"
#include "sbss/special.hpp"
#include "sbss/kernels.hpp"
#include "sbss/estimator.hpp"
#include "sbss/rng.hpp"
#include "sbss/simulate.hpp"
#include "sbss/metrics.hpp"
#include "sbss/dataio.hpp"
#include "sbss/montecarlo.hpp"

namespace sbss {
inline constexpr const char* kVersion = "0.1.0";
}
