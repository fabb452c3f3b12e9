#pragma once

#include "dvpool/error.hpp"
#include "dvpool/matrix.hpp"
#include "dvpool/metrics.hpp"
#include "dvpool/npy.hpp"
#include "dvpool/parallel.hpp"
#include "dvpool/pooling.hpp"
#include "dvpool/probe.hpp"
#include "dvpool/synth.hpp"
#include "dvpool/tensor.hpp"

namespace dvpool {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dvpool
