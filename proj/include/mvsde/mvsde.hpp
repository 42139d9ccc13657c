#pragma once

// Tamed Euler particle methods for McKean-Vlasov SDEs with jumps.

#include "mvsde/analysis.hpp"
#include "mvsde/checks.hpp"
#include "mvsde/ctmc.hpp"
#include "mvsde/engine.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/io.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/noise.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/picard.hpp"
#include "mvsde/presets.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mvsde
