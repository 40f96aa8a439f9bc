#pragma once

#include <cstdint>
#include <vector>

#include "tmpred/tmdata.hpp"

namespace tmpred {

/// Synthetic TM series with planted flow regimes, used for pipeline demos
/// and end-to-end verification. Three regimes with distinct distributions
/// and dynamics:
///   0: fast clipped oscillation (mass at both rails),
///   1: mean-reverting AR(1) around the dominant volume level,
///   2: multiplicative AR(1), right-skewed with a long high tail.
/// Flow (s,d) belongs to regime (s*N+d) mod 3, so regimes cut across
/// sources. All values are non-negative bytes.
struct SynthConfig {
    int node_count = 6;
    int steps = 2000;
    int interval_seconds = 300;
    std::uint64_t seed = 7;
};

struct SynthResult {
    TmSeries series;
    std::vector<int> regime_of_flow; // length N^2, values in {0,1,2}
};

SynthResult make_regime_series(const SynthConfig& cfg);

} // namespace tmpred
