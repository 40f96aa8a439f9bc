#include "tmpred/synth.hpp"

#include <cmath>

#include "tmpred/errors.hpp"
#include "tmpred/rng.hpp"

namespace tmpred {

SynthResult make_regime_series(const SynthConfig& cfg) {
    if (cfg.node_count < 2) throw DomainError("need at least 2 nodes");
    if (cfg.steps < 4) throw DomainError("need at least 4 steps");

    const int n = cfg.node_count;
    const int flows = n * n;

    SynthResult out;
    out.series.node_count = n;
    out.series.interval_seconds = cfg.interval_seconds;
    out.series.timestamps.resize(static_cast<std::size_t>(cfg.steps));
    for (int t = 0; t < cfg.steps; ++t)
        out.series.timestamps[static_cast<std::size_t>(t)] =
            1600000000LL + static_cast<std::int64_t>(t) * cfg.interval_seconds;
    out.series.values.resize(cfg.steps, flows);
    out.regime_of_flow.resize(static_cast<std::size_t>(flows));

    for (int fid = 0; fid < flows; ++fid) {
        const int regime = fid % 3;
        out.regime_of_flow[static_cast<std::size_t>(fid)] = regime;
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(fid)));

        if (regime == 0) {
            // Clipped fast oscillation: the wave saturates at both rails, so
            // the normalized mass piles up near 0 and 1. The period fits
            // inside a 10-step history window, per-flow period and phase.
            const double base = rng.uniform(4e8, 5.5e8);
            const double amp = rng.uniform(1.5e8, 2.5e8);
            const double period = rng.uniform(8.0, 16.0);
            const double phase = rng.uniform(0.0, 2.0 * M_PI);
            for (int t = 0; t < cfg.steps; ++t) {
                const double wave =
                    std::clamp(1.4 * std::sin(2.0 * M_PI * t / period + phase), -1.0, 1.0);
                const double v = base + amp * wave + 5e6 * rng.normal();
                out.series.values(t, fid) = std::max(0.0, v);
            }
        } else if (regime == 1) {
            // Mean-reverting AR(1) around the dominant volume level: a
            // central hump. These flows drive the link loads.
            const double mean = rng.uniform(9e8, 1.1e9);
            const double coeff = rng.uniform(0.85, 0.95);
            const double sigma = 5e7;
            double x = mean;
            for (int t = 0; t < cfg.steps; ++t) {
                x = mean + coeff * (x - mean) + sigma * rng.normal();
                out.series.values(t, fid) = std::max(0.0, x);
            }
        } else {
            // Multiplicative AR(1) (geometric mean reversion): right-skewed,
            // mass concentrated low with a long high tail.
            const double mid = rng.uniform(1.5e8, 2.5e8);
            const double coeff = rng.uniform(0.85, 0.95);
            const double sigma_log = 0.25;
            double z = 0.0;
            for (int t = 0; t < cfg.steps; ++t) {
                z = coeff * z + sigma_log * rng.normal();
                out.series.values(t, fid) = mid * std::exp(z);
            }
        }
    }

    out.series.validate();
    return out;
}

} // namespace tmpred
