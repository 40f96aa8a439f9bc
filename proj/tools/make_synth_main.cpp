#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tmpred/synth.hpp"
#include "tmpred/tmdata.hpp"

// Emits a synthetic canonical TM CSV with three planted flow regimes, handy
// for trying the pipeline without a real archive.
int main(int argc, char** argv) {
    CLI::App app{"synthetic traffic matrix generator"};
    std::string out = "synth.csv";
    tmpred::SynthConfig cfg;
    std::int64_t seed = static_cast<std::int64_t>(cfg.seed);
    app.add_option("--out", out, "output CSV path");
    app.add_option("--nodes", cfg.node_count, "node count");
    app.add_option("--steps", cfg.steps, "measurement intervals");
    app.add_option("--interval", cfg.interval_seconds, "seconds per interval");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);
    cfg.seed = static_cast<std::uint64_t>(seed);

    try {
        const auto result = tmpred::make_regime_series(cfg);
        tmpred::write_canonical(out, result.series);
        std::cout << "wrote " << out << " (" << result.series.length() << " steps, "
                  << result.series.flow_count() << " flows)\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
