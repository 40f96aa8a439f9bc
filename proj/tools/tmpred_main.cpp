#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tmpred/errors.hpp"
#include "tmpred/pipeline.hpp"
#include "tmpred/textio.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string method;
    std::int64_t seed = -1;
    int jobs = 0;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key=value config file");
    cmd->add_option("--method", flags.method, "source|histogram|em|local")
        ->check(CLI::IsMember({"source", "histogram", "em", "local"}));
    cmd->add_option("--seed", flags.seed, "global seed override");
    cmd->add_option("--jobs", flags.jobs, "worker threads");
    cmd->add_option("--out", flags.out, "output directory override");
}

tmpred::RunConfig resolve_config(const CommonFlags& flags) {
    tmpred::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = tmpred::parse_config_file(flags.config_path);
    if (!flags.method.empty()) tmpred::apply_config_entry(cfg, "method", flags.method);
    if (flags.seed >= 0)
        tmpred::apply_config_entry(cfg, "seed", std::to_string(flags.seed));
    if (flags.jobs > 0) tmpred::apply_config_entry(cfg, "jobs", std::to_string(flags.jobs));
    if (!flags.out.empty()) tmpred::apply_config_entry(cfg, "out_dir", flags.out);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"traffic matrix prediction via flow clustering"};
    app.require_subcommand(1);

    CommonFlags ingest_flags, cluster_flags, train_flags, eval_flags;
    bool sweep = false;
    std::vector<std::string> report_runs;
    std::string report_out = ".";

    auto* ingest = app.add_subcommand("ingest", "validate and canonicalize a dataset");
    add_common(ingest, ingest_flags);
    auto* cluster = app.add_subcommand("cluster", "build the flow cluster assignment");
    add_common(cluster, cluster_flags);
    cluster->add_flag("--sweep", sweep, "emit a threshold vs cluster-count table");
    auto* train = app.add_subcommand("train", "train forecasters and predict the test split");
    add_common(train, train_flags);
    auto* evaluate = app.add_subcommand("evaluate", "error metrics and MLU bias of predictions");
    add_common(evaluate, eval_flags);
    auto* report = app.add_subcommand("report", "aggregate metrics across run directories");
    report->add_option("--runs", report_runs, "run directories to aggregate")->required();
    report->add_option("--out", report_out, "directory for the combined tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (ingest->parsed()) {
            const auto summary = tmpred::cmd_ingest(resolve_config(ingest_flags));
            std::cout << summary.to_text();
        } else if (cluster->parsed()) {
            const auto out = tmpred::cmd_cluster(resolve_config(cluster_flags), sweep);
            std::cout << "clusters " << out.summary.cluster_count << '\n';
        } else if (train->parsed()) {
            const auto cfg = resolve_config(train_flags);
            const auto out = tmpred::cmd_train(cfg);
            std::cout << "models " << out.predictions.models.size() << '\n';
            std::cout << "test_windows " << out.predictions.window_count() << '\n';
            std::cout << "predictions " << out.predictions_path.string() << '\n';
        } else if (evaluate->parsed()) {
            const auto out = tmpred::cmd_evaluate(resolve_config(eval_flags));
            std::cout << "normalized_rmse " << tmpred::format_double(out.normalized.rmse)
                      << '\n';
            std::cout << "normalized_mae " << tmpred::format_double(out.normalized.mae)
                      << '\n';
            std::cout << "avg_mlu_bias " << tmpred::format_double(out.bias.value) << '\n';
        } else if (report->parsed()) {
            tmpred::cmd_report(report_runs, report_out);
            std::cout << "combined tables written to " << report_out << '\n';
        }
    } catch (const tmpred::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
