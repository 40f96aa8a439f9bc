#include "tmpred/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "tmpred/errors.hpp"
#include "tmpred/parallel.hpp"
#include "tmpred/textio.hpp"

namespace tmpred {

namespace fs = std::filesystem;

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.learning_rate = learning_rate;
    t.patience = patience;
    t.min_delta = min_delta;
    t.seed = seed;
    return t;
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto bad = [&](const char* what) {
        throw ConfigError(std::string("bad value for ") + key + ": " + value + " (" + what + ")");
    };
    if (key == "dataset") {
        cfg.dataset = value;
    } else if (key == "node_count") {
        if (!parse_int(value, cfg.node_count) || cfg.node_count < 1) bad("positive integer");
    } else if (key == "interval_seconds") {
        if (!parse_int(value, cfg.interval_seconds) || cfg.interval_seconds < 1)
            bad("positive integer");
    } else if (key == "train_frac") {
        if (!parse_double(value, cfg.train_frac)) bad("real");
    } else if (key == "val_frac") {
        if (!parse_double(value, cfg.val_frac)) bad("real");
    } else if (key == "window_length") {
        if (!parse_int(value, cfg.window_length) || cfg.window_length < 2) bad("integer >= 2");
    } else if (key == "method") {
        cfg.method = cluster_method_from_name(value);
    } else if (key == "bin_count") {
        if (!parse_int(value, cfg.bin_count) || cfg.bin_count < 1) bad("positive integer");
    } else if (key == "linkage") {
        cfg.linkage = linkage_from_name(value);
    } else if (key == "cut_threshold") {
        if (value == "auto") {
            cfg.cut_threshold = -1.0;
        } else if (!parse_double(value, cfg.cut_threshold) || cfg.cut_threshold < 0.0) {
            bad("non-negative real or 'auto'");
        }
    } else if (key == "epochs") {
        if (!parse_int(value, cfg.epochs) || cfg.epochs < 1) bad("positive integer");
    } else if (key == "batch_size") {
        if (!parse_int(value, cfg.batch_size) || cfg.batch_size < 1) bad("positive integer");
    } else if (key == "learning_rate") {
        if (!parse_double(value, cfg.learning_rate) || !(cfg.learning_rate > 0.0))
            bad("positive real");
    } else if (key == "patience") {
        if (!parse_int(value, cfg.patience) || cfg.patience < 1) bad("positive integer");
    } else if (key == "min_delta") {
        if (!parse_double(value, cfg.min_delta) || cfg.min_delta < 0.0) bad("non-negative real");
    } else if (key == "hidden_dim") {
        if (!parse_int(value, cfg.hidden_dim) || cfg.hidden_dim < 1) bad("positive integer");
    } else if (key == "seed") {
        std::int64_t s;
        if (!parse_int64(value, s) || s < 0) bad("non-negative integer");
        cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "topology") {
        cfg.topology = value;
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "jobs") {
        if (!parse_int(value, cfg.jobs) || cfg.jobs < 1) bad("positive integer");
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

RunConfig parse_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("expected key=value at line " + std::to_string(line_no) +
                              " of " + path.string());
        const std::string key(trim(text.substr(0, eq)));
        const std::string value(trim(text.substr(eq + 1)));
        apply_config_entry(cfg, key, value);
    }
    return cfg;
}

std::string config_text(const RunConfig& cfg) {
    std::ostringstream out;
    out << "dataset = " << cfg.dataset << '\n';
    out << "node_count = " << cfg.node_count << '\n';
    out << "interval_seconds = " << cfg.interval_seconds << '\n';
    out << "train_frac = " << format_double(cfg.train_frac) << '\n';
    out << "val_frac = " << format_double(cfg.val_frac) << '\n';
    out << "window_length = " << cfg.window_length << '\n';
    out << "method = " << cluster_method_name(cfg.method) << '\n';
    out << "bin_count = " << cfg.bin_count << '\n';
    out << "linkage = " << linkage_name(cfg.linkage) << '\n';
    if (cfg.cut_threshold < 0.0)
        out << "cut_threshold = auto\n";
    else
        out << "cut_threshold = " << format_double(cfg.cut_threshold) << '\n';
    out << "epochs = " << cfg.epochs << '\n';
    out << "batch_size = " << cfg.batch_size << '\n';
    out << "learning_rate = " << format_double(cfg.learning_rate) << '\n';
    out << "patience = " << cfg.patience << '\n';
    out << "min_delta = " << format_double(cfg.min_delta) << '\n';
    out << "hidden_dim = " << cfg.hidden_dim << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "topology = " << cfg.topology << '\n';
    out << "out_dir = " << cfg.out_dir << '\n';
    out << "jobs = " << cfg.jobs << '\n';
    return out.str();
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string text = config_text(cfg);
    const auto cut = text.find("out_dir = ");
    return fnv1a64(cut == std::string::npos ? std::string_view(text)
                                            : std::string_view(text).substr(0, cut));
}

namespace {

void require_dataset_fields(const RunConfig& cfg) {
    if (cfg.dataset.empty()) throw ConfigError("config key 'dataset' is required");
    if (cfg.node_count < 1) throw ConfigError("config key 'node_count' is required");
}

fs::path canonical_path(const RunConfig& cfg) {
    return fs::path(cfg.out_dir) / "canonical.csv";
}

TmSeries load_staged_series(const RunConfig& cfg) {
    const fs::path canon = canonical_path(cfg);
    if (!fs::exists(canon))
        throw InputError("missing " + canon.string() + "; run the ingest stage first");
    return ingest_canonical(canon, cfg.node_count, cfg.interval_seconds);
}

} // namespace

std::string IngestSummary::to_text() const {
    std::ostringstream out;
    out << "nodes=" << node_count << '\n';
    out << "flows=" << flow_count << '\n';
    out << "steps=" << steps << '\n';
    out << "duration_seconds=" << duration_seconds << '\n';
    out << "nonzero_entries=" << nonzero_entries << '\n';
    out << "total_cells=" << total_cells << '\n';
    out << "missing_or_zero_fraction="
        << format_double(total_cells == 0
                             ? 0.0
                             : 1.0 - static_cast<double>(nonzero_entries) /
                                         static_cast<double>(total_cells))
        << '\n';
    return out.str();
}

IngestSummary cmd_ingest(const RunConfig& cfg) {
    require_dataset_fields(cfg);
    if (!fs::exists(cfg.dataset)) throw InputError("dataset not found: " + cfg.dataset);
    const TmSeries tm = ingest_canonical(cfg.dataset, cfg.node_count, cfg.interval_seconds);

    IngestSummary s;
    s.node_count = tm.node_count;
    s.flow_count = tm.flow_count();
    s.steps = tm.length();
    s.duration_seconds =
        tm.length() < 2 ? 0 : tm.timestamps.back() - tm.timestamps.front();
    s.total_cells = tm.length() * static_cast<std::size_t>(tm.flow_count());
    s.nonzero_entries = 0;
    for (Eigen::Index i = 0; i < tm.values.size(); ++i)
        if (tm.values.data()[i] != 0.0) ++s.nonzero_entries;

    fs::create_directories(cfg.out_dir);
    write_canonical(canonical_path(cfg), tm);
    write_text_file(fs::path(cfg.out_dir) / "ingest_summary.txt", s.to_text());
    return s;
}

ClusterOutput cmd_cluster(const RunConfig& cfg, bool sweep) {
    require_dataset_fields(cfg);
    const TmSeries tm = load_staged_series(cfg);

    ClusterOutput out;
    if (cfg.method == ClusterMethod::source) {
        out.assignment = source_clusters(tm.node_count);
    } else if (cfg.method == ClusterMethod::entire_matrix) {
        out.assignment = entire_matrix_cluster(tm.flow_count());
    } else if (cfg.method == ClusterMethod::local) {
        out.assignment = local_clusters(tm.flow_count());
    } else {
        const SplitSizes sizes = split_sizes(tm.length(), cfg.train_frac, cfg.val_frac);
        const TmSeries train = tm.slice(0, sizes.train);
        const NormalizationParams norm = fit_normalization(train);

        std::vector<FlowHistogram> hists;
        hists.reserve(static_cast<std::size_t>(tm.flow_count()));
        std::vector<double> values(train.length());
        for (int fid = 0; fid < tm.flow_count(); ++fid) {
            for (std::size_t t = 0; t < train.length(); ++t)
                values[t] = normalize_value(
                    train.values(static_cast<Eigen::Index>(t), fid), norm, fid);
            hists.push_back(flow_histogram(values, cfg.bin_count, fid));
        }
        const DistanceMatrix dist = jsd_distance_matrix(hists, cfg.jobs);
        fs::create_directories(cfg.out_dir);
        write_square_csv(fs::path(cfg.out_dir) / "distance.csv", dist.d);
        const LinkageMatrix linkage = agglomerate(dist, cfg.linkage);
        out.threshold_used =
            cfg.cut_threshold < 0.0 ? largest_gap_threshold(linkage) : cfg.cut_threshold;
        out.assignment = cut_tree(linkage, out.threshold_used);
        write_linkage_csv(fs::path(cfg.out_dir) / "linkage.csv", linkage);

        if (sweep) {
            std::ostringstream table;
            table << "threshold,clusters\n";
            const double top = linkage.merges.empty() ? 1.0 : linkage.merges.back().distance;
            for (int k = 0; k <= 25; ++k) {
                const double level = top * static_cast<double>(k) / 25.0;
                table << format_double(level) << ','
                      << cut_tree(linkage, level).cluster_count() << '\n';
            }
            write_text_file(fs::path(cfg.out_dir) / "cut_sweep.csv", table.str());
        }
    }

    out.summary = cluster_summary(out.assignment);
    fs::create_directories(cfg.out_dir);
    write_assignment_csv(fs::path(cfg.out_dir) / "assignment.csv", out.assignment);
    std::ostringstream summary_text;
    summary_text << out.summary.to_text();
    if (cfg.method == ClusterMethod::histogram)
        summary_text << "cut_threshold " << format_double(out.threshold_used) << '\n';
    write_text_file(fs::path(cfg.out_dir) / "cluster_summary.txt", summary_text.str());
    return out;
}

TrainOutput cmd_train(const RunConfig& cfg) {
    require_dataset_fields(cfg);
    const TmSeries tm = load_staged_series(cfg);
    const fs::path assignment_path = fs::path(cfg.out_dir) / "assignment.csv";
    if (!fs::exists(assignment_path))
        throw InputError("missing " + assignment_path.string() +
                         "; run the cluster stage first");
    const ClusterAssignment assignment = read_assignment_csv(assignment_path);

    TrainOutput out;
    out.predictions = run_experiment(tm, assignment, cfg.train_config(), cfg.window_length,
                                     cfg.train_frac, cfg.val_frac, cfg.hidden_dim, cfg.jobs);

    // Predictions in the canonical TM schema, timestamped at the targets.
    TmSeries pred_series;
    pred_series.node_count = tm.node_count;
    pred_series.interval_seconds = tm.interval_seconds;
    pred_series.timestamps = out.predictions.target_timestamps;
    pred_series.values = out.predictions.predicted;
    out.predictions_path = fs::path(cfg.out_dir) / "predictions.csv";
    write_canonical(out.predictions_path, pred_series);

    const fs::path ckpt_dir = fs::path(cfg.out_dir) / "checkpoints";
    fs::create_directories(ckpt_dir);
    for (std::size_t c = 0; c < out.predictions.models.size(); ++c)
        save_checkpoint(ckpt_dir / ("cluster_" + std::to_string(c) + ".ckpt"),
                        out.predictions.models[c]);

    std::ostringstream reports;
    reports << "cluster,flows,epochs_run,best_epoch,stopped_early,final_train_loss,best_monitored_loss\n";
    for (std::size_t c = 0; c < out.predictions.reports.size(); ++c) {
        const TrainReport& r = out.predictions.reports[c];
        const double best = r.val_loss_curve.empty()
                                ? r.train_loss_curve[static_cast<std::size_t>(r.best_epoch)]
                                : r.val_loss_curve[static_cast<std::size_t>(r.best_epoch)];
        reports << c << ',' << out.predictions.assignment.clusters[c].size() << ','
                << r.epochs_run << ',' << r.best_epoch << ','
                << (r.stopped_early ? 1 : 0) << ','
                << format_double(r.train_loss_curve.back()) << ','
                << format_double(best) << '\n';
    }
    write_text_file(fs::path(cfg.out_dir) / "train_reports.csv", reports.str());

    std::ostringstream manifest;
    manifest << "# run manifest; parses as a config file\n";
    manifest << "# config_hash = " << to_hex(config_hash(cfg)) << '\n';
    manifest << "# split_train_steps = " << out.predictions.sizes.train << '\n';
    manifest << "# split_val_steps = " << out.predictions.sizes.val << '\n';
    manifest << "# split_test_steps = " << out.predictions.sizes.test << '\n';
    manifest << config_text(cfg);
    out.manifest_path = fs::path(cfg.out_dir) / "manifest.txt";
    write_text_file(out.manifest_path, manifest.str());
    return out;
}

EvaluateOutput cmd_evaluate(const RunConfig& cfg) {
    require_dataset_fields(cfg);
    const TmSeries tm = load_staged_series(cfg);
    const fs::path pred_path = fs::path(cfg.out_dir) / "predictions.csv";
    if (!fs::exists(pred_path))
        throw InputError("missing " + pred_path.string() + "; run the train stage first");
    if (cfg.topology.empty())
        throw ConfigError("config key 'topology' is required for evaluation");
    const Topology topo = load_topology(cfg.topology);
    if (topo.node_count != tm.node_count)
        throw DimensionError("topology node count does not match the dataset");

    const TmSeries pred = ingest_canonical(pred_path, cfg.node_count, cfg.interval_seconds);
    const SplitSizes sizes = split_sizes(tm.length(), cfg.train_frac, cfg.val_frac);
    if (pred.length() != sizes.test)
        throw DimensionError("predictions cover " + std::to_string(pred.length()) +
                             " windows, expected " + std::to_string(sizes.test));
    const std::size_t test_begin = sizes.train + sizes.val;
    for (std::size_t w = 0; w < pred.length(); ++w)
        if (pred.timestamps[w] != tm.timestamps[test_begin + w])
            throw OrderingError("prediction timestamps do not match the test split");

    const NormalizationParams norm = fit_normalization(tm.slice(0, sizes.train));
    const Eigen::MatrixXd truth =
        tm.values.middleRows(static_cast<Eigen::Index>(test_begin),
                             static_cast<Eigen::Index>(sizes.test));

    EvaluateOutput out;
    out.normalized = error_report(truth, pred.values, ErrorScope::normalized, &norm,
                                  nullptr, true);
    out.denormalized = error_report(truth, pred.values, ErrorScope::denormalized);

    std::vector<Eigen::MatrixXd> truth_mats, pred_mats;
    truth_mats.reserve(sizes.test);
    pred_mats.reserve(sizes.test);
    for (std::size_t w = 0; w < sizes.test; ++w) {
        truth_mats.push_back(tm.matrix_at(test_begin + w));
        pred_mats.push_back(pred.matrix_at(w));
    }
    out.bias = avg_mlu_bias(topo, truth_mats, pred_mats, cfg.jobs);

    const std::string method = cluster_method_name(cfg.method);
    std::ostringstream metrics;
    metrics << "method,seed,scope,rmse,mae,n\n";
    metrics << method << ',' << cfg.seed << ",normalized,"
            << format_double(out.normalized.rmse) << ',' << format_double(out.normalized.mae)
            << ',' << out.normalized.n << '\n';
    metrics << method << ',' << cfg.seed << ",denormalized,"
            << format_double(out.denormalized.rmse) << ','
            << format_double(out.denormalized.mae) << ',' << out.denormalized.n << '\n';
    write_text_file(fs::path(cfg.out_dir) / "metrics.csv", metrics.str());

    std::ostringstream kv;
    kv << "method=" << method << '\n' << "seed=" << cfg.seed << '\n';
    kv << "normalized_rmse=" << format_double(out.normalized.rmse) << '\n';
    kv << "normalized_mae=" << format_double(out.normalized.mae) << '\n';
    kv << "denormalized_rmse=" << format_double(out.denormalized.rmse) << '\n';
    kv << "denormalized_mae=" << format_double(out.denormalized.mae) << '\n';
    kv << "avg_mlu_bias=" << format_double(out.bias.value) << '\n';
    kv << "bias_windows_used=" << out.bias.used << '\n';
    kv << "bias_windows_skipped_zero=" << out.bias.skipped_zero << '\n';
    kv << "bias_windows_skipped_unroutable=" << out.bias.skipped_unroutable << '\n';
    write_text_file(fs::path(cfg.out_dir) / "metrics.txt", kv.str());

    std::ostringstream bias_csv;
    bias_csv << "method,seed,avg_bias,used,skipped_zero,skipped_unroutable\n";
    bias_csv << method << ',' << cfg.seed << ',' << format_double(out.bias.value) << ','
             << out.bias.used << ',' << out.bias.skipped_zero << ','
             << out.bias.skipped_unroutable << '\n';
    write_text_file(fs::path(cfg.out_dir) / "bias.csv", bias_csv.str());

    // Per-window bias series (solved in parallel, written in order).
    struct WindowBias {
        double truth_mlu = 0.0, pred_mlu = 0.0;
        int flag = 0; // 0 ok, 1 zero-truth, 2 unroutable
    };
    std::vector<WindowBias> series(sizes.test);
    parallel_for(sizes.test, cfg.jobs, [&](std::size_t w) {
        const MluResult t = min_mlu(topo, truth_mats[w]);
        if (t.status != MluStatus::optimal) {
            series[w].flag = 2;
            return;
        }
        series[w].truth_mlu = t.mlu;
        if (t.mlu <= 0.0) {
            series[w].flag = 1;
            return;
        }
        const MluResult p = min_mlu(topo, pred_mats[w]);
        if (p.status != MluStatus::optimal) {
            series[w].flag = 2;
            return;
        }
        series[w].pred_mlu = p.mlu;
    });
    std::ostringstream bias_series;
    bias_series << "window,timestamp,truth_mlu,pred_mlu,bias,skipped\n";
    for (std::size_t w = 0; w < sizes.test; ++w) {
        const auto& s = series[w];
        bias_series << w << ',' << pred.timestamps[w] << ','
                    << format_double(s.truth_mlu) << ',' << format_double(s.pred_mlu) << ',';
        if (s.flag == 0)
            bias_series << format_double(s.pred_mlu / s.truth_mlu) << ",0\n";
        else
            bias_series << "," << s.flag << '\n';
    }
    write_text_file(fs::path(cfg.out_dir) / "bias_series.csv", bias_series.str());

    // Sampled flow traces: the highest-volume and the median-volume flow of
    // the training split.
    const Eigen::VectorXd train_mean =
        tm.values.topRows(static_cast<Eigen::Index>(sizes.train)).colwise().mean();
    std::vector<int> by_volume(static_cast<std::size_t>(tm.flow_count()));
    std::iota(by_volume.begin(), by_volume.end(), 0);
    std::sort(by_volume.begin(), by_volume.end(), [&](int a, int b) {
        if (train_mean[a] != train_mean[b]) return train_mean[a] > train_mean[b];
        return a < b;
    });
    const fs::path traces = fs::path(cfg.out_dir) / "traces";
    fs::create_directories(traces);
    for (const int fid : {by_volume.front(), by_volume[by_volume.size() / 2]}) {
        std::ostringstream trace;
        trace << "window,timestamp,truth,prediction\n";
        for (std::size_t w = 0; w < sizes.test; ++w)
            trace << w << ',' << pred.timestamps[w] << ','
                  << format_double(tm.values(static_cast<Eigen::Index>(test_begin + w), fid))
                  << ',' << format_double(pred.values(static_cast<Eigen::Index>(w), fid))
                  << '\n';
        write_text_file(traces / ("flow_" + std::to_string(fid) + ".csv"), trace.str());
    }

    // Heatmap grids for two representative windows: the first test window and
    // the busiest one.
    std::size_t busiest = 0;
    double busiest_sum = -1.0;
    for (std::size_t w = 0; w < sizes.test; ++w) {
        const double sum = truth_mats[w].sum();
        if (sum > busiest_sum) {
            busiest_sum = sum;
            busiest = w;
        }
    }
    // Per-link utilizations of the optimally routed busiest truth window.
    const MluResult busiest_mlu = min_mlu(topo, truth_mats[busiest]);
    if (busiest_mlu.status == MluStatus::optimal)
        write_utilization_csv(fs::path(cfg.out_dir) / "utilization_busiest.csv", topo,
                              busiest_mlu);

    const fs::path heatmaps = fs::path(cfg.out_dir) / "heatmaps";
    fs::create_directories(heatmaps);
    auto write_grid = [&](const fs::path& path, const Eigen::MatrixXd& m) {
        std::ostringstream grid;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                if (j) grid << ',';
                grid << format_double(m(i, j));
            }
            grid << '\n';
        }
        write_text_file(path, grid.str());
    };
    for (const std::size_t w : {std::size_t{0}, busiest}) {
        write_grid(heatmaps / ("window_" + std::to_string(w) + "_truth.csv"), truth_mats[w]);
        write_grid(heatmaps / ("window_" + std::to_string(w) + "_pred.csv"), pred_mats[w]);
    }
    return out;
}

void cmd_report(const std::vector<std::string>& run_dirs, const fs::path& out_dir) {
    if (run_dirs.empty()) throw EmptyInputError("no run directories given");
    std::vector<std::string> metric_rows, bias_rows;
    for (const auto& dir : run_dirs) {
        for (const auto& [file, rows] :
             {std::pair{std::string("metrics.csv"), &metric_rows},
              std::pair{std::string("bias.csv"), &bias_rows}}) {
            const fs::path path = fs::path(dir) / file;
            if (!fs::exists(path))
                throw InputError("missing " + path.string() + "; run the evaluate stage first");
            std::istringstream in(read_text_file(path));
            std::string line;
            bool first = true;
            while (std::getline(in, line)) {
                if (first) {
                    first = false;
                    continue;
                }
                if (!trim(line).empty()) rows->push_back(std::string(trim(line)));
            }
        }
    }
    std::sort(metric_rows.begin(), metric_rows.end());
    std::sort(bias_rows.begin(), bias_rows.end());

    fs::create_directories(out_dir);
    std::ostringstream metrics;
    metrics << "method,seed,scope,rmse,mae,n\n";
    for (const auto& r : metric_rows) metrics << r << '\n';
    write_text_file(out_dir / "combined_metrics.csv", metrics.str());
    std::ostringstream bias;
    bias << "method,seed,avg_bias,used,skipped_zero,skipped_unroutable\n";
    for (const auto& r : bias_rows) bias << r << '\n';
    write_text_file(out_dir / "combined_bias.csv", bias.str());
}

} // namespace tmpred
