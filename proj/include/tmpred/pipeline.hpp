#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tmpred/clusters.hpp"
#include "tmpred/forecast.hpp"
#include "tmpred/metrics.hpp"
#include "tmpred/teeval.hpp"

namespace tmpred {

/// Flat key=value run configuration. Stages write their outputs under
/// `out_dir` and later stages read the earlier stages' files from there.
struct RunConfig {
    std::string dataset;          // canonical TM CSV
    int node_count = 0;
    int interval_seconds = 300;
    double train_frac = 0.8;
    double val_frac = 0.1;        // fraction of the training samples
    int window_length = 11;       // 10 history steps + target
    ClusterMethod method = ClusterMethod::histogram;
    int bin_count = 50;
    Linkage linkage = Linkage::average;
    double cut_threshold = -1.0;  // < 0 selects the largest-gap threshold
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 0.001;
    int patience = 5;
    double min_delta = 1e-5;
    int hidden_dim = 30;
    std::uint64_t seed = 1;
    std::string topology;
    std::string out_dir = "run";
    int jobs = 1;

    TrainConfig train_config() const;
};

/// Parses a key=value file ('#' comments, unknown keys rejected).
RunConfig parse_config_file(const std::filesystem::path& path);
/// Applies a single key=value override (the CLI flag path).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

/// Canonical text form; manifests are written in this format and parse back
/// with parse_config_file.
std::string config_text(const RunConfig& cfg);
/// Fingerprint over the semantic keys (excludes out_dir and jobs, which do
/// not affect results).
std::uint64_t config_hash(const RunConfig& cfg);

struct IngestSummary {
    int node_count = 0;
    int flow_count = 0;
    std::size_t steps = 0;
    std::int64_t duration_seconds = 0;
    std::size_t nonzero_entries = 0;
    std::size_t total_cells = 0;

    std::string to_text() const;
};

/// Validates the dataset and writes out_dir/canonical.csv plus a summary.
IngestSummary cmd_ingest(const RunConfig& cfg);

struct ClusterOutput {
    ClusterAssignment assignment;
    ClusterSummary summary;
    double threshold_used = 0.0; // histogram method only
};

/// Writes assignment.csv, cluster_summary.txt and, for the histogram method,
/// linkage.csv. With `sweep`, also cut_sweep.csv (threshold vs cluster count).
ClusterOutput cmd_cluster(const RunConfig& cfg, bool sweep = false);

struct TrainOutput {
    PredictionSet predictions;
    std::filesystem::path predictions_path;
    std::filesystem::path manifest_path;
};

/// Trains per the stored assignment and writes predictions.csv, checkpoints,
/// train_reports.csv and manifest.txt.
TrainOutput cmd_train(const RunConfig& cfg);

struct EvaluateOutput {
    ErrorReport normalized;
    ErrorReport denormalized;
    AvgBiasResult bias;
};

/// Writes metrics.csv/metrics.txt, bias.csv, bias_series.csv, sampled flow
/// traces and TM heatmap grids.
EvaluateOutput cmd_evaluate(const RunConfig& cfg);

/// Aggregates metrics.csv and bias.csv rows from several run directories
/// into combined_metrics.csv and combined_bias.csv under out_dir.
void cmd_report(const std::vector<std::string>& run_dirs,
                const std::filesystem::path& out_dir);

} // namespace tmpred
