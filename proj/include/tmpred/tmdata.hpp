#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace tmpred {

/// Ordered sequence of N x N traffic matrices, one per measurement interval.
/// Row t of `values` is the matrix at timestamps[t] flattened row-major, so
/// column s*N + d holds the volume from node s to node d (bytes per interval).
struct TmSeries {
    int node_count = 0;
    int interval_seconds = 0;
    std::vector<std::int64_t> timestamps; // strictly increasing epoch-seconds
    Eigen::MatrixXd values;               // T x N*N, non-negative finite

    int flow_count() const { return node_count * node_count; }
    std::size_t length() const { return timestamps.size(); }

    double at(std::size_t t, int src, int dst) const {
        return values(static_cast<Eigen::Index>(t), src * node_count + dst);
    }

    /// N x N matrix at step t.
    Eigen::MatrixXd matrix_at(std::size_t t) const;

    /// Sub-series of steps [begin, end).
    TmSeries slice(std::size_t begin, std::size_t end) const;

    /// Throws InputError subclasses when an invariant is broken.
    void validate() const;
};

/// One (source, destination) traffic flow as a scalar time series.
struct FlowSeries {
    int src = 0;
    int dst = 0;
    int flow_id = 0; // src * N + dst
    std::vector<double> values;
};

/// Per-flow min/max over the training split. Flows with max == min are
/// constant: they normalize to 0 and denormalize back to their constant.
struct NormalizationParams {
    Eigen::VectorXd per_flow_min;
    Eigen::VectorXd per_flow_max;

    int flow_count() const { return static_cast<int>(per_flow_min.size()); }
    bool is_constant(int flow_id) const {
        return !(per_flow_max[flow_id] > per_flow_min[flow_id]);
    }
};

/// Sliding-window supervised dataset over a flow subset. `data` holds the
/// normalized, clamped series (D rows, one column per entry of flow_ids).
/// Window w covers rows [window_starts[w], window_starts[w] + L): the first
/// L-1 rows are input steps, the last row is the target.
struct WindowedDataset {
    int window_length = 0;                      // L
    std::vector<int> flow_ids;                  // original flow ids per column
    std::shared_ptr<const Eigen::MatrixXd> data;
    std::vector<int> window_starts;

    int window_count() const { return static_cast<int>(window_starts.size()); }
    int input_steps() const { return window_length - 1; }
    int flow_dim() const { return static_cast<int>(flow_ids.size()); }
    const Eigen::MatrixXd& matrix() const { return *data; }

    /// Input step k (0 <= k < L-1) of window w, one value per flow.
    Eigen::MatrixXd::ConstRowXpr input_step(int w, int k) const {
        return data->row(window_starts[static_cast<std::size_t>(w)] + k);
    }
    /// Prediction target of window w.
    Eigen::MatrixXd::ConstRowXpr target(int w) const {
        return data->row(window_starts[static_cast<std::size_t>(w)] + window_length - 1);
    }
    /// Time index (row of the source series) of window w's target.
    int target_index(int w) const {
        return window_starts[static_cast<std::size_t>(w)] + window_length - 1;
    }

    /// Same data, restricted to the given window indices.
    WindowedDataset subset(const std::vector<int>& window_indices) const;
};

/// Reads the canonical TM CSV (header `timestamp,src,dst,bytes`, one row per
/// nonzero entry, timestamps ascending). Missing (src,dst) entries are 0.
TmSeries ingest_canonical(const std::filesystem::path& path, int node_count,
                          int interval_seconds);

/// Writes a series in the canonical format (zero entries omitted).
void write_canonical(const std::filesystem::path& path, const TmSeries& tm);

/// All N^2 flows in flow_id order; flows[s*N+d].values[t] == tm at (t,s,d).
std::vector<FlowSeries> extract_flows(const TmSeries& tm);

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

/// Step counts for a chronological train/val/test split:
/// train = floor((1-val_frac)*train_frac*T), train+val = floor(train_frac*T).
/// Throws SplitError when train or test is empty, or when a requested
/// validation split comes out empty.
SplitSizes split_sizes(std::size_t total, double train_frac, double val_frac_of_train);

struct SplitSeries {
    TmSeries train;
    TmSeries val; // empty when val_frac_of_train == 0
    TmSeries test;
};

SplitSeries chronological_split(const TmSeries& tm, double train_frac,
                                double val_frac_of_train);

/// Min/max per flow over the given (training) series.
NormalizationParams fit_normalization(const TmSeries& train);

/// (v - min)/(max - min), clamped to [0,1]; constant flows map to 0.
double normalize_value(double v, const NormalizationParams& p, int flow_id);
/// Inverse of normalize_value on the training range; constant flows return
/// their constant.
double denormalize_value(double v, const NormalizationParams& p, int flow_id);

std::vector<double> normalize(const std::vector<double>& values,
                              const NormalizationParams& p, int flow_id);

/// Builds the W = D - L + 1 sliding windows over the selected flows,
/// normalized with `p`. Requires L >= 2 and D >= L.
WindowedDataset build_windows(const TmSeries& tm, const NormalizationParams& p,
                              const std::vector<int>& flow_ids, int window_length);

struct WindowSplit {
    WindowedDataset train;
    WindowedDataset val;
    WindowedDataset test;
};

/// Partitions windows by target step: targets in [0, train) go to train,
/// [train, train+val) to val, the rest to test. Val/test inputs may reach
/// back across the boundary; targets never leak forward.
WindowSplit split_windows(const WindowedDataset& all, const SplitSizes& sizes);

} // namespace tmpred
