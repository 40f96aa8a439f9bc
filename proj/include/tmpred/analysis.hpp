#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tmpred/tmdata.hpp"

namespace tmpred {

/// Pearson correlation with an explicit validity flag: rho is the sentinel 0
/// with valid == false when either input has zero variance.
struct PearsonResult {
    double rho = 0.0;
    bool valid = false;
};

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Pairwise flow correlations. Entries where either flow has zero variance
/// are invalid (rho stored as 0). rho is clamped to [-1, 1].
struct CorrelationMatrix {
    Eigen::MatrixXd rho;             // F x F symmetric
    std::vector<std::uint8_t> valid; // F x F mask, row-major

    int dim() const { return static_cast<int>(rho.rows()); }
    bool is_valid(int i, int j) const {
        return valid[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim()) +
                     static_cast<std::size_t>(j)] != 0;
    }
};

CorrelationMatrix correlation_matrix(const std::vector<FlowSeries>& flows);

enum class PairGrouping { source, source_or_destination };

/// Fraction of the top `top_percent`% most correlated valid flow pairs that
/// share a source (or a source or destination). Pairs sort by rho descending,
/// ties by (flow_id_i, flow_id_j) ascending; the selection size is
/// ceil(top_percent/100 * pair_count). The flow grid must be square (F = N^2).
double same_source_fraction(const CorrelationMatrix& corr, double top_percent,
                            PairGrouping grouping);

struct StrongPair {
    int a = 0;
    int b = 0;
    double rho = 0.0;
};

/// All valid unordered pairs with rho >= threshold, sorted by rho descending
/// (ties by ascending ids).
std::vector<StrongPair> strong_pairs(const CorrelationMatrix& corr, double threshold);

/// Empirical distribution of a normalized flow over uniform bins of [0,1].
/// Bin k covers [k/B, (k+1)/B); the last bin is closed at 1.
struct FlowHistogram {
    int flow_id = -1;
    Eigen::VectorXd probs;

    int bin_count() const { return static_cast<int>(probs.size()); }
};

FlowHistogram flow_histogram(const std::vector<double>& normalized_values,
                             int bin_count, int flow_id = -1);

/// KL divergence D(p || m) in bits. Requires m to cover p's support.
double kl_divergence(const FlowHistogram& p, const FlowHistogram& m);

/// Jensen-Shannon divergence with base-2 logs: symmetric, in [0,1],
/// 0 iff identical, 1 for disjoint supports.
double jsd(const FlowHistogram& p, const FlowHistogram& q);

struct DistanceMatrix {
    Eigen::MatrixXd d; // symmetric, zero diagonal, entries in [0,1]

    int dim() const { return static_cast<int>(d.rows()); }
    void validate() const;
};

/// Pairwise JSD between all histograms. Deterministic for any jobs value.
DistanceMatrix jsd_distance_matrix(const std::vector<FlowHistogram>& histograms,
                                   int jobs = 1);

/// Square matrix export with a flow_id header row and column.
void write_square_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

} // namespace tmpred
