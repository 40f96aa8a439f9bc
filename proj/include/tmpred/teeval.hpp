#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <vector>

namespace tmpred {

/// Directed capacitated graph over the network nodes.
struct Topology {
    struct Link {
        int src = 0;
        int dst = 0;
        double capacity = 0.0; // bytes per measurement interval
    };

    int node_count = 0;
    std::vector<Link> links;

    int link_count() const { return static_cast<int>(links.size()); }
    void validate() const;
};

/// Text format: `nodes <N>` then one `link <src> <dst> <capacity>` per
/// directed edge; `#` starts a comment.
Topology load_topology(const std::filesystem::path& path);
void write_topology(const std::filesystem::path& path, const Topology& topo);

enum class MluStatus { optimal, infeasible_demand_unroutable };

struct MluResult {
    MluStatus status = MluStatus::optimal;
    double mlu = 0.0;
    Eigen::VectorXd per_link_utilization; // aligned with Topology::links

    // Routing detail for audits: row i holds the per-link flow (bytes) of all
    // demands originating at sources[i].
    std::vector<int> sources;
    Eigen::MatrixXd source_flow;
};

/// Minimum maximum-link-utilization routing of `demand` (N x N, diagonal
/// ignored) as a node-arc multi-commodity flow LP, commodities aggregated by
/// source node. Demands between disconnected nodes yield the unroutable
/// status; an all-zero demand is optimal with mlu 0.
MluResult min_mlu(const Topology& topo, const Eigen::MatrixXd& demand);

/// min_mlu(pred) / min_mlu(truth). Throws DomainError when the truth MLU is
/// zero and UnroutableError when either solve is unroutable.
double mlu_bias(const Topology& topo, const Eigen::MatrixXd& truth,
                const Eigen::MatrixXd& pred);

struct AvgBiasResult {
    double value = 0.0;        // mean bias over usable windows
    int used = 0;
    int skipped_zero = 0;      // windows whose truth MLU was 0
    int skipped_unroutable = 0;
};

/// Mean per-window MLU bias. Windows with zero truth MLU or unroutable
/// demands are skipped and counted. Deterministic for any jobs value.
AvgBiasResult avg_mlu_bias(const Topology& topo,
                           const std::vector<Eigen::MatrixXd>& truths,
                           const std::vector<Eigen::MatrixXd>& preds, int jobs = 1);

void write_utilization_csv(const std::filesystem::path& path, const Topology& topo,
                           const MluResult& result);

} // namespace tmpred
