#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tmpred/analysis.hpp"

namespace tmpred {

enum class ClusterMethod { source, histogram, entire_matrix, local };

const char* cluster_method_name(ClusterMethod m);
ClusterMethod cluster_method_from_name(const std::string& name);

/// Disjoint partition of the flow ids {0..F-1}. Clusters are listed in order
/// of their smallest member and each member list is sorted.
struct ClusterAssignment {
    ClusterMethod method = ClusterMethod::local;
    std::vector<std::vector<int>> clusters;
    std::vector<int> flow_to_cluster;

    int flow_count() const { return static_cast<int>(flow_to_cluster.size()); }
    int cluster_count() const { return static_cast<int>(clusters.size()); }
    void validate() const;
};

/// Builds flow_to_cluster, normalizes ordering and validates the partition.
ClusterAssignment make_assignment(ClusterMethod method,
                                  std::vector<std::vector<int>> clusters);

/// N clusters; cluster s holds flows {s*N+d : d in 0..N-1}.
ClusterAssignment source_clusters(int node_count);
/// One cluster holding every flow.
ClusterAssignment entire_matrix_cluster(int flow_count);
/// F singleton clusters.
ClusterAssignment local_clusters(int flow_count);

enum class Linkage { average, complete, single };

const char* linkage_name(Linkage l);
Linkage linkage_from_name(const std::string& name);

/// One agglomerative merge step. Ids 0..F-1 are leaves; merge k creates
/// cluster id F+k. left < right.
struct LinkageMerge {
    int left = 0;
    int right = 0;
    double distance = 0.0;
    int size = 0; // leaves in the merged cluster
};

struct LinkageMatrix {
    int leaf_count = 0;
    std::vector<LinkageMerge> merges; // F-1 rows
};

/// Standard agglomerative clustering of a distance matrix. At each step the
/// pair of clusters with minimal linkage distance merges; ties break on the
/// smallest (left, right) cluster-id pair.
LinkageMatrix agglomerate(const DistanceMatrix& d, Linkage linkage = Linkage::average);

/// Partition induced by all merges with distance strictly below `threshold`.
ClusterAssignment cut_tree(const LinkageMatrix& l, double threshold);

/// Midpoint of the widest gap between consecutive merge distances, the
/// natural dendrogram cut. With a single merge, returns that distance
/// (cutting strictly below it keeps the leaves separate).
double largest_gap_threshold(const LinkageMatrix& l);

struct ClusterSummary {
    ClusterMethod method = ClusterMethod::local;
    int cluster_count = 0;
    std::vector<int> sizes;                      // per cluster, in cluster order
    std::vector<std::pair<int, int>> size_histogram; // (size, frequency), size asc
    std::vector<std::vector<int>> clusters;

    std::string to_text() const;
};

ClusterSummary cluster_summary(const ClusterAssignment& a);

/// 4-column dendrogram interchange: left,right,distance,size.
void write_linkage_csv(const std::filesystem::path& path, const LinkageMatrix& l);

void write_assignment_csv(const std::filesystem::path& path, const ClusterAssignment& a);
ClusterAssignment read_assignment_csv(const std::filesystem::path& path);

} // namespace tmpred
