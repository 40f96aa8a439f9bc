#include "tmpred/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "tmpred/errors.hpp"
#include "tmpred/textio.hpp"

namespace tmpred {

const char* cluster_method_name(ClusterMethod m) {
    switch (m) {
        case ClusterMethod::source: return "source";
        case ClusterMethod::histogram: return "histogram";
        case ClusterMethod::entire_matrix: return "entire_matrix";
        case ClusterMethod::local: return "local";
    }
    return "unknown";
}

ClusterMethod cluster_method_from_name(const std::string& name) {
    if (name == "source") return ClusterMethod::source;
    if (name == "histogram") return ClusterMethod::histogram;
    if (name == "entire_matrix" || name == "em") return ClusterMethod::entire_matrix;
    if (name == "local") return ClusterMethod::local;
    throw ConfigError("unknown clustering method: " + name);
}

const char* linkage_name(Linkage l) {
    switch (l) {
        case Linkage::average: return "average";
        case Linkage::complete: return "complete";
        case Linkage::single: return "single";
    }
    return "unknown";
}

Linkage linkage_from_name(const std::string& name) {
    if (name == "average") return Linkage::average;
    if (name == "complete") return Linkage::complete;
    if (name == "single") return Linkage::single;
    throw ConfigError("unknown linkage: " + name);
}

void ClusterAssignment::validate() const {
    const int f = flow_count();
    if (f == 0) throw EmptyInputError("assignment has no flows");
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(f), 0);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        if (clusters[c].empty()) throw DomainError("empty cluster");
        for (int fid : clusters[c]) {
            if (fid < 0 || fid >= f) throw BoundsError("flow id out of range");
            if (seen[static_cast<std::size_t>(fid)])
                throw DomainError("flow " + std::to_string(fid) + " appears in two clusters");
            seen[static_cast<std::size_t>(fid)] = 1;
            if (flow_to_cluster[static_cast<std::size_t>(fid)] != static_cast<int>(c))
                throw DomainError("flow_to_cluster map is inconsistent");
        }
    }
    for (int fid = 0; fid < f; ++fid)
        if (!seen[static_cast<std::size_t>(fid)])
            throw DomainError("flow " + std::to_string(fid) + " is unassigned");

    if (method == ClusterMethod::entire_matrix && clusters.size() != 1)
        throw DomainError("entire_matrix assignment must have exactly 1 cluster");
    if (method == ClusterMethod::local && clusters.size() != static_cast<std::size_t>(f))
        throw DomainError("local assignment must have one cluster per flow");
    if (method == ClusterMethod::source) {
        const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(f))));
        if (n * n != f || clusters.size() != static_cast<std::size_t>(n))
            throw DomainError("source assignment must have N clusters over N^2 flows");
    }
}

ClusterAssignment make_assignment(ClusterMethod method,
                                  std::vector<std::vector<int>> clusters) {
    int f = 0;
    for (auto& c : clusters) {
        std::sort(c.begin(), c.end());
        for (int fid : c) f = std::max(f, fid + 1);
    }
    std::sort(clusters.begin(), clusters.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) {
                  if (a.empty() || b.empty()) return b.empty() && !a.empty();
                  return a.front() < b.front();
              });
    ClusterAssignment a;
    a.method = method;
    a.clusters = std::move(clusters);
    a.flow_to_cluster.assign(static_cast<std::size_t>(f), -1);
    for (std::size_t c = 0; c < a.clusters.size(); ++c)
        for (int fid : a.clusters[c]) a.flow_to_cluster[static_cast<std::size_t>(fid)] = static_cast<int>(c);
    a.validate();
    return a;
}

ClusterAssignment source_clusters(int node_count) {
    if (node_count < 1) throw DomainError("node_count must be at least 1");
    std::vector<std::vector<int>> clusters(static_cast<std::size_t>(node_count));
    for (int s = 0; s < node_count; ++s) {
        clusters[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(node_count));
        for (int d = 0; d < node_count; ++d)
            clusters[static_cast<std::size_t>(s)][static_cast<std::size_t>(d)] = s * node_count + d;
    }
    return make_assignment(ClusterMethod::source, std::move(clusters));
}

ClusterAssignment entire_matrix_cluster(int flow_count) {
    if (flow_count < 1) throw DomainError("flow_count must be at least 1");
    std::vector<int> all(static_cast<std::size_t>(flow_count));
    std::iota(all.begin(), all.end(), 0);
    return make_assignment(ClusterMethod::entire_matrix, {std::move(all)});
}

ClusterAssignment local_clusters(int flow_count) {
    if (flow_count < 1) throw DomainError("flow_count must be at least 1");
    std::vector<std::vector<int>> clusters(static_cast<std::size_t>(flow_count));
    for (int fid = 0; fid < flow_count; ++fid) clusters[static_cast<std::size_t>(fid)] = {fid};
    return make_assignment(ClusterMethod::local, std::move(clusters));
}

LinkageMatrix agglomerate(const DistanceMatrix& d, Linkage linkage) {
    d.validate();
    const int f = d.dim();
    if (f < 2) throw InsufficientDataError("need at least 2 points to agglomerate");

    // Slot-based working state: merging reuses the left slot, the right slot
    // becomes inactive.
    Eigen::MatrixXd work = d.d;
    std::vector<int> cluster_id(static_cast<std::size_t>(f));
    std::vector<int> size(static_cast<std::size_t>(f), 1);
    std::vector<std::uint8_t> active(static_cast<std::size_t>(f), 1);
    std::iota(cluster_id.begin(), cluster_id.end(), 0);

    LinkageMatrix out;
    out.leaf_count = f;
    out.merges.reserve(static_cast<std::size_t>(f - 1));

    for (int step = 0; step < f - 1; ++step) {
        double best = std::numeric_limits<double>::infinity();
        int best_i = -1, best_j = -1;
        int best_lo = 0, best_hi = 0;
        for (int i = 0; i < f; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            for (int j = i + 1; j < f; ++j) {
                if (!active[static_cast<std::size_t>(j)]) continue;
                const double dist = work(i, j);
                const int lo = std::min(cluster_id[static_cast<std::size_t>(i)],
                                        cluster_id[static_cast<std::size_t>(j)]);
                const int hi = std::max(cluster_id[static_cast<std::size_t>(i)],
                                        cluster_id[static_cast<std::size_t>(j)]);
                const bool better =
                    dist < best ||
                    (dist == best && (lo < best_lo || (lo == best_lo && hi < best_hi)));
                if (better) {
                    best = dist;
                    best_i = i;
                    best_j = j;
                    best_lo = lo;
                    best_hi = hi;
                }
            }
        }

        const int si = static_cast<int>(size[static_cast<std::size_t>(best_i)]);
        const int sj = static_cast<int>(size[static_cast<std::size_t>(best_j)]);
        out.merges.push_back({best_lo, best_hi, best, si + sj});

        for (int k = 0; k < f; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == best_i || k == best_j) continue;
            double nd = 0.0;
            switch (linkage) {
                case Linkage::average:
                    nd = (si * work(best_i, k) + sj * work(best_j, k)) / (si + sj);
                    break;
                case Linkage::complete:
                    nd = std::max(work(best_i, k), work(best_j, k));
                    break;
                case Linkage::single:
                    nd = std::min(work(best_i, k), work(best_j, k));
                    break;
            }
            work(best_i, k) = nd;
            work(k, best_i) = nd;
        }
        active[static_cast<std::size_t>(best_j)] = 0;
        size[static_cast<std::size_t>(best_i)] = si + sj;
        cluster_id[static_cast<std::size_t>(best_i)] = f + step;
    }
    return out;
}

ClusterAssignment cut_tree(const LinkageMatrix& l, double threshold) {
    if (threshold < 0.0) throw DomainError("threshold must be non-negative");
    const int f = l.leaf_count;
    if (f < 1) throw EmptyInputError("linkage has no leaves");

    // Union-find over node ids 0..2F-2; merge k joins its children under F+k.
    const int total = 2 * f - 1;
    std::vector<int> parent(static_cast<std::size_t>(total));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
        while (parent[static_cast<std::size_t>(v)] != v) {
            parent[static_cast<std::size_t>(v)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
            v = parent[static_cast<std::size_t>(v)];
        }
        return v;
    };
    for (std::size_t k = 0; k < l.merges.size(); ++k) {
        const auto& m = l.merges[k];
        if (!(m.distance < threshold)) continue;
        const int node = f + static_cast<int>(k);
        parent[static_cast<std::size_t>(find(m.left))] = node;
        parent[static_cast<std::size_t>(find(m.right))] = node;
    }

    std::map<int, std::vector<int>> groups; // root -> member leaves
    for (int leaf = 0; leaf < f; ++leaf) groups[find(leaf)].push_back(leaf);
    std::vector<std::vector<int>> clusters;
    clusters.reserve(groups.size());
    for (auto& [root, members] : groups) clusters.push_back(std::move(members));
    return make_assignment(ClusterMethod::histogram, std::move(clusters));
}

double largest_gap_threshold(const LinkageMatrix& l) {
    if (l.merges.empty()) return 0.0;
    if (l.merges.size() == 1) return l.merges[0].distance;
    double best_gap = -1.0;
    double threshold = l.merges.back().distance;
    for (std::size_t k = 0; k + 1 < l.merges.size(); ++k) {
        const double gap = l.merges[k + 1].distance - l.merges[k].distance;
        if (gap > best_gap) {
            best_gap = gap;
            threshold = 0.5 * (l.merges[k].distance + l.merges[k + 1].distance);
        }
    }
    return threshold;
}

ClusterSummary cluster_summary(const ClusterAssignment& a) {
    a.validate();
    ClusterSummary s;
    s.method = a.method;
    s.cluster_count = a.cluster_count();
    s.clusters = a.clusters;
    std::map<int, int> hist;
    for (const auto& c : a.clusters) {
        s.sizes.push_back(static_cast<int>(c.size()));
        ++hist[static_cast<int>(c.size())];
    }
    s.size_histogram.assign(hist.begin(), hist.end());
    return s;
}

std::string ClusterSummary::to_text() const {
    std::ostringstream out;
    out << "method " << cluster_method_name(method) << '\n';
    out << "clusters " << cluster_count << '\n';
    for (const auto& [size, freq] : size_histogram)
        out << "size " << size << " x" << freq << '\n';
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        out << "cluster " << c << " (" << clusters[c].size() << "):";
        for (int fid : clusters[c]) out << ' ' << fid;
        out << '\n';
    }
    return out.str();
}

void write_linkage_csv(const std::filesystem::path& path, const LinkageMatrix& l) {
    std::ostringstream out;
    out << "left,right,distance,size\n";
    for (const auto& m : l.merges)
        out << m.left << ',' << m.right << ',' << format_double(m.distance) << ','
            << m.size << '\n';
    write_text_file(path, out.str());
}

void write_assignment_csv(const std::filesystem::path& path, const ClusterAssignment& a) {
    std::ostringstream out;
    out << "# method=" << cluster_method_name(a.method) << '\n';
    out << "flow_id,cluster\n";
    for (int fid = 0; fid < a.flow_count(); ++fid)
        out << fid << ',' << a.flow_to_cluster[static_cast<std::size_t>(fid)] << '\n';
    write_text_file(path, out.str());
}

ClusterAssignment read_assignment_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open assignment file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    ClusterMethod method = ClusterMethod::histogram;
    bool have_header = false;
    std::map<int, std::vector<int>> groups;
    while (std::getline(in, line)) {
        ++line_no;
        auto text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            const std::string meta(text.substr(1));
            const auto eq = meta.find('=');
            if (eq != std::string::npos &&
                trim(std::string_view(meta).substr(0, eq)) == "method")
                method = cluster_method_from_name(
                    std::string(trim(std::string_view(meta).substr(eq + 1))));
            continue;
        }
        if (!have_header) {
            if (text != "flow_id,cluster") throw ParseError("expected 'flow_id,cluster' header", line_no);
            have_header = true;
            continue;
        }
        const auto fields = split(text, ',');
        int fid, cluster;
        if (fields.size() != 2 || !parse_int(trim(fields[0]), fid) ||
            !parse_int(trim(fields[1]), cluster))
            throw ParseError("expected 'flow_id,cluster' row", line_no);
        groups[cluster].push_back(fid);
    }
    if (groups.empty()) throw EmptyInputError("assignment file has no rows");
    std::vector<std::vector<int>> clusters;
    clusters.reserve(groups.size());
    for (auto& [cid, members] : groups) clusters.push_back(std::move(members));
    return make_assignment(method, std::move(clusters));
}

} // namespace tmpred
