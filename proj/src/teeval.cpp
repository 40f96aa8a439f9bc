#include "tmpred/teeval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "tmpred/errors.hpp"
#include "tmpred/lp.hpp"
#include "tmpred/parallel.hpp"
#include "tmpred/textio.hpp"

namespace tmpred {

void Topology::validate() const {
    if (node_count <= 0) throw DimensionError("node_count must be positive");
    std::set<std::pair<int, int>> seen;
    for (const auto& l : links) {
        if (l.src < 0 || l.src >= node_count || l.dst < 0 || l.dst >= node_count)
            throw BoundsError("link endpoint out of range");
        if (l.src == l.dst) throw DomainError("self-loop links are not allowed");
        if (!(l.capacity > 0.0) || !std::isfinite(l.capacity))
            throw DomainError("link capacity must be positive and finite");
        if (!seen.insert({l.src, l.dst}).second)
            throw DomainError("duplicate link " + std::to_string(l.src) + "->" +
                              std::to_string(l.dst));
    }
}

Topology load_topology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open topology file: " + path.string());
    Topology topo;
    bool have_nodes = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto text = trim(line);
        const auto hash = text.find('#');
        if (hash != std::string_view::npos) text = trim(text.substr(0, hash));
        if (text.empty()) continue;
        std::vector<std::string_view> parts;
        for (auto piece : split(text, ' '))
            if (!trim(piece).empty()) parts.push_back(trim(piece));
        if (parts[0] == "nodes") {
            if (have_nodes) throw ParseError("duplicate 'nodes' directive", line_no);
            if (parts.size() != 2 || !parse_int(parts[1], topo.node_count))
                throw ParseError("expected 'nodes <N>'", line_no);
            have_nodes = true;
        } else if (parts[0] == "link") {
            if (!have_nodes) throw ParseError("'link' before 'nodes'", line_no);
            Topology::Link l;
            if (parts.size() != 4 || !parse_int(parts[1], l.src) ||
                !parse_int(parts[2], l.dst) || !parse_double(parts[3], l.capacity))
                throw ParseError("expected 'link <src> <dst> <capacity>'", line_no);
            topo.links.push_back(l);
        } else {
            throw ParseError("unknown directive '" + std::string(parts[0]) + "'", line_no);
        }
    }
    if (!have_nodes) throw ParseError("missing 'nodes' directive in " + path.string());
    topo.validate();
    return topo;
}

void write_topology(const std::filesystem::path& path, const Topology& topo) {
    std::ostringstream out;
    out << "nodes " << topo.node_count << '\n';
    for (const auto& l : topo.links)
        out << "link " << l.src << ' ' << l.dst << ' ' << format_double(l.capacity) << '\n';
    write_text_file(path, out.str());
}

namespace {

std::vector<std::uint8_t> reachable_from(const Topology& topo, int start) {
    std::vector<std::vector<int>> out_adj(static_cast<std::size_t>(topo.node_count));
    for (const auto& l : topo.links) out_adj[static_cast<std::size_t>(l.src)].push_back(l.dst);
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(topo.node_count), 0);
    std::queue<int> q;
    q.push(start);
    seen[static_cast<std::size_t>(start)] = 1;
    while (!q.empty()) {
        const int v = q.front();
        q.pop();
        for (int w : out_adj[static_cast<std::size_t>(v)]) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                q.push(w);
            }
        }
    }
    return seen;
}

} // namespace

MluResult min_mlu(const Topology& topo, const Eigen::MatrixXd& demand) {
    topo.validate();
    const int n = topo.node_count;
    const int e = topo.link_count();
    if (demand.rows() != n || demand.cols() != n)
        throw DimensionError("demand matrix does not match the topology");
    for (int s = 0; s < n; ++s)
        for (int d = 0; d < n; ++d) {
            if (s == d) continue; // diagonal ignored
            const double v = demand(s, d);
            if (!std::isfinite(v) || v < 0.0)
                throw DomainError("demands must be finite and non-negative");
        }

    MluResult out;
    out.per_link_utilization = Eigen::VectorXd::Zero(e);

    // Commodities aggregated by source node; exact for the min-MLU objective.
    std::vector<int> sources;
    double dscale = 0.0;
    for (int s = 0; s < n; ++s) {
        double total = 0.0;
        for (int d = 0; d < n; ++d)
            if (d != s) total += demand(s, d);
        if (total > 0.0) sources.push_back(s);
        for (int d = 0; d < n; ++d)
            if (d != s) dscale = std::max(dscale, demand(s, d));
    }
    if (sources.empty()) {
        out.status = MluStatus::optimal;
        return out;
    }

    for (int s : sources) {
        const auto reach = reachable_from(topo, s);
        for (int d = 0; d < n; ++d)
            if (d != s && demand(s, d) > 0.0 && !reach[static_cast<std::size_t>(d)]) {
                out.status = MluStatus::infeasible_demand_unroutable;
                return out;
            }
    }

    double cscale = 0.0;
    for (const auto& l : topo.links) cscale = std::max(cscale, l.capacity);

    const auto num_sources = static_cast<Eigen::Index>(sources.size());
    const Eigen::Index vars = num_sources * e + 1; // flows + U
    const Eigen::Index rows = num_sources * n + e;
    const Eigen::Index u_var = vars - 1;

    LpProblem lp;
    lp.a = Eigen::MatrixXd::Zero(rows, vars);
    lp.b = Eigen::VectorXd::Zero(rows);
    lp.c = Eigen::VectorXd::Zero(vars);
    lp.c(u_var) = 1.0;
    lp.sense.assign(static_cast<std::size_t>(rows), LpSense::equal);

    for (Eigen::Index i = 0; i < num_sources; ++i) {
        const int s = sources[static_cast<std::size_t>(i)];
        for (int ei = 0; ei < e; ++ei) {
            const auto& l = topo.links[static_cast<std::size_t>(ei)];
            lp.a(i * n + l.src, i * e + ei) += 1.0;
            lp.a(i * n + l.dst, i * e + ei) -= 1.0;
        }
        double supply = 0.0;
        for (int d = 0; d < n; ++d) {
            if (d == s) continue;
            const double dem = demand(s, d) / dscale;
            supply += dem;
            if (dem > 0.0) lp.b(i * n + d) = -dem;
        }
        lp.b(i * n + s) = supply;
    }
    for (int ei = 0; ei < e; ++ei) {
        const Eigen::Index row = num_sources * n + ei;
        for (Eigen::Index i = 0; i < num_sources; ++i) lp.a(row, i * e + ei) = 1.0;
        lp.a(row, u_var) = -topo.links[static_cast<std::size_t>(ei)].capacity / cscale;
        lp.sense[static_cast<std::size_t>(row)] = LpSense::less_equal;
    }

    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::optimal)
        throw SolverError("min_mlu LP did not reach optimality (status " +
                          std::to_string(static_cast<int>(sol.status)) + ")");

    out.sources = sources;
    out.source_flow = Eigen::MatrixXd::Zero(num_sources, e);
    for (Eigen::Index i = 0; i < num_sources; ++i)
        for (int ei = 0; ei < e; ++ei)
            out.source_flow(i, ei) = std::max(0.0, sol.x(i * e + ei)) * dscale;

    for (int ei = 0; ei < e; ++ei) {
        const double load = out.source_flow.col(ei).sum();
        out.per_link_utilization(ei) = load / topo.links[static_cast<std::size_t>(ei)].capacity;
    }
    out.mlu = out.per_link_utilization.maxCoeff();
    out.status = MluStatus::optimal;
    return out;
}

double mlu_bias(const Topology& topo, const Eigen::MatrixXd& truth,
                const Eigen::MatrixXd& pred) {
    const MluResult t = min_mlu(topo, truth);
    if (t.status != MluStatus::optimal)
        throw UnroutableError("ground-truth demand is unroutable");
    if (t.mlu <= 0.0) throw DomainError("bias undefined: ground-truth MLU is 0");
    const MluResult p = min_mlu(topo, pred);
    if (p.status != MluStatus::optimal)
        throw UnroutableError("predicted demand is unroutable");
    return p.mlu / t.mlu;
}

AvgBiasResult avg_mlu_bias(const Topology& topo,
                           const std::vector<Eigen::MatrixXd>& truths,
                           const std::vector<Eigen::MatrixXd>& preds, int jobs) {
    if (truths.size() != preds.size()) throw DimensionError("window counts differ");
    if (truths.empty()) throw EmptyInputError("no windows");

    enum class Outcome { ok, zero_truth, unroutable };
    std::vector<double> bias(truths.size(), 0.0);
    std::vector<Outcome> outcome(truths.size(), Outcome::ok);
    parallel_for(truths.size(), jobs, [&](std::size_t w) {
        const MluResult t = min_mlu(topo, truths[w]);
        if (t.status != MluStatus::optimal) {
            outcome[w] = Outcome::unroutable;
            return;
        }
        if (t.mlu <= 0.0) {
            outcome[w] = Outcome::zero_truth;
            return;
        }
        const MluResult p = min_mlu(topo, preds[w]);
        if (p.status != MluStatus::optimal) {
            outcome[w] = Outcome::unroutable;
            return;
        }
        bias[w] = p.mlu / t.mlu;
    });

    AvgBiasResult out;
    double sum = 0.0;
    for (std::size_t w = 0; w < truths.size(); ++w) {
        switch (outcome[w]) {
            case Outcome::ok:
                sum += bias[w];
                ++out.used;
                break;
            case Outcome::zero_truth:
                ++out.skipped_zero;
                break;
            case Outcome::unroutable:
                ++out.skipped_unroutable;
                break;
        }
    }
    if (out.used == 0) throw EmptyInputError("every window was skipped");
    out.value = sum / out.used;
    return out;
}

void write_utilization_csv(const std::filesystem::path& path, const Topology& topo,
                           const MluResult& result) {
    std::ostringstream out;
    out << "src,dst,capacity,utilization\n";
    for (int ei = 0; ei < topo.link_count(); ++ei) {
        const auto& l = topo.links[static_cast<std::size_t>(ei)];
        out << l.src << ',' << l.dst << ',' << format_double(l.capacity) << ','
            << format_double(result.per_link_utilization.size() > ei
                                 ? result.per_link_utilization(ei)
                                 : 0.0)
            << '\n';
    }
    write_text_file(path, out.str());
}

} // namespace tmpred
