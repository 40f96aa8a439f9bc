#include "tmpred/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tmpred/errors.hpp"
#include "tmpred/parallel.hpp"
#include "tmpred/textio.hpp"

namespace tmpred {

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DimensionError("pearson: length mismatch");
    if (x.size() < 2) throw DimensionError("pearson: need at least 2 samples");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return {0.0, false};
    const double rho = sxy / std::sqrt(sxx * syy);
    return {std::clamp(rho, -1.0, 1.0), true};
}

CorrelationMatrix correlation_matrix(const std::vector<FlowSeries>& flows) {
    if (flows.size() < 2) throw DimensionError("need at least 2 flows");
    const auto f = static_cast<Eigen::Index>(flows.size());
    const auto t = static_cast<Eigen::Index>(flows[0].values.size());
    if (t < 2) throw DimensionError("flows must have at least 2 samples");
    Eigen::MatrixXd x(t, f);
    for (Eigen::Index j = 0; j < f; ++j) {
        const auto& v = flows[static_cast<std::size_t>(j)].values;
        if (static_cast<Eigen::Index>(v.size()) != t)
            throw DimensionError("flows have unequal lengths");
        for (Eigen::Index i = 0; i < t; ++i) x(i, j) = v[static_cast<std::size_t>(i)];
    }
    x.rowwise() -= x.colwise().mean();
    const Eigen::MatrixXd gram = x.transpose() * x;

    CorrelationMatrix out;
    out.rho = Eigen::MatrixXd::Zero(f, f);
    out.valid.assign(static_cast<std::size_t>(f * f), 0);
    for (Eigen::Index i = 0; i < f; ++i) {
        if (!(gram(i, i) > 0.0)) continue;
        out.rho(i, i) = 1.0;
        out.valid[static_cast<std::size_t>(i * f + i)] = 1;
        for (Eigen::Index j = i + 1; j < f; ++j) {
            if (!(gram(j, j) > 0.0)) continue;
            // sqrt of the product (not the product of sqrts) so identical
            // flows come out at exactly 1
            const double r =
                std::clamp(gram(i, j) / std::sqrt(gram(i, i) * gram(j, j)), -1.0, 1.0);
            out.rho(i, j) = r;
            out.rho(j, i) = r;
            out.valid[static_cast<std::size_t>(i * f + j)] = 1;
            out.valid[static_cast<std::size_t>(j * f + i)] = 1;
        }
    }
    return out;
}

namespace {

struct RankedPair {
    double rho;
    int a;
    int b;
};

std::vector<RankedPair> valid_pairs(const CorrelationMatrix& corr) {
    std::vector<RankedPair> pairs;
    const int f = corr.dim();
    for (int i = 0; i < f; ++i)
        for (int j = i + 1; j < f; ++j)
            if (corr.is_valid(i, j)) pairs.push_back({corr.rho(i, j), i, j});
    return pairs;
}

void sort_by_rho_desc(std::vector<RankedPair>& pairs) {
    std::sort(pairs.begin(), pairs.end(), [](const RankedPair& l, const RankedPair& r) {
        if (l.rho != r.rho) return l.rho > r.rho;
        if (l.a != r.a) return l.a < r.a;
        return l.b < r.b;
    });
}

} // namespace

double same_source_fraction(const CorrelationMatrix& corr, double top_percent,
                            PairGrouping grouping) {
    if (!(top_percent > 0.0 && top_percent <= 100.0))
        throw DomainError("top_percent must be in (0,100]");
    const int f = corr.dim();
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(f))));
    if (n * n != f) throw DimensionError("flow count is not a square (expected N^2 flows)");

    auto pairs = valid_pairs(corr);
    if (pairs.empty()) throw EmptyInputError("no valid flow pairs");
    sort_by_rho_desc(pairs);

    const auto take = std::min<std::size_t>(
        pairs.size(),
        static_cast<std::size_t>(
            std::ceil(top_percent / 100.0 * static_cast<double>(pairs.size()) - 1e-12)));
    const std::size_t count = std::max<std::size_t>(take, 1);

    std::size_t hits = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const int sa = pairs[k].a / n, da = pairs[k].a % n;
        const int sb = pairs[k].b / n, db = pairs[k].b % n;
        const bool same = grouping == PairGrouping::source
                              ? sa == sb
                              : (sa == sb || da == db);
        if (same) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(count);
}

std::vector<StrongPair> strong_pairs(const CorrelationMatrix& corr, double threshold) {
    if (threshold < -1.0 || threshold > 1.0)
        throw DomainError("threshold must be in [-1,1]");
    auto pairs = valid_pairs(corr);
    sort_by_rho_desc(pairs);
    std::vector<StrongPair> out;
    for (const auto& p : pairs)
        if (p.rho >= threshold) out.push_back({p.a, p.b, p.rho});
    return out;
}

FlowHistogram flow_histogram(const std::vector<double>& normalized_values,
                             int bin_count, int flow_id) {
    if (bin_count < 1) throw DomainError("bin_count must be at least 1");
    if (normalized_values.empty()) throw EmptyInputError("no values to histogram");
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(bin_count);
    for (double v : normalized_values) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("values must lie in [0,1]");
        auto bin = static_cast<int>(std::floor(v * bin_count));
        if (bin >= bin_count) bin = bin_count - 1; // v == 1 joins the last bin
        counts[bin] += 1.0;
    }
    FlowHistogram h;
    h.flow_id = flow_id;
    h.probs = counts / static_cast<double>(normalized_values.size());
    return h;
}

double kl_divergence(const FlowHistogram& p, const FlowHistogram& m) {
    if (p.bin_count() != m.bin_count()) throw DimensionError("bin counts differ");
    double sum = 0.0;
    for (int k = 0; k < p.bin_count(); ++k) {
        const double pk = p.probs[k];
        if (pk <= 0.0) continue; // lim p->0 of p*log(p) is 0
        const double mk = m.probs[k];
        if (mk <= 0.0) throw DomainError("support violation: m has zero mass where p > 0");
        sum += pk * std::log2(pk / mk);
    }
    return sum;
}

double jsd(const FlowHistogram& p, const FlowHistogram& q) {
    if (p.bin_count() != q.bin_count()) throw DimensionError("bin counts differ");
    FlowHistogram mix;
    mix.probs = 0.5 * (p.probs + q.probs);
    const double v = 0.5 * kl_divergence(p, mix) + 0.5 * kl_divergence(q, mix);
    return std::clamp(v, 0.0, 1.0);
}

void DistanceMatrix::validate() const {
    if (d.rows() != d.cols()) throw DimensionError("distance matrix must be square");
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (std::abs(d(i, i)) > 1e-12) throw DomainError("distance diagonal must be zero");
        for (Eigen::Index j = 0; j < d.cols(); ++j) {
            if (d(i, j) < 0.0 || d(i, j) > 1.0 || !std::isfinite(d(i, j)))
                throw DomainError("distances must lie in [0,1]");
            if (std::abs(d(i, j) - d(j, i)) > 1e-12)
                throw DomainError("distance matrix must be symmetric");
        }
    }
}

DistanceMatrix jsd_distance_matrix(const std::vector<FlowHistogram>& histograms,
                                   int jobs) {
    if (histograms.size() < 2) throw DimensionError("need at least 2 histograms");
    const auto f = static_cast<Eigen::Index>(histograms.size());
    const int bins = histograms[0].bin_count();
    for (const auto& h : histograms)
        if (h.bin_count() != bins) throw DimensionError("bin counts differ");

    DistanceMatrix out;
    out.d = Eigen::MatrixXd::Zero(f, f);
    parallel_for(static_cast<std::size_t>(f), jobs, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < static_cast<std::size_t>(f); ++j) {
            const double v = jsd(histograms[i], histograms[j]);
            out.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            out.d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    });
    return out;
}

void write_square_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw DimensionError("matrix must be square");
    std::ostringstream out;
    out << "flow_id";
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << j;
    out << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out << i;
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
        out << '\n';
    }
    write_text_file(path, out.str());
}

} // namespace tmpred
