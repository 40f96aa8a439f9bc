#include "tmpred/tmdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tmpred/errors.hpp"
#include "tmpred/textio.hpp"

namespace tmpred {

Eigen::MatrixXd TmSeries::matrix_at(std::size_t t) const {
    Eigen::MatrixXd m(node_count, node_count);
    for (int s = 0; s < node_count; ++s)
        for (int d = 0; d < node_count; ++d)
            m(s, d) = values(static_cast<Eigen::Index>(t), s * node_count + d);
    return m;
}

TmSeries TmSeries::slice(std::size_t begin, std::size_t end) const {
    TmSeries out;
    out.node_count = node_count;
    out.interval_seconds = interval_seconds;
    out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                          timestamps.begin() + static_cast<std::ptrdiff_t>(end));
    out.values = values.middleRows(static_cast<Eigen::Index>(begin),
                                   static_cast<Eigen::Index>(end - begin));
    return out;
}

void TmSeries::validate() const {
    if (node_count <= 0) throw DimensionError("node_count must be positive");
    if (interval_seconds <= 0) throw DimensionError("interval_seconds must be positive");
    if (values.rows() != static_cast<Eigen::Index>(timestamps.size()))
        throw DimensionError("matrix count does not match timestamp count");
    if (values.cols() != flow_count())
        throw DimensionError("matrices are not node_count x node_count");
    for (std::size_t t = 1; t < timestamps.size(); ++t)
        if (timestamps[t] <= timestamps[t - 1])
            throw OrderingError("timestamps must be strictly increasing");
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double v = values.data()[i];
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("matrix entries must be finite and non-negative");
    }
}

TmSeries ingest_canonical(const std::filesystem::path& path, int node_count,
                          int interval_seconds) {
    if (node_count <= 0) throw DimensionError("node_count must be positive");
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path.string());

    const int flows = node_count * node_count;
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw EmptyInputError("no records in " + path.string());
    ++line_no;
    if (trim(line) != "timestamp,src,dst,bytes")
        throw ParseError("expected header 'timestamp,src,dst,bytes'", line_no);

    std::vector<std::int64_t> timestamps;
    std::vector<Eigen::VectorXd> rows;
    std::vector<std::uint8_t> seen; // per current timestamp group
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;
        const auto fields = split(text, ',');
        if (fields.size() != 4) throw ParseError("expected 4 comma-separated fields", line_no);
        std::int64_t ts;
        int src, dst;
        double bytes;
        if (!parse_int64(trim(fields[0]), ts)) throw ParseError("bad timestamp", line_no);
        if (!parse_int(trim(fields[1]), src)) throw ParseError("bad src", line_no);
        if (!parse_int(trim(fields[2]), dst)) throw ParseError("bad dst", line_no);
        if (!parse_double(trim(fields[3]), bytes)) throw ParseError("bad bytes value", line_no);
        if (src < 0 || src >= node_count)
            throw BoundsError("src index " + std::to_string(src) + " out of range [0," +
                              std::to_string(node_count) + ") at line " + std::to_string(line_no));
        if (dst < 0 || dst >= node_count)
            throw BoundsError("dst index " + std::to_string(dst) + " out of range [0," +
                              std::to_string(node_count) + ") at line " + std::to_string(line_no));
        if (!std::isfinite(bytes) || bytes < 0.0)
            throw ParseError("bytes must be finite and non-negative", line_no);

        if (timestamps.empty() || ts != timestamps.back()) {
            if (!timestamps.empty() && ts < timestamps.back())
                throw OrderingError("timestamps must be ascending (line " +
                                    std::to_string(line_no) + ")");
            timestamps.push_back(ts);
            rows.emplace_back(Eigen::VectorXd::Zero(flows));
            seen.assign(static_cast<std::size_t>(flows), 0);
        }
        const int fid = src * node_count + dst;
        if (seen[static_cast<std::size_t>(fid)])
            throw ParseError("duplicate entry for (timestamp,src,dst)", line_no);
        seen[static_cast<std::size_t>(fid)] = 1;
        rows.back()[fid] = bytes;
    }
    if (timestamps.empty()) throw EmptyInputError("no records in " + path.string());

    TmSeries tm;
    tm.node_count = node_count;
    tm.interval_seconds = interval_seconds;
    tm.timestamps = std::move(timestamps);
    tm.values.resize(static_cast<Eigen::Index>(rows.size()), flows);
    for (std::size_t t = 0; t < rows.size(); ++t)
        tm.values.row(static_cast<Eigen::Index>(t)) = rows[t].transpose();
    tm.validate();
    return tm;
}

void write_canonical(const std::filesystem::path& path, const TmSeries& tm) {
    std::ostringstream out;
    out << "timestamp,src,dst,bytes\n";
    for (std::size_t t = 0; t < tm.length(); ++t) {
        for (int s = 0; s < tm.node_count; ++s) {
            for (int d = 0; d < tm.node_count; ++d) {
                const double v = tm.at(t, s, d);
                if (v == 0.0) continue;
                out << tm.timestamps[t] << ',' << s << ',' << d << ','
                    << format_double(v) << '\n';
            }
        }
    }
    write_text_file(path, out.str());
}

std::vector<FlowSeries> extract_flows(const TmSeries& tm) {
    if (tm.length() == 0) throw EmptyInputError("series is empty");
    const int n = tm.node_count;
    std::vector<FlowSeries> flows(static_cast<std::size_t>(tm.flow_count()));
    for (int s = 0; s < n; ++s) {
        for (int d = 0; d < n; ++d) {
            FlowSeries& f = flows[static_cast<std::size_t>(s * n + d)];
            f.src = s;
            f.dst = d;
            f.flow_id = s * n + d;
            f.values.resize(tm.length());
            for (std::size_t t = 0; t < tm.length(); ++t)
                f.values[t] = tm.values(static_cast<Eigen::Index>(t), f.flow_id);
        }
    }
    return flows;
}

SplitSizes split_sizes(std::size_t total, double train_frac, double val_frac_of_train) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw DomainError("train_frac must be in (0,1)");
    if (!(val_frac_of_train >= 0.0 && val_frac_of_train < 1.0))
        throw DomainError("val_frac_of_train must be in [0,1)");
    const double t = static_cast<double>(total);
    // The epsilon absorbs representation noise in products like 0.8*0.9*T.
    const auto train = static_cast<std::size_t>(
        std::floor((1.0 - val_frac_of_train) * train_frac * t + 1e-9));
    const auto train_val = static_cast<std::size_t>(std::floor(train_frac * t + 1e-9));
    SplitSizes sizes;
    sizes.train = train;
    sizes.val = train_val - train;
    sizes.test = total - train_val;
    if (sizes.train == 0) throw SplitError("training split is empty");
    if (sizes.test == 0) throw SplitError("test split is empty");
    if (val_frac_of_train > 0.0 && sizes.val == 0)
        throw SplitError("validation split is empty");
    return sizes;
}

SplitSeries chronological_split(const TmSeries& tm, double train_frac,
                                double val_frac_of_train) {
    const SplitSizes s = split_sizes(tm.length(), train_frac, val_frac_of_train);
    SplitSeries out;
    out.train = tm.slice(0, s.train);
    out.val = tm.slice(s.train, s.train + s.val);
    out.test = tm.slice(s.train + s.val, tm.length());
    return out;
}

NormalizationParams fit_normalization(const TmSeries& train) {
    if (train.length() == 0) throw EmptyInputError("training series is empty");
    NormalizationParams p;
    p.per_flow_min = train.values.colwise().minCoeff();
    p.per_flow_max = train.values.colwise().maxCoeff();
    return p;
}

double normalize_value(double v, const NormalizationParams& p, int flow_id) {
    if (flow_id < 0 || flow_id >= p.flow_count())
        throw BoundsError("flow_id out of range");
    if (p.is_constant(flow_id)) return 0.0;
    const double lo = p.per_flow_min[flow_id];
    const double hi = p.per_flow_max[flow_id];
    const double x = (v - lo) / (hi - lo);
    return std::clamp(x, 0.0, 1.0);
}

double denormalize_value(double v, const NormalizationParams& p, int flow_id) {
    if (flow_id < 0 || flow_id >= p.flow_count())
        throw BoundsError("flow_id out of range");
    if (p.is_constant(flow_id)) return p.per_flow_min[flow_id];
    return v * (p.per_flow_max[flow_id] - p.per_flow_min[flow_id]) + p.per_flow_min[flow_id];
}

std::vector<double> normalize(const std::vector<double>& values,
                              const NormalizationParams& p, int flow_id) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = normalize_value(values[i], p, flow_id);
    return out;
}

WindowedDataset build_windows(const TmSeries& tm, const NormalizationParams& p,
                              const std::vector<int>& flow_ids, int window_length) {
    if (window_length < 2) throw DomainError("window_length must be at least 2");
    const auto steps = static_cast<int>(tm.length());
    if (steps < window_length)
        throw InsufficientDataError("series has " + std::to_string(steps) +
                                    " steps, need at least " + std::to_string(window_length));
    if (flow_ids.empty()) throw EmptyInputError("no flows selected");
    for (int fid : flow_ids)
        if (fid < 0 || fid >= tm.flow_count()) throw BoundsError("flow_id out of range");
    if (p.flow_count() != tm.flow_count())
        throw DimensionError("normalization params do not match the series");

    auto data = std::make_shared<Eigen::MatrixXd>(
        static_cast<Eigen::Index>(tm.length()), static_cast<Eigen::Index>(flow_ids.size()));
    for (std::size_t c = 0; c < flow_ids.size(); ++c) {
        const int fid = flow_ids[c];
        for (std::size_t t = 0; t < tm.length(); ++t)
            (*data)(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) =
                normalize_value(tm.values(static_cast<Eigen::Index>(t), fid), p, fid);
    }

    WindowedDataset ds;
    ds.window_length = window_length;
    ds.flow_ids = flow_ids;
    ds.data = std::move(data);
    const int windows = steps - window_length + 1;
    ds.window_starts.resize(static_cast<std::size_t>(windows));
    for (int w = 0; w < windows; ++w) ds.window_starts[static_cast<std::size_t>(w)] = w;
    return ds;
}

WindowedDataset WindowedDataset::subset(const std::vector<int>& window_indices) const {
    WindowedDataset out;
    out.window_length = window_length;
    out.flow_ids = flow_ids;
    out.data = data;
    out.window_starts.reserve(window_indices.size());
    for (int w : window_indices) {
        if (w < 0 || w >= window_count()) throw BoundsError("window index out of range");
        out.window_starts.push_back(window_starts[static_cast<std::size_t>(w)]);
    }
    return out;
}

WindowSplit split_windows(const WindowedDataset& all, const SplitSizes& sizes) {
    WindowSplit out;
    out.train = all;
    out.val = all;
    out.test = all;
    out.train.window_starts.clear();
    out.val.window_starts.clear();
    out.test.window_starts.clear();
    for (int w = 0; w < all.window_count(); ++w) {
        const auto target = static_cast<std::size_t>(all.target_index(w));
        const int start = all.window_starts[static_cast<std::size_t>(w)];
        if (target < sizes.train)
            out.train.window_starts.push_back(start);
        else if (target < sizes.train + sizes.val)
            out.val.window_starts.push_back(start);
        else
            out.test.window_starts.push_back(start);
    }
    return out;
}

} // namespace tmpred
