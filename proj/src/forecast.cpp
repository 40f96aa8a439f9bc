#include "tmpred/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tmpred/errors.hpp"
#include "tmpred/parallel.hpp"
#include "tmpred/rng.hpp"
#include "tmpred/textio.hpp"

namespace tmpred {

namespace {

// Offsets of the parameter tensors inside theta.
struct Layout {
    int f = 0, h = 0;
    int wz, wr, wh, uz, ur, uh, bz, br, bh, wo, bo, total;

    Layout(int input_dim, int hidden_dim) : f(input_dim), h(hidden_dim) {
        int at = 0;
        wz = at; at += h * f;
        wr = at; at += h * f;
        wh = at; at += h * f;
        uz = at; at += h * h;
        ur = at; at += h * h;
        uh = at; at += h * h;
        bz = at; at += h;
        br = at; at += h;
        bh = at; at += h;
        wo = at; at += f * h;
        bo = at; at += f;
        total = at;
    }
};

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) {
    return 1.0 / (1.0 + (-x).exp());
}

} // namespace

int GruForecaster::param_count(int input_dim, int hidden_dim) {
    return Layout(input_dim, hidden_dim).total;
}

#define TMPRED_MAT_VIEW(name, offset, r, c)                                        \
    GruForecaster::MatView GruForecaster::name() {                                 \
        Layout lo(input_dim, hidden_dim);                                          \
        return MatView(theta.data() + lo.offset, lo.r, lo.c);                      \
    }                                                                              \
    GruForecaster::ConstMatView GruForecaster::name() const {                      \
        Layout lo(input_dim, hidden_dim);                                          \
        return ConstMatView(theta.data() + lo.offset, lo.r, lo.c);                 \
    }

#define TMPRED_VEC_VIEW(name, offset, r)                                           \
    GruForecaster::VecView GruForecaster::name() {                                 \
        Layout lo(input_dim, hidden_dim);                                          \
        return VecView(theta.data() + lo.offset, lo.r);                            \
    }                                                                              \
    GruForecaster::ConstVecView GruForecaster::name() const {                      \
        Layout lo(input_dim, hidden_dim);                                          \
        return ConstVecView(theta.data() + lo.offset, lo.r);                       \
    }

TMPRED_MAT_VIEW(w_update, wz, h, f)
TMPRED_MAT_VIEW(w_reset, wr, h, f)
TMPRED_MAT_VIEW(w_cand, wh, h, f)
TMPRED_MAT_VIEW(u_update, uz, h, h)
TMPRED_MAT_VIEW(u_reset, ur, h, h)
TMPRED_MAT_VIEW(u_cand, uh, h, h)
TMPRED_VEC_VIEW(b_update, bz, h)
TMPRED_VEC_VIEW(b_reset, br, h)
TMPRED_VEC_VIEW(b_cand, bh, h)
TMPRED_MAT_VIEW(w_out, wo, f, h)
TMPRED_VEC_VIEW(b_out, bo, f)

#undef TMPRED_MAT_VIEW
#undef TMPRED_VEC_VIEW

GruForecaster init_forecaster(int input_dim, int hidden_dim, std::uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1)
        throw DomainError("model dimensions must be at least 1");
    GruForecaster m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.seed = seed;
    m.theta = Eigen::VectorXd::Zero(m.param_count());

    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    Rng rng(seed);
    auto fill = [&](GruForecaster::MatView v) {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            v.data()[i] = rng.uniform(-bound, bound);
    };
    fill(m.w_update());
    fill(m.w_reset());
    fill(m.w_cand());
    fill(m.u_update());
    fill(m.u_reset());
    fill(m.u_cand());
    fill(m.w_out());
    // biases stay zero
    return m;
}

namespace {

// Step-major forward over a batch, optionally caching activations for BPTT.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> h;       // h[0] is the zero initial state
    std::vector<Eigen::MatrixXd> z, r, g; // per step
};

Eigen::MatrixXd forward_batch(const GruForecaster& m,
                              const std::vector<Eigen::MatrixXd>& steps,
                              ForwardCache* cache) {
    const int hidden = m.hidden_dim;
    const auto batch = static_cast<Eigen::Index>(steps.empty() ? 0 : steps[0].cols());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden, batch);
    if (cache) {
        cache->h.clear();
        cache->z.clear();
        cache->r.clear();
        cache->g.clear();
        cache->h.push_back(h);
    }
    const auto wz = m.w_update(), wr = m.w_reset(), wh = m.w_cand();
    const auto uz = m.u_update(), ur = m.u_reset(), uh = m.u_cand();
    const auto bz = m.b_update(), br = m.b_reset(), bh = m.b_cand();
    for (const auto& x : steps) {
        if (x.rows() != m.input_dim || x.cols() != batch)
            throw DimensionError("window dimensions do not match the model");
        const Eigen::MatrixXd z =
            sigmoid(((wz * x + uz * h).colwise() + bz).array()).matrix();
        const Eigen::MatrixXd r =
            sigmoid(((wr * x + ur * h).colwise() + br).array()).matrix();
        const Eigen::MatrixXd g =
            ((wh * x + uh * (r.array() * h.array()).matrix()).colwise() + bh)
                .array()
                .tanh()
                .matrix();
        h = ((1.0 - z.array()) * g.array() + z.array() * h.array()).matrix();
        if (cache) {
            cache->z.push_back(z);
            cache->r.push_back(r);
            cache->g.push_back(g);
            cache->h.push_back(h);
        }
    }
    return (m.w_out() * h).colwise() + m.b_out();
}

} // namespace

Eigen::VectorXd forward(const GruForecaster& m, const Eigen::MatrixXd& window) {
    if (window.cols() != m.input_dim)
        throw DimensionError("window has " + std::to_string(window.cols()) +
                             " flows, model expects " + std::to_string(m.input_dim));
    if (window.rows() < 1) throw DimensionError("window needs at least one input step");
    std::vector<Eigen::MatrixXd> steps;
    steps.reserve(static_cast<std::size_t>(window.rows()));
    for (Eigen::Index k = 0; k < window.rows(); ++k)
        steps.emplace_back(window.row(k).transpose());
    return forward_batch(m, steps, nullptr).col(0);
}

TrainBatch make_batch(const WindowedDataset& ds, const std::vector<int>& window_ids) {
    TrainBatch batch;
    const int f = ds.flow_dim();
    const auto b = static_cast<Eigen::Index>(window_ids.size());
    batch.steps.assign(static_cast<std::size_t>(ds.input_steps()),
                       Eigen::MatrixXd(f, b));
    batch.targets.resize(f, b);
    for (Eigen::Index col = 0; col < b; ++col) {
        const int w = window_ids[static_cast<std::size_t>(col)];
        for (int k = 0; k < ds.input_steps(); ++k)
            batch.steps[static_cast<std::size_t>(k)].col(col) =
                ds.input_step(w, k).transpose();
        batch.targets.col(col) = ds.target(w).transpose();
    }
    return batch;
}

LossGrad loss_and_gradients(const GruForecaster& m, const TrainBatch& batch) {
    const auto steps = static_cast<int>(batch.steps.size());
    if (steps == 0 || batch.batch_size() == 0) throw EmptyInputError("empty batch");
    if (batch.targets.rows() != m.input_dim)
        throw DimensionError("target dimension does not match the model");

    ForwardCache cache;
    const Eigen::MatrixXd y = forward_batch(m, batch.steps, &cache);
    const Eigen::MatrixXd diff = y - batch.targets;
    const double denom = static_cast<double>(diff.size());
    const double loss = diff.squaredNorm() / denom;
    if (!std::isfinite(loss)) {
        for (int col = 0; col < batch.batch_size(); ++col)
            if (!y.col(col).allFinite())
                throw NumericError("non-finite forward values at batch index " +
                                   std::to_string(col));
        throw NumericError("non-finite loss");
    }

    GruForecaster grads;
    grads.input_dim = m.input_dim;
    grads.hidden_dim = m.hidden_dim;
    grads.theta = Eigen::VectorXd::Zero(m.param_count());

    const Eigen::MatrixXd d_y = (2.0 / denom) * diff;
    grads.w_out() = d_y * cache.h.back().transpose();
    grads.b_out() = d_y.rowwise().sum();

    Eigen::MatrixXd d_h = m.w_out().transpose() * d_y;
    const auto uz = m.u_update(), ur = m.u_reset(), uh = m.u_cand();
    for (int t = steps - 1; t >= 0; --t) {
        const Eigen::MatrixXd& h_prev = cache.h[static_cast<std::size_t>(t)];
        const Eigen::MatrixXd& z = cache.z[static_cast<std::size_t>(t)];
        const Eigen::MatrixXd& r = cache.r[static_cast<std::size_t>(t)];
        const Eigen::MatrixXd& g = cache.g[static_cast<std::size_t>(t)];
        const Eigen::MatrixXd& x = batch.steps[static_cast<std::size_t>(t)];

        // h_t = (1-z).*g + z.*h_prev
        const Eigen::MatrixXd d_z =
            (d_h.array() * (h_prev.array() - g.array())).matrix();
        const Eigen::MatrixXd d_g = (d_h.array() * (1.0 - z.array())).matrix();
        Eigen::MatrixXd d_hprev = (d_h.array() * z.array()).matrix();

        const Eigen::MatrixXd d_ag =
            (d_g.array() * (1.0 - g.array().square())).matrix();
        const Eigen::MatrixXd rh = (r.array() * h_prev.array()).matrix();
        grads.w_cand() += d_ag * x.transpose();
        grads.u_cand() += d_ag * rh.transpose();
        grads.b_cand() += d_ag.rowwise().sum();
        const Eigen::MatrixXd d_rh = uh.transpose() * d_ag;
        const Eigen::MatrixXd d_r = (d_rh.array() * h_prev.array()).matrix();
        d_hprev += (d_rh.array() * r.array()).matrix();

        const Eigen::MatrixXd d_ar =
            (d_r.array() * r.array() * (1.0 - r.array())).matrix();
        grads.w_reset() += d_ar * x.transpose();
        grads.u_reset() += d_ar * h_prev.transpose();
        grads.b_reset() += d_ar.rowwise().sum();
        d_hprev += ur.transpose() * d_ar;

        const Eigen::MatrixXd d_az =
            (d_z.array() * z.array() * (1.0 - z.array())).matrix();
        grads.w_update() += d_az * x.transpose();
        grads.u_update() += d_az * h_prev.transpose();
        grads.b_update() += d_az.rowwise().sum();
        d_hprev += uz.transpose() * d_az;

        d_h = std::move(d_hprev);
    }

    LossGrad out;
    out.loss = loss;
    out.grad = std::move(grads.theta);
    return out;
}

double evaluate_loss(const GruForecaster& m, const WindowedDataset& ds) {
    if (ds.window_count() == 0) throw EmptyInputError("empty dataset");
    constexpr int kChunk = 256;
    double sq_sum = 0.0;
    std::size_t count = 0;
    std::vector<int> ids;
    for (int start = 0; start < ds.window_count(); start += kChunk) {
        const int end = std::min(ds.window_count(), start + kChunk);
        ids.resize(static_cast<std::size_t>(end - start));
        std::iota(ids.begin(), ids.end(), start);
        const TrainBatch batch = make_batch(ds, ids);
        const Eigen::MatrixXd y = forward_batch(m, batch.steps, nullptr);
        sq_sum += (y - batch.targets).squaredNorm();
        count += static_cast<std::size_t>((y.cols()) * y.rows());
    }
    return sq_sum / static_cast<double>(count);
}

TrainReport train(GruForecaster& m, const WindowedDataset& train_ds,
                  const WindowedDataset& val_ds, const TrainConfig& cfg) {
    if (train_ds.window_count() == 0) throw EmptyInputError("training dataset is empty");
    if (train_ds.flow_dim() != m.input_dim)
        throw DimensionError("training dataset does not match the model");
    if (val_ds.window_count() > 0 && val_ds.flow_dim() != m.input_dim)
        throw DimensionError("validation dataset does not match the model");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.patience < 1 ||
        !(cfg.learning_rate > 0.0) || cfg.min_delta < 0.0)
        throw DomainError("invalid training configuration");

    const bool with_val = val_ds.window_count() > 0;
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(m.theta.size());
    Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(m.theta.size());
    long adam_t = 0;

    Rng rng(cfg.seed);
    std::vector<int> order(static_cast<std::size_t>(train_ds.window_count()));
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    double best_loss = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_theta = m.theta;
    int since_improve = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_sq = 0.0;
        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<int> ids(order.begin() + static_cast<std::ptrdiff_t>(at),
                                       order.begin() + static_cast<std::ptrdiff_t>(end));
            const LossGrad lg = loss_and_gradients(m, make_batch(train_ds, ids));
            epoch_sq += lg.loss * static_cast<double>(ids.size());

            ++adam_t;
            adam_m = kBeta1 * adam_m + (1.0 - kBeta1) * lg.grad;
            adam_v = kBeta2 * adam_v.array().matrix() +
                     (1.0 - kBeta2) * lg.grad.array().square().matrix();
            const double corr1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t));
            const double corr2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t));
            m.theta.array() -= cfg.learning_rate * (adam_m.array() / corr1) /
                               ((adam_v.array() / corr2).sqrt() + kEps);
        }
        report.train_loss_curve.push_back(epoch_sq /
                                          static_cast<double>(train_ds.window_count()));

        double monitored = report.train_loss_curve.back();
        if (with_val) {
            monitored = evaluate_loss(m, val_ds);
            report.val_loss_curve.push_back(monitored);
        }
        report.epochs_run = epoch + 1;

        if (best_loss - monitored > cfg.min_delta) {
            best_loss = monitored;
            report.best_epoch = epoch;
            best_theta = m.theta;
            since_improve = 0;
        } else if (++since_improve >= cfg.patience) {
            report.stopped_early = true;
            break;
        }
    }

    m.theta = std::move(best_theta);
    return report;
}

Eigen::MatrixXd predict_group(const GruForecaster& m, const WindowedDataset& test_ds,
                              const NormalizationParams& p) {
    if (test_ds.flow_dim() != m.input_dim)
        throw DimensionError("dataset does not match the model");
    const int windows = test_ds.window_count();
    const int f = test_ds.flow_dim();
    Eigen::MatrixXd out(windows, f);

    constexpr int kChunk = 256;
    std::vector<int> ids;
    for (int start = 0; start < windows; start += kChunk) {
        const int end = std::min(windows, start + kChunk);
        ids.resize(static_cast<std::size_t>(end - start));
        std::iota(ids.begin(), ids.end(), start);
        const TrainBatch batch = make_batch(test_ds, ids);
        const Eigen::MatrixXd y = forward_batch(m, batch.steps, nullptr);
        for (Eigen::Index col = 0; col < y.cols(); ++col)
            out.row(start + static_cast<int>(col)) = y.col(col).transpose();
    }

    for (int c = 0; c < f; ++c) {
        const int fid = test_ds.flow_ids[static_cast<std::size_t>(c)];
        for (int w = 0; w < windows; ++w) {
            if (p.is_constant(fid)) {
                out(w, c) = p.per_flow_min[fid]; // constant flows bypass the model
            } else {
                out(w, c) = std::max(0.0, denormalize_value(out(w, c), p, fid));
            }
        }
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const GruForecaster& m) {
    std::ostringstream out;
    out << "tmpred-gru v1\n";
    out << "input_dim " << m.input_dim << '\n';
    out << "hidden_dim " << m.hidden_dim << '\n';
    out << "seed " << m.seed << '\n';
    const Layout lo(m.input_dim, m.hidden_dim);
    struct Block {
        const char* name;
        int offset, rows, cols;
    };
    const Block blocks[] = {
        {"w_update", lo.wz, lo.h, lo.f}, {"w_reset", lo.wr, lo.h, lo.f},
        {"w_cand", lo.wh, lo.h, lo.f},   {"u_update", lo.uz, lo.h, lo.h},
        {"u_reset", lo.ur, lo.h, lo.h},  {"u_cand", lo.uh, lo.h, lo.h},
        {"b_update", lo.bz, lo.h, 1},    {"b_reset", lo.br, lo.h, 1},
        {"b_cand", lo.bh, lo.h, 1},      {"w_out", lo.wo, lo.f, lo.h},
        {"b_out", lo.bo, lo.f, 1},
    };
    for (const auto& blk : blocks) {
        out << "tensor " << blk.name << ' ' << blk.rows << ' ' << blk.cols << '\n';
        for (int i = 0; i < blk.rows * blk.cols; ++i) {
            out << format_double(m.theta[blk.offset + i]);
            out << ((i + 1) % blk.cols == 0 ? '\n' : ' ');
        }
    }
    write_text_file(path, out.str());
}

GruForecaster load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open checkpoint: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::string_view {
        if (!std::getline(in, line)) throw ParseError("unexpected end of checkpoint", line_no);
        ++line_no;
        return trim(line);
    };
    if (next_line() != "tmpred-gru v1")
        throw ParseError("unsupported checkpoint format", line_no);

    auto read_kv = [&](std::string_view key) -> std::string {
        const auto text = next_line();
        const auto parts = split(text, ' ');
        if (parts.size() != 2 || parts[0] != key)
            throw ParseError("expected '" + std::string(key) + " <value>'", line_no);
        return std::string(parts[1]);
    };
    GruForecaster m;
    if (!parse_int(read_kv("input_dim"), m.input_dim) || m.input_dim < 1)
        throw ParseError("bad input_dim", line_no);
    if (!parse_int(read_kv("hidden_dim"), m.hidden_dim) || m.hidden_dim < 1)
        throw ParseError("bad hidden_dim", line_no);
    std::int64_t seed = 0;
    if (!parse_int64(read_kv("seed"), seed)) throw ParseError("bad seed", line_no);
    m.seed = static_cast<std::uint64_t>(seed);
    m.theta = Eigen::VectorXd::Zero(m.param_count());

    const Layout lo(m.input_dim, m.hidden_dim);
    struct Block {
        const char* name;
        int offset, rows, cols;
    };
    const Block blocks[] = {
        {"w_update", lo.wz, lo.h, lo.f}, {"w_reset", lo.wr, lo.h, lo.f},
        {"w_cand", lo.wh, lo.h, lo.f},   {"u_update", lo.uz, lo.h, lo.h},
        {"u_reset", lo.ur, lo.h, lo.h},  {"u_cand", lo.uh, lo.h, lo.h},
        {"b_update", lo.bz, lo.h, 1},    {"b_reset", lo.br, lo.h, 1},
        {"b_cand", lo.bh, lo.h, 1},      {"w_out", lo.wo, lo.f, lo.h},
        {"b_out", lo.bo, lo.f, 1},
    };
    for (const auto& blk : blocks) {
        const auto header = next_line();
        const auto parts = split(header, ' ');
        int rows = 0, cols = 0;
        if (parts.size() != 4 || parts[0] != "tensor" || parts[1] != blk.name ||
            !parse_int(parts[2], rows) || !parse_int(parts[3], cols) ||
            rows != blk.rows || cols != blk.cols)
            throw ParseError("bad tensor header for " + std::string(blk.name), line_no);
        for (int r = 0; r < rows; ++r) {
            const auto row = next_line();
            const auto vals = split(row, ' ');
            if (static_cast<int>(vals.size()) != cols)
                throw ParseError("bad tensor row width", line_no);
            for (int c = 0; c < cols; ++c) {
                double v;
                if (!parse_double(vals[static_cast<std::size_t>(c)], v))
                    throw ParseError("bad tensor value", line_no);
                m.theta[blk.offset + r * cols + c] = v;
            }
        }
    }
    return m;
}

Eigen::MatrixXd PredictionSet::predicted_matrix(int w) const {
    Eigen::MatrixXd m(node_count, node_count);
    for (int s = 0; s < node_count; ++s)
        for (int d = 0; d < node_count; ++d) m(s, d) = predicted(w, s * node_count + d);
    return m;
}

Eigen::MatrixXd PredictionSet::truth_matrix(int w) const {
    Eigen::MatrixXd m(node_count, node_count);
    for (int s = 0; s < node_count; ++s)
        for (int d = 0; d < node_count; ++d) m(s, d) = truth(w, s * node_count + d);
    return m;
}

PredictionSet run_experiment(const TmSeries& tm, const ClusterAssignment& assignment,
                             const TrainConfig& cfg, int window_length,
                             double train_frac, double val_frac_of_train,
                             int hidden_dim, int jobs) {
    assignment.validate();
    if (assignment.flow_count() != tm.flow_count())
        throw DimensionError("assignment does not cover the series' flows");

    const SplitSizes sizes = split_sizes(tm.length(), train_frac, val_frac_of_train);
    if (sizes.train < static_cast<std::size_t>(window_length))
        throw InsufficientDataError("training split is shorter than the window length");

    const NormalizationParams norm = fit_normalization(tm.slice(0, sizes.train));

    PredictionSet out;
    out.node_count = tm.node_count;
    out.assignment = assignment;
    out.norm = norm;
    out.sizes = sizes;
    out.predicted.setConstant(static_cast<Eigen::Index>(sizes.test), tm.flow_count(),
                              std::numeric_limits<double>::quiet_NaN());
    out.truth.resize(static_cast<Eigen::Index>(sizes.test), tm.flow_count());
    out.reports.resize(assignment.clusters.size());
    out.models.resize(assignment.clusters.size());

    const auto test_begin = sizes.train + sizes.val;
    out.target_timestamps.assign(tm.timestamps.begin() + static_cast<std::ptrdiff_t>(test_begin),
                                 tm.timestamps.end());
    for (std::size_t w = 0; w < sizes.test; ++w)
        out.truth.row(static_cast<Eigen::Index>(w)) =
            tm.values.row(static_cast<Eigen::Index>(test_begin + w));

    std::vector<Eigen::MatrixXd> cluster_preds(assignment.clusters.size());
    parallel_for(assignment.clusters.size(), jobs, [&](std::size_t c) {
        const auto& flows = assignment.clusters[c];
        const WindowedDataset all = build_windows(tm, norm, flows, window_length);
        const WindowSplit parts = split_windows(all, sizes);

        GruForecaster model = init_forecaster(static_cast<int>(flows.size()), hidden_dim,
                                              derive_seed(cfg.seed, 2 * c));
        TrainConfig local = cfg;
        local.seed = derive_seed(cfg.seed, 2 * c + 1);
        out.reports[c] = train(model, parts.train, parts.val, local);
        cluster_preds[c] = predict_group(model, parts.test, norm);
        out.models[c] = std::move(model);
    });

    for (std::size_t c = 0; c < assignment.clusters.size(); ++c) {
        const auto& flows = assignment.clusters[c];
        for (std::size_t k = 0; k < flows.size(); ++k)
            out.predicted.col(flows[k]) = cluster_preds[c].col(static_cast<Eigen::Index>(k));
    }
    if (!out.predicted.allFinite())
        throw NumericError("prediction assembly left unfilled or non-finite entries");
    return out;
}

} // namespace tmpred
