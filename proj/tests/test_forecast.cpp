#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "support/gru_reference.hpp"
#include "tmpred/errors.hpp"
#include "tmpred/forecast.hpp"
#include "tmpred/rng.hpp"
#include "tmpred/synth.hpp"

using namespace tmpred;

namespace {

WindowedDataset dataset_from(const std::vector<std::vector<double>>& columns,
                             int window_length) {
    WindowedDataset ds;
    ds.window_length = window_length;
    const auto rows = static_cast<Eigen::Index>(columns[0].size());
    auto data = std::make_shared<Eigen::MatrixXd>(rows, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        ds.flow_ids.push_back(static_cast<int>(c));
        for (Eigen::Index t = 0; t < rows; ++t)
            (*data)(t, static_cast<Eigen::Index>(c)) = columns[c][static_cast<std::size_t>(t)];
    }
    ds.data = std::move(data);
    for (int w = 0; w + window_length <= static_cast<int>(rows); ++w)
        ds.window_starts.push_back(w);
    return ds;
}

TmSeries series_from_columns(const std::vector<std::vector<double>>& columns,
                             int node_count) {
    TmSeries tm;
    tm.node_count = node_count;
    tm.interval_seconds = 300;
    const auto rows = columns[0].size();
    tm.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t t = 0; t < rows; ++t) {
        tm.timestamps.push_back(1000 + 300LL * static_cast<std::int64_t>(t));
        for (std::size_t c = 0; c < columns.size(); ++c)
            tm.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) =
                columns[c][t];
    }
    return tm;
}

} // namespace

TEST_CASE("init_forecaster") {
    SUBCASE("deterministic and correctly sized") {
        const auto a = init_forecaster(144, 30, 42);
        const auto b = init_forecaster(144, 30, 42);
        CHECK(a.theta == b.theta);
        CHECK(a.param_count() == 3 * (30 * 144 + 30 * 30 + 30) + 144 * 30 + 144);
        CHECK(a.theta.size() == a.param_count());
        const auto c = init_forecaster(144, 30, 43);
        CHECK(a.theta != c.theta);
    }
    SUBCASE("weights bounded, biases zero") {
        const auto m = init_forecaster(4, 9, 7);
        const double bound = 1.0 / 3.0;
        CHECK(m.theta.cwiseAbs().maxCoeff() <= bound);
        CHECK(m.b_update().cwiseAbs().maxCoeff() == 0.0);
        CHECK(m.b_reset().cwiseAbs().maxCoeff() == 0.0);
        CHECK(m.b_cand().cwiseAbs().maxCoeff() == 0.0);
        CHECK(m.b_out().cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("invalid dims") {
        CHECK_THROWS_AS(init_forecaster(1, 0, 1), DomainError);
        CHECK_THROWS_AS(init_forecaster(0, 3, 1), DomainError);
    }
}

TEST_CASE("forward") {
    SUBCASE("zero parameters produce the zero readout") {
        GruForecaster m;
        m.input_dim = 3;
        m.hidden_dim = 4;
        m.theta = Eigen::VectorXd::Zero(GruForecaster::param_count(3, 4));
        const Eigen::MatrixXd window = Eigen::MatrixXd::Random(5, 3);
        CHECK(forward(m, window).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("deterministic") {
        const auto m = init_forecaster(2, 3, 9);
        const Eigen::MatrixXd window = Eigen::MatrixXd::Random(4, 2);
        CHECK(forward(m, window) == forward(m, window));
    }
    SUBCASE("matches the scalar reference implementation") {
        Rng rng(501);
        for (int trial = 0; trial < 50; ++trial) {
            auto m = init_forecaster(2, 3, 600 + static_cast<std::uint64_t>(trial));
            // exercise non-zero biases too
            for (Eigen::Index i = 0; i < m.theta.size(); ++i)
                m.theta[i] += rng.uniform(-0.2, 0.2);
            std::vector<std::vector<double>> window(4, std::vector<double>(2));
            Eigen::MatrixXd win(4, 2);
            for (int t = 0; t < 4; ++t)
                for (int f = 0; f < 2; ++f) {
                    window[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)] =
                        rng.uniform();
                    win(t, f) = window[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)];
                }
            const auto got = forward(m, win);
            const auto expect = oracle::gru_forward(m, window);
            for (int f = 0; f < 2; ++f)
                CHECK(got[f] == doctest::Approx(expect[static_cast<std::size_t>(f)])
                                    .epsilon(1e-12));
        }
    }
    SUBCASE("dimension mismatch") {
        const auto m = init_forecaster(3, 4, 1);
        CHECK_THROWS_AS(forward(m, Eigen::MatrixXd::Zero(4, 2)), DimensionError);
    }
}

TEST_CASE("loss_and_gradients") {
    SUBCASE("zero loss and zero gradients at the exact targets") {
        const auto m = init_forecaster(2, 3, 11);
        const auto ds = dataset_from({{0.1, 0.4, 0.2, 0.9, 0.5}, {0.3, 0.1, 0.8, 0.2, 0.7}}, 4);
        auto batch = make_batch(ds, {0, 1});
        for (int col = 0; col < batch.batch_size(); ++col) {
            Eigen::MatrixXd window(ds.input_steps(), 2);
            for (int k = 0; k < ds.input_steps(); ++k)
                window.row(k) = batch.steps[static_cast<std::size_t>(k)].col(col).transpose();
            batch.targets.col(col) = forward(m, window);
        }
        const auto lg = loss_and_gradients(m, batch);
        CHECK(lg.loss == 0.0);
        CHECK(lg.grad.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("gradients match central finite differences") {
        Rng rng(521);
        for (std::uint64_t seed = 1; seed <= 2; ++seed) {
            auto m = init_forecaster(2, 3, seed);
            const auto ds = dataset_from(
                {{0.1, 0.7, 0.3, 0.9, 0.2, 0.6}, {0.8, 0.2, 0.5, 0.1, 0.9, 0.4}}, 5);
            auto batch = make_batch(ds, {0, 1});
            for (Eigen::Index i = 0; i < batch.targets.size(); ++i)
                batch.targets.data()[i] = rng.uniform();

            const auto lg = loss_and_gradients(m, batch);
            const double h = 1e-5;
            for (Eigen::Index i = 0; i < m.theta.size(); ++i) {
                const double saved = m.theta[i];
                m.theta[i] = saved + h;
                const double up = loss_and_gradients(m, batch).loss;
                m.theta[i] = saved - h;
                const double down = loss_and_gradients(m, batch).loss;
                m.theta[i] = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double analytic = lg.grad[i];
                const double err = std::abs(analytic - numeric) /
                                   std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                CHECK(err <= 1e-4);
            }
        }
    }

    SUBCASE("duplicating a window leaves the mean loss and gradients unchanged") {
        const auto m = init_forecaster(2, 3, 31);
        const auto ds = dataset_from({{0.1, 0.4, 0.2, 0.9}, {0.3, 0.1, 0.8, 0.2}}, 3);
        const auto one = loss_and_gradients(m, make_batch(ds, {0}));
        const auto four = loss_and_gradients(m, make_batch(ds, {0, 0, 0, 0}));
        CHECK(four.loss == doctest::Approx(one.loss).epsilon(1e-14));
        for (Eigen::Index i = 0; i < one.grad.size(); ++i)
            CHECK(four.grad[i] == doctest::Approx(one.grad[i]).epsilon(1e-12));
    }
}

TEST_CASE("train") {
    SUBCASE("constant-zero dataset converges immediately") {
        const auto ds = dataset_from({std::vector<double>(30, 0.0)}, 4);
        auto m = init_forecaster(1, 5, 3);
        TrainConfig cfg;
        cfg.epochs = 100;
        cfg.seed = 3;
        const auto report = train(m, ds, {}, cfg);
        CHECK(report.train_loss_curve.back() <= 1e-6);
        CHECK(report.epochs_run <= 100);
    }

    SUBCASE("early stopping returns the best epoch") {
        // Training pushes outputs toward 0.8 while the validation targets
        // stay at 0, so the validation loss only degrades after epoch 0.
        std::vector<double> train_col(40, 0.8);
        auto train_ds = dataset_from({train_col}, 2);
        std::vector<double> val_col(10, 0.0);
        auto val_ds = dataset_from({val_col}, 2);
        auto m = init_forecaster(1, 4, 17);
        TrainConfig cfg;
        cfg.epochs = 60;
        cfg.patience = 5;
        cfg.learning_rate = 0.05; // move fast so every epoch clearly degrades
        cfg.seed = 17;
        const auto report = train(m, train_ds, val_ds, cfg);
        CHECK(report.stopped_early);
        CHECK(report.best_epoch == 0);
        CHECK(report.epochs_run == 1 + cfg.patience);
        REQUIRE(!report.val_loss_curve.empty());
        const double best = report.val_loss_curve[static_cast<std::size_t>(report.best_epoch)];
        for (double v : report.val_loss_curve) CHECK(best <= v + cfg.min_delta);
        // restored parameters reproduce the best validation loss
        CHECK(evaluate_loss(m, val_ds) == doctest::Approx(best).epsilon(1e-12));
    }

    SUBCASE("learns a noiseless AR(1) rule") {
        // y restarts at a seeded level every 40 steps and decays by 0.9; the
        // rule y_next = 0.9 * y_last holds everywhere except at restarts, so
        // restart targets stay out of the validation set.
        Rng rng(531);
        std::vector<double> y;
        for (int segment = 0; segment < 16; ++segment) {
            double v = rng.uniform(0.5, 1.0);
            for (int k = 0; k < 40; ++k) {
                y.push_back(v);
                v *= 0.9;
            }
        }
        const auto all = dataset_from({y}, 11);
        std::vector<int> train_ids, val_ids;
        for (int w = 0; w < all.window_count(); ++w) {
            if (w < 500)
                train_ids.push_back(w);
            else if (all.target_index(w) % 40 != 0)
                val_ids.push_back(w);
        }
        const auto train_ds = all.subset(train_ids);
        const auto val_ds = all.subset(val_ids);
        auto m = init_forecaster(1, 16, 5);
        TrainConfig cfg;
        cfg.epochs = 100;
        cfg.learning_rate = 0.003;
        cfg.seed = 5;
        const auto report = train(m, train_ds, val_ds, cfg);
        const double val_mse = evaluate_loss(m, val_ds);
        CHECK(val_mse <= 1e-3);
        CHECK(report.best_epoch < report.epochs_run);

        // denormalized one-step predictions track the 0.9 rule within 5%
        // on targets of meaningful size
        NormalizationParams ident;
        ident.per_flow_min = Eigen::VectorXd::Zero(1);
        ident.per_flow_max = Eigen::VectorXd::Constant(1, 1.0);
        const auto preds = predict_group(m, val_ds, ident);
        double rel_sum = 0.0;
        int counted = 0;
        for (int w = 0; w < val_ds.window_count(); ++w) {
            const double target = val_ds.target(w)[0];
            if (target < 0.1) continue;
            rel_sum += std::abs(preds(w, 0) - target) / target;
            ++counted;
        }
        REQUIRE(counted > 0);
        CHECK(rel_sum / counted <= 0.05);
    }

    SUBCASE("empty training set is an error") {
        auto ds = dataset_from({{0.0, 0.1, 0.2}}, 2);
        ds.window_starts.clear();
        auto m = init_forecaster(1, 3, 1);
        CHECK_THROWS_AS(train(m, ds, {}, TrainConfig{}), EmptyInputError);
    }
}

TEST_CASE("predict_group") {
    SUBCASE("constant flows bypass the model") {
        NormalizationParams p;
        p.per_flow_min = Eigen::VectorXd(2);
        p.per_flow_max = Eigen::VectorXd(2);
        p.per_flow_min << 7.0, 0.0;
        p.per_flow_max << 7.0, 10.0;
        const auto ds = dataset_from({{0, 0, 0, 0, 0}, {0.1, 0.5, 0.2, 0.8, 0.4}}, 3);
        const auto m = init_forecaster(2, 4, 23);
        const auto preds = predict_group(m, ds, p);
        CHECK(preds.rows() == ds.window_count());
        CHECK(preds.cols() == 2);
        for (int w = 0; w < preds.rows(); ++w) {
            CHECK(preds(w, 0) == 7.0);     // the constant
            CHECK(preds(w, 1) >= 0.0);     // non-negative traffic
        }
    }
    SUBCASE("local-mode group of one flow") {
        NormalizationParams p;
        p.per_flow_min = Eigen::VectorXd::Zero(1);
        p.per_flow_max = Eigen::VectorXd::Constant(1, 1.0);
        const auto ds = dataset_from({{0.1, 0.5, 0.2, 0.8}}, 3);
        const auto preds = predict_group(init_forecaster(1, 4, 2), ds, p);
        CHECK(preds.rows() == 2);
        CHECK(preds.cols() == 1);
    }
}

TEST_CASE("checkpoint round trip is bit exact") {
    const auto dir = std::filesystem::temp_directory_path();
    auto m = init_forecaster(5, 7, 99);
    Rng rng(541);
    for (Eigen::Index i = 0; i < m.theta.size(); ++i) m.theta[i] = rng.uniform(-2.0, 2.0);
    const auto path = dir / "tmpred_test_model.ckpt";
    save_checkpoint(path, m);
    const auto back = load_checkpoint(path);
    CHECK(back.input_dim == 5);
    CHECK(back.hidden_dim == 7);
    CHECK(back.seed == 99);
    CHECK(back.theta == m.theta);
}

TEST_CASE("run_experiment") {
    TrainConfig fast;
    fast.epochs = 2;
    fast.seed = 9;

    SUBCASE("entire-matrix mode trains one model over all flows") {
        Rng rng(547);
        std::vector<std::vector<double>> cols(144, std::vector<double>(30));
        for (auto& col : cols)
            for (auto& v : col) v = rng.uniform(0.0, 100.0);
        const auto tm = series_from_columns(cols, 12);
        const auto set =
            run_experiment(tm, entire_matrix_cluster(144), fast, 5, 0.8, 0.1, 8);
        CHECK(set.models.size() == 1);
        CHECK(set.models[0].input_dim == 144);
        CHECK(set.predicted.rows() == 6);
        CHECK(set.predicted.cols() == 144);
        CHECK(set.reports.size() == 1);
        CHECK(set.truth.rows() == 6);
    }

    SUBCASE("local mode trains one model per flow") {
        Rng rng(557);
        std::vector<std::vector<double>> cols(4, std::vector<double>(40));
        for (auto& col : cols)
            for (auto& v : col) v = rng.uniform(0.0, 10.0);
        const auto tm = series_from_columns(cols, 2);
        const auto set = run_experiment(tm, local_clusters(4), fast, 4, 0.8, 0.1, 6);
        CHECK(set.models.size() == 4);
        for (const auto& m : set.models) CHECK(m.input_dim == 1);
    }

    SUBCASE("cluster outputs scatter into their flow positions") {
        // constant flows come back exactly, proving the column bookkeeping
        const std::vector<std::vector<double>> cols = {
            std::vector<double>(30, 1.0), std::vector<double>(30, 2.0),
            std::vector<double>(30, 3.0), std::vector<double>(30, 4.0)};
        const auto tm = series_from_columns(cols, 2);
        const auto assignment = make_assignment(ClusterMethod::histogram, {{0, 2}, {1, 3}});
        const auto set = run_experiment(tm, assignment, fast, 4, 0.8, 0.1, 6);
        CHECK(set.models.size() == 2);
        for (int w = 0; w < set.window_count(); ++w)
            for (int f = 0; f < 4; ++f) CHECK(set.predicted(w, f) == f + 1.0);
    }

    SUBCASE("deterministic for any jobs value") {
        Rng rng(563);
        std::vector<std::vector<double>> cols(9, std::vector<double>(60));
        for (auto& col : cols)
            for (auto& v : col) v = rng.uniform(0.0, 50.0);
        const auto tm = series_from_columns(cols, 3);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.seed = 77;
        const auto a = run_experiment(tm, local_clusters(9), cfg, 4, 0.8, 0.1, 6, 1);
        const auto b = run_experiment(tm, local_clusters(9), cfg, 4, 0.8, 0.1, 6, 2);
        CHECK(a.predicted == b.predicted);
        const auto c = run_experiment(tm, local_clusters(9), cfg, 4, 0.8, 0.1, 6, 1);
        CHECK(a.predicted == c.predicted);
        REQUIRE(a.reports.size() == c.reports.size());
        for (std::size_t k = 0; k < a.reports.size(); ++k) {
            CHECK(a.reports[k].train_loss_curve == c.reports[k].train_loss_curve);
            CHECK(a.reports[k].best_epoch == c.reports[k].best_epoch);
        }
    }
}
