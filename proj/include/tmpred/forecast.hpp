#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tmpred/clusters.hpp"
#include "tmpred/tmdata.hpp"

namespace tmpred {

/// Single-layer gated recurrent forecaster with an affine readout of the
/// final hidden state. All parameters live in one flat vector `theta`; the
/// accessors expose the individual tensors as views:
///
///   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)          update gate
///   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)          reset gate
///   g_t = tanh(Wh x_t + Uh (r_t .* h_{t-1}) + bh)    candidate state
///   h_t = (1 - z_t) .* g_t + z_t .* h_{t-1}
///   y   = Wo h_T + bo
struct GruForecaster {
    int input_dim = 0;
    int hidden_dim = 0;
    std::uint64_t seed = 0;
    Eigen::VectorXd theta;

    static int param_count(int input_dim, int hidden_dim);
    int param_count() const { return param_count(input_dim, hidden_dim); }

    using MatView = Eigen::Map<Eigen::MatrixXd>;
    using VecView = Eigen::Map<Eigen::VectorXd>;
    using ConstMatView = Eigen::Map<const Eigen::MatrixXd>;
    using ConstVecView = Eigen::Map<const Eigen::VectorXd>;

    MatView w_update();
    MatView w_reset();
    MatView w_cand();
    MatView u_update();
    MatView u_reset();
    MatView u_cand();
    VecView b_update();
    VecView b_reset();
    VecView b_cand();
    MatView w_out();
    VecView b_out();

    ConstMatView w_update() const;
    ConstMatView w_reset() const;
    ConstMatView w_cand() const;
    ConstMatView u_update() const;
    ConstMatView u_reset() const;
    ConstMatView u_cand() const;
    ConstVecView b_update() const;
    ConstVecView b_reset() const;
    ConstVecView b_cand() const;
    ConstMatView w_out() const;
    ConstVecView b_out() const;
};

/// Weights uniform on [-1/sqrt(H), 1/sqrt(H)] from a seeded generator,
/// biases zero. Identical (dims, seed) give bit-identical parameters.
GruForecaster init_forecaster(int input_dim, int hidden_dim, std::uint64_t seed);

/// One-step-ahead output for a single window (rows are the L-1 input steps).
Eigen::VectorXd forward(const GruForecaster& m, const Eigen::MatrixXd& window);

/// A mini-batch in step-major layout: steps[k] is input step k for every
/// window in the batch (flows x batch), targets likewise.
struct TrainBatch {
    std::vector<Eigen::MatrixXd> steps;
    Eigen::MatrixXd targets;

    int batch_size() const { return static_cast<int>(targets.cols()); }
};

TrainBatch make_batch(const WindowedDataset& ds, const std::vector<int>& window_ids);

struct LossGrad {
    double loss = 0.0;
    Eigen::VectorXd grad; // same layout as GruForecaster::theta
};

/// Mean squared error over the batch and flows, with gradients via
/// backpropagation through time over the full window.
LossGrad loss_and_gradients(const GruForecaster& m, const TrainBatch& batch);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 0.001; // Adam, beta1 0.9 / beta2 0.999 / eps 1e-8
    int patience = 5;
    double min_delta = 1e-5;
    std::uint64_t seed = 1;
};

struct TrainReport {
    int epochs_run = 0;
    std::vector<double> train_loss_curve;
    std::vector<double> val_loss_curve; // empty when validation is disabled
    int best_epoch = 0;
    bool stopped_early = false;
};

/// Adam over seeded shuffled mini-batches with early stopping on the
/// validation loss (training loss when val_ds is empty). The model is left
/// at the best monitored epoch's parameters.
TrainReport train(GruForecaster& m, const WindowedDataset& train_ds,
                  const WindowedDataset& val_ds, const TrainConfig& cfg);

/// Mean squared error of the model over a whole dataset.
double evaluate_loss(const GruForecaster& m, const WindowedDataset& ds);

/// Denormalized one-step predictions for every window (rows) and flow
/// (columns). Constant flows bypass the model and emit their constant;
/// non-constant outputs are clamped at 0 (traffic cannot be negative).
Eigen::MatrixXd predict_group(const GruForecaster& m, const WindowedDataset& test_ds,
                              const NormalizationParams& p);

/// Versioned text checkpoint holding dims, seed and all parameter tensors.
void save_checkpoint(const std::filesystem::path& path, const GruForecaster& m);
GruForecaster load_checkpoint(const std::filesystem::path& path);

/// Full prediction run: one model per cluster, predictions scattered back
/// into matrix positions.
struct PredictionSet {
    int node_count = 0;
    std::vector<std::int64_t> target_timestamps; // per test window
    Eigen::MatrixXd predicted; // W_test x N^2, denormalized
    Eigen::MatrixXd truth;     // W_test x N^2, original values
    std::vector<TrainReport> reports;    // per cluster
    std::vector<GruForecaster> models;   // per cluster
    ClusterAssignment assignment;
    NormalizationParams norm;
    SplitSizes sizes;

    int window_count() const { return static_cast<int>(predicted.rows()); }
    Eigen::MatrixXd predicted_matrix(int w) const; // N x N
    Eigen::MatrixXd truth_matrix(int w) const;
};

/// Trains one forecaster per cluster of `assignment` on the chronological
/// train/val windows and predicts every test window. Per-cluster seeds
/// derive from cfg.seed and the cluster index, so results are identical for
/// any jobs value.
PredictionSet run_experiment(const TmSeries& tm, const ClusterAssignment& assignment,
                             const TrainConfig& cfg, int window_length,
                             double train_frac = 0.8, double val_frac_of_train = 0.1,
                             int hidden_dim = 30, int jobs = 1);

} // namespace tmpred
