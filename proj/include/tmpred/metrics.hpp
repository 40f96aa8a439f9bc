#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "tmpred/tmdata.hpp"

namespace tmpred {

enum class ErrorScope { normalized, denormalized };

const char* error_scope_name(ErrorScope s);

struct ErrorReport {
    double rmse = 0.0;
    double mae = 0.0;
    int n = 0; // test windows
    ErrorScope scope = ErrorScope::denormalized;
    std::optional<Eigen::VectorXd> per_flow_rmse;

    std::string to_kv_text() const;
};

/// Root mean squared error over all windows and entries. Rows are windows,
/// columns are matrix entries (flow ids).
double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred);

/// Mean absolute error over all windows and entries.
double mae(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred);

/// RMSE/MAE at the requested scope for denormalized inputs. Normalized scope
/// rescales both sides with the training-split min/max (clamped to [0,1]);
/// it requires `norm`, and `flow_ids` when the columns are a flow subset.
ErrorReport error_report(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred,
                         ErrorScope scope, const NormalizationParams* norm = nullptr,
                         const std::vector<int>* flow_ids = nullptr,
                         bool with_per_flow = false);

} // namespace tmpred
