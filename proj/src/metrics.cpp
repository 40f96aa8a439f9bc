#include "tmpred/metrics.hpp"

#include <cmath>
#include <sstream>

#include "tmpred/errors.hpp"
#include "tmpred/textio.hpp"

namespace tmpred {

const char* error_scope_name(ErrorScope s) {
    return s == ErrorScope::normalized ? "normalized" : "denormalized";
}

namespace {

void check_shapes(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
        throw DimensionError("truth and prediction shapes differ");
    if (truth.size() == 0) throw EmptyInputError("no samples");
}

} // namespace

double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    check_shapes(truth, pred);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < truth.cols(); ++j)
        for (Eigen::Index i = 0; i < truth.rows(); ++i) {
            const double d = truth(i, j) - pred(i, j);
            sum += d * d;
        }
    return std::sqrt(sum / static_cast<double>(truth.size()));
}

double mae(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    check_shapes(truth, pred);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < truth.cols(); ++j)
        for (Eigen::Index i = 0; i < truth.rows(); ++i)
            sum += std::abs(truth(i, j) - pred(i, j));
    return sum / static_cast<double>(truth.size());
}

ErrorReport error_report(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred,
                         ErrorScope scope, const NormalizationParams* norm,
                         const std::vector<int>* flow_ids, bool with_per_flow) {
    check_shapes(truth, pred);
    Eigen::MatrixXd t = truth;
    Eigen::MatrixXd p = pred;
    if (scope == ErrorScope::normalized) {
        if (norm == nullptr)
            throw DomainError("normalized scope requires normalization params");
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            const int fid = flow_ids ? (*flow_ids)[static_cast<std::size_t>(j)]
                                     : static_cast<int>(j);
            for (Eigen::Index i = 0; i < t.rows(); ++i) {
                t(i, j) = normalize_value(t(i, j), *norm, fid);
                p(i, j) = normalize_value(p(i, j), *norm, fid);
            }
        }
    }
    ErrorReport r;
    r.scope = scope;
    r.n = static_cast<int>(t.rows());
    r.rmse = rmse(t, p);
    r.mae = mae(t, p);
    if (with_per_flow) {
        Eigen::VectorXd per(t.cols());
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            double sum = 0.0;
            for (Eigen::Index i = 0; i < t.rows(); ++i) {
                const double d = t(i, j) - p(i, j);
                sum += d * d;
            }
            per[j] = std::sqrt(sum / static_cast<double>(t.rows()));
        }
        r.per_flow_rmse = std::move(per);
    }
    return r;
}

std::string ErrorReport::to_kv_text() const {
    std::ostringstream out;
    out << "scope=" << error_scope_name(scope) << '\n';
    out << "rmse=" << format_double(rmse) << '\n';
    out << "mae=" << format_double(mae) << '\n';
    out << "n=" << n << '\n';
    if (per_flow_rmse) {
        out << "per_flow_rmse=";
        for (Eigen::Index j = 0; j < per_flow_rmse->size(); ++j) {
            if (j) out << ' ';
            out << format_double((*per_flow_rmse)[j]);
        }
        out << '\n';
    }
    return out.str();
}

} // namespace tmpred
