#pragma once

#include <Eigen/Core>
#include <vector>

namespace tmpred {

enum class LpSense { less_equal, equal, greater_equal };
enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

/// Dense linear program: minimize c'x subject to a x (sense) b, x >= 0.
struct LpProblem {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    std::vector<LpSense> sense;

    Eigen::Index rows() const { return a.rows(); }
    Eigen::Index vars() const { return a.cols(); }
};

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    double objective = 0.0;
    Eigen::VectorXd x;
};

/// Two-phase primal simplex on a dense tableau. Dantzig pricing with a
/// permanent switch to Bland's rule after a stall, which guarantees
/// termination. Sized for the dense problems this project builds
/// (hundreds of rows, a few thousand columns).
LpSolution solve_lp(const LpProblem& problem);

} // namespace tmpred
