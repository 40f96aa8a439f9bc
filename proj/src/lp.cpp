#include "tmpred/lp.hpp"

#include <cmath>
#include <limits>

#include "tmpred/errors.hpp"

namespace tmpred {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr double kPhase1Tol = 1e-7;

struct Tableau {
    Eigen::MatrixXd t;     // m x (cols + 1), last column is the rhs
    Eigen::RowVectorXd obj1; // phase-1 reduced costs (+ rhs slot)
    Eigen::RowVectorXd obj2; // phase-2 reduced costs (+ rhs slot)
    std::vector<Eigen::Index> basis;
    Eigen::Index structural = 0;
    Eigen::Index art_begin = 0; // first artificial column

    Eigen::Index cols() const { return t.cols() - 1; }
    Eigen::Index rows() const { return t.rows(); }
    bool is_artificial(Eigen::Index j) const { return j >= art_begin; }

    void pivot(Eigen::Index pr, Eigen::Index pc) {
        t.row(pr) /= t(pr, pc);
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            if (i == pr) continue;
            const double factor = t(i, pc);
            if (factor != 0.0) t.row(i).noalias() -= factor * t.row(pr);
        }
        if (obj1(pc) != 0.0) obj1.noalias() -= obj1(pc) * t.row(pr);
        if (obj2(pc) != 0.0) obj2.noalias() -= obj2(pc) * t.row(pr);
        // Re-sharpen the unit column against rounding drift.
        t.col(pc).setZero();
        t(pr, pc) = 1.0;
        obj1(pc) = 0.0;
        obj2(pc) = 0.0;
        basis[static_cast<std::size_t>(pr)] = pc;
    }
};

// Minimizes the given objective row. Artificial columns never re-enter the
// basis in either phase.
LpStatus run_simplex(Tableau& tab, Eigen::RowVectorXd& obj, long max_iters) {
    const Eigen::Index rhs = tab.cols();
    bool bland = false;
    long since_improve = 0;
    double last_obj = std::numeric_limits<double>::infinity();
    const long stall_limit = 2 * (tab.rows() + tab.cols()) + 64;

    for (long iter = 0; iter < max_iters; ++iter) {
        // Entering column.
        Eigen::Index pc = -1;
        if (bland) {
            for (Eigen::Index j = 0; j < tab.cols(); ++j) {
                if (tab.is_artificial(j)) continue;
                if (obj(j) < -kCostTol) {
                    pc = j;
                    break;
                }
            }
        } else {
            double best = -kCostTol;
            for (Eigen::Index j = 0; j < tab.cols(); ++j) {
                if (tab.is_artificial(j)) continue;
                if (obj(j) < best) {
                    best = obj(j);
                    pc = j;
                }
            }
        }
        if (pc < 0) return LpStatus::optimal;

        // Ratio test; ties prefer the smallest basis id (anti-cycling with
        // Bland, deterministic otherwise).
        Eigen::Index pr = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < tab.rows(); ++i) {
            const double a = tab.t(i, pc);
            if (a <= kPivotTol) continue;
            const double ratio = tab.t(i, rhs) / a;
            if (ratio < best_ratio - 1e-12 ||
                (ratio < best_ratio + 1e-12 && pr >= 0 &&
                 tab.basis[static_cast<std::size_t>(i)] <
                     tab.basis[static_cast<std::size_t>(pr)])) {
                best_ratio = ratio;
                pr = i;
            }
        }
        if (pr < 0) return LpStatus::unbounded;

        tab.pivot(pr, pc);

        const double cur = -obj(rhs);
        if (cur < last_obj - 1e-12 * (1.0 + std::abs(last_obj))) {
            last_obj = cur;
            since_improve = 0;
        } else if (++since_improve > stall_limit) {
            bland = true; // degenerate cycling guard
        }
    }
    return LpStatus::iteration_limit;
}

} // namespace

LpSolution solve_lp(const LpProblem& problem) {
    const Eigen::Index m = problem.rows();
    const Eigen::Index n = problem.vars();
    if (problem.b.size() != m || static_cast<Eigen::Index>(problem.sense.size()) != m ||
        problem.c.size() != n)
        throw DimensionError("inconsistent LP dimensions");

    // Row-normalize so every rhs is non-negative.
    Eigen::MatrixXd a = problem.a;
    Eigen::VectorXd b = problem.b;
    std::vector<LpSense> sense = problem.sense;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (b(i) < 0.0) {
            a.row(i) = -a.row(i);
            b(i) = -b(i);
            if (sense[static_cast<std::size_t>(i)] == LpSense::less_equal)
                sense[static_cast<std::size_t>(i)] = LpSense::greater_equal;
            else if (sense[static_cast<std::size_t>(i)] == LpSense::greater_equal)
                sense[static_cast<std::size_t>(i)] = LpSense::less_equal;
        }
    }

    Eigen::Index slacks = 0, artificials = 0;
    for (auto s : sense) {
        if (s != LpSense::equal) ++slacks;
        if (s != LpSense::less_equal) ++artificials;
    }

    Tableau tab;
    tab.structural = n;
    tab.art_begin = n + slacks;
    const Eigen::Index cols = n + slacks + artificials;
    tab.t = Eigen::MatrixXd::Zero(m, cols + 1);
    tab.t.block(0, 0, m, n) = a;
    tab.t.col(cols) = b;
    tab.basis.assign(static_cast<std::size_t>(m), -1);

    Eigen::Index slack_at = n, art_at = tab.art_begin;
    for (Eigen::Index i = 0; i < m; ++i) {
        switch (sense[static_cast<std::size_t>(i)]) {
            case LpSense::less_equal:
                tab.t(i, slack_at) = 1.0;
                tab.basis[static_cast<std::size_t>(i)] = slack_at++;
                break;
            case LpSense::greater_equal:
                tab.t(i, slack_at++) = -1.0;
                tab.t(i, art_at) = 1.0;
                tab.basis[static_cast<std::size_t>(i)] = art_at++;
                break;
            case LpSense::equal:
                tab.t(i, art_at) = 1.0;
                tab.basis[static_cast<std::size_t>(i)] = art_at++;
                break;
        }
    }

    // Reduced-cost rows for the initial basis. Phase 1 minimizes the sum of
    // artificials: subtracting every artificial-basis row prices that basis
    // out. Phase 2 starts at plain c (all initial basic columns cost 0).
    tab.obj1 = Eigen::RowVectorXd::Zero(cols + 1);
    tab.obj2 = Eigen::RowVectorXd::Zero(cols + 1);
    tab.obj2.head(n) = problem.c.transpose();
    if (artificials > 0) {
        tab.obj1.segment(tab.art_begin, artificials).setOnes();
        for (Eigen::Index i = 0; i < m; ++i)
            if (tab.basis[static_cast<std::size_t>(i)] >= tab.art_begin)
                tab.obj1.noalias() -= tab.t.row(i);
    }

    const long max_iters = 400 * (m + cols) + 20000;
    LpSolution out;

    if (artificials > 0) {
        const LpStatus s1 = run_simplex(tab, tab.obj1, max_iters);
        if (s1 == LpStatus::iteration_limit) {
            out.status = LpStatus::iteration_limit;
            return out;
        }
        const double infeas = -tab.obj1(cols);
        if (infeas > kPhase1Tol) {
            out.status = LpStatus::infeasible;
            return out;
        }
        // Drive remaining zero-level artificials out of the basis; rows that
        // cannot pivot on a real column are redundant and get dropped.
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (tab.basis[static_cast<std::size_t>(i)] < tab.art_begin) {
                keep.push_back(i);
                continue;
            }
            Eigen::Index pc = -1;
            for (Eigen::Index j = 0; j < tab.art_begin; ++j) {
                if (std::abs(tab.t(i, j)) > kPivotTol) {
                    pc = j;
                    break;
                }
            }
            if (pc >= 0) {
                tab.pivot(i, pc);
                keep.push_back(i);
            }
        }
        if (static_cast<Eigen::Index>(keep.size()) != m) {
            Eigen::MatrixXd reduced(static_cast<Eigen::Index>(keep.size()), cols + 1);
            std::vector<Eigen::Index> new_basis;
            for (std::size_t k = 0; k < keep.size(); ++k) {
                reduced.row(static_cast<Eigen::Index>(k)) = tab.t.row(keep[k]);
                new_basis.push_back(tab.basis[static_cast<std::size_t>(keep[k])]);
            }
            tab.t = std::move(reduced);
            tab.basis = std::move(new_basis);
        }
    }

    const LpStatus s2 = run_simplex(tab, tab.obj2, max_iters);
    if (s2 != LpStatus::optimal) {
        out.status = s2;
        return out;
    }

    out.status = LpStatus::optimal;
    out.x = Eigen::VectorXd::Zero(n);
    const Eigen::Index rhs = cols;
    for (Eigen::Index i = 0; i < tab.rows(); ++i) {
        const Eigen::Index var = tab.basis[static_cast<std::size_t>(i)];
        if (var < n) out.x(var) = tab.t(i, rhs);
    }
    out.objective = problem.c.dot(out.x);
    return out;
}

} // namespace tmpred
