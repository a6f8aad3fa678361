#pragma once

#include <Eigen/Dense>

namespace smse {

/// Result of min c'x s.t. A x <= b, x >= 0, with the dual w (w <= 0) taken
/// from the optimal basis.
struct LpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd dual;
    double objective = 0.0;
    double dual_objective = 0.0;
    double duality_gap = 0.0;         // |c'x - b'w|
    double cs_residual = 0.0;         // max complementary-slackness product
    double dual_infeasibility = 0.0;  // max violation of A'w <= c, w <= 0
    double primal_infeasibility = 0.0;
    int iterations = 0;

    bool certified(double tol = 1e-8) const {
        return duality_gap < tol && cs_residual < tol && dual_infeasibility < tol &&
               primal_infeasibility < tol;
    }
};

/// Two-phase revised simplex, Dantzig pricing with a switch to Bland's rule on
/// runs of degenerate pivots. Throws InfeasibleError when
/// phase I cannot drive the artificials to zero (min_sup_norm() then carries
/// the phase I objective) and Error if the problem is unbounded.
LpResult solve_lp_leq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

}  // namespace smse
