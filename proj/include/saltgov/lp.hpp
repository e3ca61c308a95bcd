#pragma once

#include <Eigen/Dense>

namespace saltgov {

enum class LpStatus { optimal, infeasible, unbounded_or_infeasible };

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    Eigen::VectorXd x;            // primal minimizer
    Eigen::VectorXd multipliers;  // one per inequality row, >= 0
    double objective = 0.0;
    int iterations = 0;
};

// minimize c'x  subject to  G x <= h,  x free.
//
// Solved as the standard-form dual  min h'y  s.t.  G'y = -c, y >= 0  with a
// two-phase revised simplex; the primal point is read off the simplex
// multipliers. Dantzig pricing, falling back to Bland's rule after a run
// of degenerate pivots.
LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& g, const Eigen::VectorXd& h);

}  // namespace saltgov
