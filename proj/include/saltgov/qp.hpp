#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace saltgov {

// minimize 0.5 x'Hx + q'x  subject to  A x <= b
struct QpProblem {
    Eigen::MatrixXd hessian;
    Eigen::VectorXd linear;
    Eigen::MatrixXd ineq;
    Eigen::VectorXd bound;
};

struct QpResult {
    Eigen::VectorXd x;
    std::vector<int> active_set;  // sorted row indices
    Eigen::VectorXd multipliers;  // one per row
    double kkt_residual = 0.0;
    int iterations = 0;
    bool used_phase_one = false;
};

class QpInfeasibleError : public std::runtime_error {
public:
    // Farkas certificate: y >= 0, A'y = 0, b'y < 0.
    QpInfeasibleError(const std::string& what, Eigen::VectorXd certificate)
        : std::runtime_error(what), certificate(std::move(certificate)) {}
    Eigen::VectorXd certificate;
};

class QpIterationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Largest KKT violation: stationarity, primal and dual feasibility,
// complementarity.
double kkt_residual(const QpProblem& problem, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& multipliers);

// Finds a point with A x <= b by LP (minimize the uniform slack).
// Throws QpInfeasibleError if none exists.
Eigen::VectorXd phase_one(const Eigen::MatrixXd& ineq, const Eigen::VectorXd& bound);

// Primal active-set method for strictly convex QPs. `start` is used when
// feasible; otherwise a feasible point is found by phase_one. The
// iteration cap is 100 times the number of rows.
QpResult solve_qp(const QpProblem& problem, const std::optional<Eigen::VectorXd>& start = {});

}  // namespace saltgov
