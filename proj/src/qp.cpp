#include "saltgov/qp.hpp"

#include <algorithm>
#include <cmath>

#include "saltgov/lp.hpp"

namespace saltgov {

double kkt_residual(const QpProblem& pr, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
    double r = 0.0;
    const Eigen::VectorXd grad = pr.hessian * x + pr.linear;
    if (pr.ineq.rows() > 0) {
        r = (grad + pr.ineq.transpose() * lambda).cwiseAbs().maxCoeff();
        const Eigen::VectorXd slack = pr.bound - pr.ineq * x;
        for (Eigen::Index i = 0; i < slack.size(); ++i) {
            r = std::max(r, -slack(i));
            r = std::max(r, -lambda(i));
            r = std::max(r, std::abs(lambda(i) * slack(i)));
        }
    } else if (grad.size() > 0) {
        r = grad.cwiseAbs().maxCoeff();
    }
    return r;
}

Eigen::VectorXd phase_one(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const Eigen::Index n = a.cols();
    const Eigen::Index rows = a.rows();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(rows + 1, n + 1);
    g.topLeftCorner(rows, n) = a;
    g.col(n).head(rows).setConstant(-1.0);
    g(rows, n) = -1.0;
    Eigen::VectorXd h(rows + 1);
    h.head(rows) = b;
    h(rows) = 1.0;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
    c(n) = 1.0;

    const LpResult lp = solve_lp(c, g, h);
    if (lp.status != LpStatus::optimal) throw std::logic_error("phase_one: auxiliary LP not solved");
    const double scale = std::max(1.0, b.size() > 0 ? b.cwiseAbs().maxCoeff() : 0.0);
    if (lp.x(n) > 1e-12 * scale)
        throw QpInfeasibleError("QP constraints are infeasible", lp.multipliers.head(rows));
    return lp.x.head(n);
}

QpResult solve_qp(const QpProblem& pr, const std::optional<Eigen::VectorXd>& start) {
    const Eigen::Index n = pr.hessian.rows();
    const Eigen::Index rows = pr.ineq.rows();
    if (pr.hessian.cols() != n || pr.linear.size() != n || (rows > 0 && pr.ineq.cols() != n) ||
        pr.bound.size() != rows)
        throw std::invalid_argument("solve_qp: dimension mismatch");
    if (pr.hessian.llt().info() != Eigen::Success)
        throw std::invalid_argument("solve_qp: Hessian is not positive definite");

    QpResult res;
    res.multipliers = Eigen::VectorXd::Zero(rows);
    const double feas_tol = 1e-12 * std::max(1.0, rows > 0 ? pr.bound.cwiseAbs().maxCoeff() : 0.0);

    Eigen::VectorXd x;
    if (start && start->size() == n &&
        (rows == 0 || (pr.ineq * *start - pr.bound).maxCoeff() <= feas_tol)) {
        x = *start;
    } else if (rows == 0) {
        x = Eigen::VectorXd::Zero(n);
    } else {
        x = phase_one(pr.ineq, pr.bound);
        res.used_phase_one = true;
    }

    std::vector<int> work;
    const int cap = static_cast<int>(std::max<Eigen::Index>(100 * rows, 100));
    Eigen::VectorXd lambda_w;
    for (;;) {
        if (++res.iterations > cap) throw QpIterationError("solve_qp: iteration cap reached");

        const Eigen::Index w = static_cast<Eigen::Index>(work.size());
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + w, n + w);
        kkt.topLeftCorner(n, n) = pr.hessian;
        for (Eigen::Index i = 0; i < w; ++i) {
            kkt.block(n + i, 0, 1, n) = pr.ineq.row(work[i]);
            kkt.block(0, n + i, n, 1) = pr.ineq.row(work[i]).transpose();
        }
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + w);
        rhs.head(n) = -(pr.hessian * x + pr.linear);
        const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
        const Eigen::VectorXd p = sol.head(n);
        lambda_w = sol.tail(w);

        if (p.norm() <= 1e-13 * std::max(1.0, x.norm())) {
            Eigen::Index drop = -1;
            double most_negative = -1e-14;
            for (Eigen::Index i = 0; i < w; ++i) {
                if (lambda_w(i) < most_negative) {
                    most_negative = lambda_w(i);
                    drop = i;
                }
            }
            if (drop < 0) break;
            work.erase(work.begin() + drop);
            continue;
        }

        double alpha = 1.0;
        int blocking = -1;
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (std::find(work.begin(), work.end(), static_cast<int>(i)) != work.end()) continue;
            const double ap = pr.ineq.row(i).dot(p);
            if (ap <= 1e-12 * pr.ineq.row(i).norm() * p.norm()) continue;
            const double step = std::max(0.0, (pr.bound(i) - pr.ineq.row(i).dot(x)) / ap);
            if (step < alpha) {
                alpha = step;
                blocking = static_cast<int>(i);
            }
        }
        x += alpha * p;
        if (blocking >= 0) work.push_back(blocking);
    }

    for (std::size_t i = 0; i < work.size(); ++i)
        res.multipliers(work[i]) = std::max(lambda_w(static_cast<Eigen::Index>(i)), 0.0);
    res.active_set = work;
    std::sort(res.active_set.begin(), res.active_set.end());
    res.x = x;
    res.kkt_residual = kkt_residual(pr, x, res.multipliers);
    return res;
}

}  // namespace saltgov
