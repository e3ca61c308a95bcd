#include "saltgov/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace saltgov {

namespace {

constexpr int kDegenerateRunLimit = 50;

struct DualSimplex {
    const Eigen::MatrixXd& g;
    const Eigen::VectorXd& h;
    Eigen::Index d;
    Eigen::Index n_real;
    Eigen::VectorXd sign;  // row flips so that b >= 0
    Eigen::VectorXd b;
    std::vector<Eigen::Index> basis;
    std::vector<char> in_basis;
    Eigen::VectorXd xb;
    Eigen::VectorXd pi;
    int iterations = 0;
    int iteration_cap = 0;
    bool bland = false;
    int degenerate_run = 0;

    bool is_artificial(Eigen::Index j) const { return j >= n_real; }

    Eigen::VectorXd column(Eigen::Index j) const {
        if (is_artificial(j)) return Eigen::VectorXd::Unit(d, j - n_real);
        return sign.cwiseProduct(g.row(j).transpose());
    }

    double cost(Eigen::Index j, bool phase_one) const {
        if (phase_one) return is_artificial(j) ? 1.0 : 0.0;
        return is_artificial(j) ? 0.0 : h(j);
    }

    // Returns false if the phase is unbounded.
    bool run(bool phase_one) {
        const double price_tol = 1e-10 * (phase_one ? 1.0 : std::max(1.0, h.cwiseAbs().maxCoeff()));
        for (;;) {
            if (++iterations > iteration_cap) throw std::runtime_error("solve_lp: iteration cap reached");

            Eigen::MatrixXd bmat(d, d);
            Eigen::VectorXd fb(d);
            for (Eigen::Index i = 0; i < d; ++i) {
                bmat.col(i) = column(basis[i]);
                fb(i) = cost(basis[i], phase_one);
            }
            const Eigen::PartialPivLU<Eigen::MatrixXd> lu(bmat);
            xb = lu.solve(b);
            pi = lu.transpose().solve(fb);

            // Pricing over structural columns.
            const Eigen::VectorXd sp = sign.cwiseProduct(pi);
            Eigen::VectorXd reduced = -(g * sp);
            if (!phase_one) reduced += h;

            Eigen::Index entering = -1;
            double best = -price_tol;
            for (Eigen::Index j = 0; j < n_real; ++j) {
                if (in_basis[j]) continue;
                if (reduced(j) < best) {
                    entering = j;
                    if (bland) break;
                    best = reduced(j);
                }
            }
            if (entering < 0) return true;

            const Eigen::VectorXd dir = lu.solve(column(entering));
            const double piv_tol = 1e-11 * std::max(1.0, dir.cwiseAbs().maxCoeff());
            Eigen::Index leave = -1;
            double theta = 0.0;
            for (Eigen::Index i = 0; i < d; ++i) {
                double ratio;
                if (!phase_one && is_artificial(basis[i])) {
                    if (std::abs(dir(i)) <= piv_tol) continue;
                    ratio = 0.0;
                } else {
                    if (dir(i) <= piv_tol) continue;
                    ratio = std::max(xb(i), 0.0) / dir(i);
                }
                if (leave < 0 || ratio < theta - 1e-14) {
                    leave = i;
                    theta = ratio;
                } else if (ratio <= theta + 1e-14) {
                    const bool better = bland ? basis[i] < basis[leave]
                                              : std::abs(dir(i)) > std::abs(dir(leave));
                    if (better) {
                        leave = i;
                        theta = std::min(theta, ratio);
                    }
                }
            }
            if (leave < 0) return false;

            degenerate_run = theta <= 1e-14 ? degenerate_run + 1 : 0;
            if (degenerate_run > kDegenerateRunLimit) bland = true;

            const Eigen::Index out = basis[leave];
            if (!is_artificial(out)) in_basis[out] = 0;
            basis[leave] = entering;
            in_basis[entering] = 1;
        }
    }
};

}  // namespace

LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& g, const Eigen::VectorXd& h) {
    if (g.cols() != c.size() || g.rows() != h.size())
        throw std::invalid_argument("solve_lp: dimension mismatch");
    const Eigen::Index d = c.size();
    const Eigen::Index n = g.rows();

    LpResult result;
    if (d == 0) {
        result.x.resize(0);
        result.multipliers = Eigen::VectorXd::Zero(n);
        result.status = (h.array() >= 0.0).all() ? LpStatus::optimal : LpStatus::infeasible;
        return result;
    }

    DualSimplex s{g, h, d, n, Eigen::VectorXd(d), Eigen::VectorXd(d), {}, {}, {}, {}};
    for (Eigen::Index i = 0; i < d; ++i) {
        s.sign(i) = -c(i) < 0.0 ? -1.0 : 1.0;
        s.b(i) = std::abs(c(i));
    }
    s.in_basis.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < d; ++i) s.basis.push_back(n + i);
    s.iteration_cap = static_cast<int>(20 * (n + d) + 1000);

    s.run(true);
    double infeasibility = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
        if (s.is_artificial(s.basis[i])) infeasibility += std::max(s.xb(i), 0.0);
    result.iterations = s.iterations;
    if (infeasibility > 1e-9 * std::max(1.0, s.b.maxCoeff())) {
        result.status = LpStatus::unbounded_or_infeasible;
        return result;
    }

    s.degenerate_run = 0;
    const bool bounded = s.run(false);
    result.iterations = s.iterations;
    if (!bounded) {
        result.status = LpStatus::infeasible;
        return result;
    }

    result.status = LpStatus::optimal;
    result.x = s.sign.cwiseProduct(s.pi);
    result.multipliers = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!s.is_artificial(s.basis[i])) result.multipliers(s.basis[i]) = std::max(s.xb(i), 0.0);
    }
    result.objective = c.dot(result.x);
    return result;
}

}  // namespace saltgov
