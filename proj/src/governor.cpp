#include "saltgov/governor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace saltgov {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRegularization = 1e-8;

struct RowMap {
    ActiveRows rows;
    std::vector<int> index;  // kept row -> row of the full set
};

RowMap kept_rows_with_index(const AdmissibleSet& set) {
    RowMap map{kept(set), {}};
    for (Eigen::Index r = 0; r < set.rows(); ++r)
        if (set.keep[static_cast<std::size_t>(r)]) map.index.push_back(static_cast<int>(r));
    return map;
}

void check_dims(const GovernorState& gov, const AdmissibleSet& set, const Eigen::VectorXd& x,
                const Eigen::VectorXd& r) {
    const Eigen::Index m = set.h_v.cols();
    if (x.size() != set.h_x.cols() || r.size() != m || gov.v_prev.size() != m ||
        gov.span.size() != m || gov.q_weight.rows() != m || gov.q_weight.cols() != m)
        throw DimensionMismatchError("governor: dimension mismatch");
}

}  // namespace

GovernorMode parse_mode(const std::string& text) {
    if (text == "bypass") return GovernorMode::bypass;
    if (text == "srg") return GovernorMode::srg;
    if (text == "cg") return GovernorMode::cg;
    throw std::invalid_argument("unknown governor mode: " + text);
}

std::string to_string(GovernorMode mode) {
    switch (mode) {
        case GovernorMode::bypass: return "bypass";
        case GovernorMode::srg: return "srg";
        case GovernorMode::cg: return "cg";
    }
    return "unknown";
}

GovernorState make_governor(GovernorMode mode, const Eigen::VectorXd& span,
                            const Eigen::MatrixXd& q_weight) {
    if (q_weight.rows() != span.size() || q_weight.cols() != span.size())
        throw std::invalid_argument("governor: Q must be m x m");
    if (!q_weight.isApprox(q_weight.transpose(), 0.0) || q_weight.llt().info() != Eigen::Success)
        throw std::invalid_argument("governor: Q must be symmetric positive definite");
    if ((span.array() <= 0.0).any()) throw std::invalid_argument("governor: spans must be positive");
    GovernorState g;
    g.mode = mode;
    g.span = span;
    g.q_weight = q_weight;
    g.v_prev = Eigen::VectorXd::Zero(span.size());
    return g;
}

std::optional<double> srg_kappa(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                                const Eigen::VectorXd& v_prev, const Eigen::VectorXd& r,
                                double tol) {
    const Eigen::VectorXd d = r - v_prev;
    const Eigen::VectorXd slack = c - a * v_prev;
    const Eigen::VectorXd rate = a * d;
    double kappa = 1.0;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
        if (slack(i) < -tol) return std::nullopt;
        if (rate(i) > 0.0) kappa = std::min(kappa, std::max(slack(i), 0.0) / rate(i));
    }
    return std::clamp(kappa, 0.0, 1.0);
}

Eigen::VectorXd least_violation(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                                const Eigen::VectorXd& w_start, const Eigen::VectorXd& w_ref,
                                const Eigen::MatrixXd& q) {
    auto objective = [&](const Eigen::VectorXd& w) {
        const Eigen::ArrayXd viol = (a * w - c).array().max(0.0);
        const Eigen::VectorXd dw = w - w_ref;
        return 0.5 * viol.square().sum() + 0.5 * kRegularization * dw.dot(q * dw);
    };
    Eigen::VectorXd w = w_start;
    for (int it = 0; it < 200; ++it) {
        const Eigen::VectorXd res = a * w - c;
        Eigen::MatrixXd hess = kRegularization * q;
        Eigen::VectorXd grad = kRegularization * q * (w - w_ref);
        for (Eigen::Index i = 0; i < res.size(); ++i) {
            if (res(i) > 0.0) {
                hess += a.row(i).transpose() * a.row(i);
                grad += res(i) * a.row(i).transpose();
            }
        }
        const Eigen::VectorXd step = -hess.ldlt().solve(grad);
        const double slope = grad.dot(step);
        if (!(slope < 0.0) || step.norm() <= 1e-15 * std::max(1.0, w.norm())) break;
        const double f0 = objective(w);
        double t = 1.0;
        while (t > 1e-12 && objective(w + t * step) > f0 + 1e-4 * t * slope) t *= 0.5;
        w += t * step;
    }
    return w;
}

std::pair<GovernorState, GovernorStep> srg_step(const GovernorState& gov, const AdmissibleSet& set,
                                                const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
    check_dims(gov, set, x, r);
    const RowMap map = kept_rows_with_index(set);
    const Eigen::VectorXd c = map.rows.h - map.rows.h_x * x;
    GovernorStep step;
    step.r = r;
    const auto kappa = srg_kappa(map.rows.h_v, c, gov.v_prev, r);
    if (kappa) {
        step.kappa = *kappa;
        step.v = gov.v_prev + *kappa * (r - gov.v_prev);
    } else {
        const Eigen::VectorXd span_inv = gov.span.cwiseInverse();
        const Eigen::MatrixXd g = map.rows.h_v * gov.span.asDiagonal();
        const Eigen::VectorXd w = least_violation(g, c, gov.v_prev.cwiseProduct(span_inv),
                                                  r.cwiseProduct(span_inv), gov.q_weight);
        step.v = w.cwiseProduct(gov.span);
        step.kappa = kNaN;
        step.flag = StepFlag::fallback;
    }
    step.margin = is_member(set, x, step.v).margin;
    GovernorState next = gov;
    next.v_prev = step.v;
    return {next, step};
}

std::pair<GovernorState, GovernorStep> cg_step(const GovernorState& gov, const AdmissibleSet& set,
                                               const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
    check_dims(gov, set, x, r);
    const RowMap map = kept_rows_with_index(set);
    const Eigen::VectorXd c = map.rows.h - map.rows.h_x * x;
    const Eigen::MatrixXd g = map.rows.h_v * gov.span.asDiagonal();
    const Eigen::VectorXd span_inv = gov.span.cwiseInverse();
    const Eigen::VectorXd w_r = r.cwiseProduct(span_inv);

    GovernorStep step;
    step.r = r;
    step.kappa = kNaN;
    const double viol = g.rows() > 0 ? (g * w_r - c).maxCoeff() : -1.0;
    if (viol <= 0.0) {
        step.v = r;
    } else {
        QpProblem qp{2.0 * gov.q_weight, -2.0 * gov.q_weight * w_r, g, c};
        try {
            const QpResult sol = solve_qp(qp, Eigen::VectorXd(gov.v_prev.cwiseProduct(span_inv)));
            step.v = sol.x.cwiseProduct(gov.span);
            step.kkt_residual = sol.kkt_residual;
            for (int i : sol.active_set) step.active_set.push_back(map.index[static_cast<std::size_t>(i)]);
        } catch (const QpInfeasibleError&) {
            const Eigen::VectorXd w =
                least_violation(g, c, gov.v_prev.cwiseProduct(span_inv), w_r, gov.q_weight);
            step.v = w.cwiseProduct(gov.span);
            step.flag = StepFlag::fallback;
        }
    }
    step.margin = is_member(set, x, step.v).margin;
    GovernorState next = gov;
    next.v_prev = step.v;
    return {next, step};
}

std::pair<GovernorState, GovernorStep> govern(const GovernorState& gov, const AdmissibleSet* set,
                                              const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
    if (gov.mode == GovernorMode::bypass) {
        GovernorStep step;
        step.r = r;
        step.v = r;
        step.kappa = kNaN;
        step.margin = set ? is_member(*set, x, r).margin : kNaN;
        GovernorState next = gov;
        next.v_prev = r;
        return {next, step};
    }
    if (!set) throw std::invalid_argument("govern: admissible set required outside bypass mode");
    return gov.mode == GovernorMode::srg ? srg_step(gov, *set, x, r) : cg_step(gov, *set, x, r);
}

}  // namespace saltgov
