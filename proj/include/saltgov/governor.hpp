#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "saltgov/moas.hpp"
#include "saltgov/qp.hpp"

namespace saltgov {

enum class GovernorMode { bypass, srg, cg };

GovernorMode parse_mode(const std::string& text);
std::string to_string(GovernorMode mode);

// Inputs are handled in deviation coordinates of the model. The CG
// objective is posed in normalized units v / span.
struct GovernorState {
    Eigen::VectorXd v_prev;
    GovernorMode mode = GovernorMode::cg;
    Eigen::MatrixXd q_weight;
    Eigen::VectorXd span;
};

GovernorState make_governor(GovernorMode mode, const Eigen::VectorXd& span,
                            const Eigen::MatrixXd& q_weight);

enum class StepFlag { ok = 0, fallback = 1 };

struct GovernorStep {
    Eigen::VectorXd r;
    Eigen::VectorXd v;
    double kappa = 0.0;  // NaN outside SRG or on fallback
    std::vector<int> active_set;  // CG: row indices of the admissible set
    double margin = 0.0;
    double kkt_residual = 0.0;
    StepFlag flag = StepFlag::ok;
};

// Largest kappa in [0, 1] keeping v_prev + kappa (r - v_prev) inside
// {v : a_i v <= c_i}; nullopt if v_prev itself violates a row by more
// than `tol`.
std::optional<double> srg_kappa(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                                const Eigen::VectorXd& v_prev, const Eigen::VectorXd& r,
                                double tol = 1e-9);

// Minimizer of the squared constraint violation sum_i max(0, a_i w - c_i)^2,
// regularized toward w_ref to make it unique.
Eigen::VectorXd least_violation(const Eigen::MatrixXd& a, const Eigen::VectorXd& c,
                                const Eigen::VectorXd& w_start, const Eigen::VectorXd& w_ref,
                                const Eigen::MatrixXd& q_weight);

std::pair<GovernorState, GovernorStep> srg_step(const GovernorState& gov, const AdmissibleSet& set,
                                                const Eigen::VectorXd& x, const Eigen::VectorXd& r);

std::pair<GovernorState, GovernorStep> cg_step(const GovernorState& gov, const AdmissibleSet& set,
                                               const Eigen::VectorXd& x, const Eigen::VectorXd& r);

// Dispatches on gov.mode. `set` may be null only in bypass mode.
std::pair<GovernorState, GovernorStep> govern(const GovernorState& gov, const AdmissibleSet* set,
                                              const Eigen::VectorXd& x, const Eigen::VectorXd& r);

}  // namespace saltgov
