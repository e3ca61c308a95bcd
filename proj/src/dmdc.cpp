#include "saltgov/dmdc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace saltgov {

namespace {

std::ptrdiff_t index_of(const std::vector<std::string>& names, const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : std::distance(names.begin(), it);
}

Eigen::MatrixXd centered(const Eigen::MatrixXd& m, const Eigen::VectorXd& ref) {
    return m.colwise() - ref;
}

}  // namespace

void validate(const SnapshotLog& log) {
    const auto n = log.states.rows();
    const auto m = log.inputs.rows();
    const auto p = log.outputs.rows();
    const auto L = log.inputs.cols();
    if (log.states.cols() != L + 1)
        throw std::invalid_argument("snapshot log: states must have one more column than inputs");
    if (log.outputs.cols() != L + 1)
        throw std::invalid_argument("snapshot log: outputs must align with states");
    if (static_cast<Eigen::Index>(log.times.size()) != L + 1)
        throw std::invalid_argument("snapshot log: one time stamp per state column required");
    if (static_cast<Eigen::Index>(log.state_names.size()) != n ||
        static_cast<Eigen::Index>(log.input_names.size()) != m ||
        static_cast<Eigen::Index>(log.output_names.size()) != p)
        throw std::invalid_argument("snapshot log: label count does not match row count");
    if (log.reference_point.states.size() != n || log.reference_point.inputs.size() != m ||
        log.reference_point.outputs.size() != p)
        throw std::invalid_argument("snapshot log: reference point has wrong dimensions");
    if (L >= 1) {
        const double dt = log.times[1] - log.times[0];
        if (!(dt > 0.0)) throw std::invalid_argument("snapshot log: time must increase");
        for (std::size_t i = 1; i < log.times.size(); ++i) {
            if (std::abs((log.times[i] - log.times[i - 1]) - dt) >= 1e-9)
                throw std::invalid_argument("snapshot log: non-uniform sampling");
        }
    }
}

LtiModel identify_dmdc(const SnapshotLog& log, const RankTruncation& rank) {
    validate(log);
    const Eigen::Index n = log.states.rows();
    const Eigen::Index m = log.inputs.rows();
    const Eigen::Index L = log.inputs.cols();
    if (n == 0) throw std::invalid_argument("identify_dmdc: empty state set");
    if (L < n + m) throw std::invalid_argument("identify_dmdc: need at least n + m snapshots");

    const Eigen::MatrixXd x = centered(log.states, log.reference_point.states);
    const Eigen::MatrixXd v = centered(log.inputs, log.reference_point.inputs);
    const Eigen::MatrixXd y = centered(log.outputs, log.reference_point.outputs);

    Eigen::MatrixXd omega(n + m, L);
    omega.topRows(n) = x.leftCols(L);
    omega.bottomRows(m) = v;
    const Eigen::MatrixXd x_next = x.rightCols(L);

    // Omega^T = U S W^T, so Omega = W S U^T.
    Eigen::JacobiSVD<Eigen::MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(
        omega.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    if (!(sigma(0) > 0.0)) throw RankDeficiencyError("identify_dmdc: snapshot matrix is zero");

    Eigen::Index keep = 0;
    if (rank.rank) {
        keep = static_cast<Eigen::Index>(*rank.rank);
        if (keep < 1 || keep > n + m)
            throw std::invalid_argument("identify_dmdc: rank must lie in [1, n + m]");
        if (!(sigma(keep - 1) / sigma(0) > std::numeric_limits<double>::epsilon()))
            throw RankDeficiencyError("identify_dmdc: data support fewer directions than requested");
    } else {
        while (keep < sigma.size() && sigma(keep) / sigma(0) > rank.threshold) ++keep;
    }

    LtiModel model;
    if (sigma(0) / sigma(keep - 1) > 1e12) {
        std::ostringstream os;
        os << "ill-conditioned snapshot matrix: condition number " << sigma(0) / sigma(keep - 1);
        model.warnings.push_back(os.str());
    }

    const Eigen::MatrixXd u_t = svd.matrixU().leftCols(keep);  // L x keep
    const Eigen::MatrixXd w = svd.matrixV().leftCols(keep);    // (n+m) x keep
    const Eigen::VectorXd inv_sigma = sigma.head(keep).cwiseInverse();
    const Eigen::MatrixXd g = (x_next * u_t) * inv_sigma.asDiagonal() * w.transpose();
    Eigen::MatrixXd a = g.leftCols(n);
    Eigen::MatrixXd b = g.rightCols(m);

    // C by least squares over all instants, exact selector rows for
    // outputs that are also states.
    const Eigen::Index p = y.rows();
    Eigen::MatrixXd c = x.transpose().colPivHouseholderQr().solve(y.transpose()).transpose();
    for (Eigen::Index i = 0; i < p; ++i) {
        const auto j = index_of(log.state_names, log.output_names[i]);
        if (j >= 0) {
            c.row(i).setZero();
            c(i, j) = 1.0;
        }
    }

    model.dt = log.times.size() > 1 ? log.times[1] - log.times[0] : 0.0;
    model.input_names = log.input_names;
    model.output_names = log.output_names;
    model.reference_point = log.reference_point;
    model.singular_values.assign(sigma.data(), sigma.data() + keep);

    const Eigen::Index r = rank.output_rank ? static_cast<Eigen::Index>(*rank.output_rank) : n;
    if (r < 1 || r > n) throw std::invalid_argument("identify_dmdc: output rank must lie in [1, n]");
    if (r < n) {
        Eigen::JacobiSVD<Eigen::MatrixXd> proj(x_next, Eigen::ComputeThinU);
        const Eigen::MatrixXd basis = proj.matrixU().leftCols(r);
        a = basis.transpose() * a * basis;
        b = basis.transpose() * b;
        c = c * basis;
        for (Eigen::Index i = 0; i < r; ++i) model.state_names.push_back("mode_" + std::to_string(i + 1));
        model.reference_point.states = Eigen::VectorXd::Zero(r);
    } else {
        model.state_names = log.state_names;
    }

    model.a = std::move(a);
    model.b = std::move(b);
    model.c = std::move(c);
    model.d = Eigen::MatrixXd::Zero(p, m);
    return model;
}

ModelTrajectory simulate_model(const LtiModel& model, const Eigen::VectorXd& x0,
                               const Eigen::MatrixXd& inputs) {
    const Eigen::Index n = model.a.rows();
    if (model.a.cols() != n || model.b.rows() != n || model.c.cols() != n ||
        x0.size() != n || inputs.rows() != model.b.cols() ||
        model.reference_point.states.size() != n ||
        model.reference_point.inputs.size() != model.b.cols() ||
        model.reference_point.outputs.size() != model.c.rows())
        throw DimensionMismatchError("simulate_model: dimension mismatch");

    const Eigen::Index L = inputs.cols();
    ModelTrajectory out;
    out.states.resize(n, L + 1);
    out.outputs.resize(model.c.rows(), L + 1);
    Eigen::VectorXd x = x0 - model.reference_point.states;
    for (Eigen::Index k = 0; k <= L; ++k) {
        out.states.col(k) = x + model.reference_point.states;
        out.outputs.col(k) = model.c * x + model.reference_point.outputs;
        if (k < L) x = model.a * x + model.b * (inputs.col(k) - model.reference_point.inputs);
    }
    return out;
}

double spectral_radius(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::VectorXd normalized_mse(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& actual) {
    if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols() || actual.cols() == 0)
        throw DimensionMismatchError("normalized_mse: shape mismatch");
    Eigen::VectorXd out(actual.rows());
    for (Eigen::Index i = 0; i < actual.rows(); ++i) {
        const double mean = actual.row(i).mean();
        const double var = (actual.row(i).array() - mean).square().mean();
        const double mse = (predicted.row(i) - actual.row(i)).array().square().mean();
        const double floor_scale = std::max(1.0, mean * mean);
        const double denom = var > 1e-12 * floor_scale ? var : floor_scale;
        out(i) = mse / denom;
    }
    return out;
}

SnapshotLog select_state_rows(const SnapshotLog& log, const std::vector<std::string>& names) {
    SnapshotLog out;
    out.times = log.times;
    out.inputs = log.inputs;
    out.outputs = log.outputs;
    out.input_names = log.input_names;
    out.output_names = log.output_names;
    out.reference_point.inputs = log.reference_point.inputs;
    out.reference_point.outputs = log.reference_point.outputs;
    out.state_names = names;
    out.states.resize(static_cast<Eigen::Index>(names.size()), log.states.cols());
    out.reference_point.states.resize(static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto j = index_of(log.state_names, names[i]);
        if (j < 0) throw std::invalid_argument("snapshot log has no state named " + names[i]);
        out.states.row(static_cast<Eigen::Index>(i)) = log.states.row(j);
        out.reference_point.states(static_cast<Eigen::Index>(i)) = log.reference_point.states(j);
    }
    return out;
}

std::pair<SnapshotLog, SnapshotLog> split_log(const SnapshotLog& log, std::size_t split) {
    const auto L = static_cast<std::size_t>(log.inputs.cols());
    if (split < 1 || split >= L) throw std::invalid_argument("split_log: split outside the log");
    auto part = [&](std::size_t first, std::size_t last) {  // instants [first, last]
        SnapshotLog s = log;
        const auto cols = static_cast<Eigen::Index>(last - first + 1);
        const auto f = static_cast<Eigen::Index>(first);
        s.times.assign(log.times.begin() + f, log.times.begin() + f + cols);
        s.states = log.states.middleCols(f, cols);
        s.outputs = log.outputs.middleCols(f, cols);
        s.inputs = log.inputs.middleCols(f, cols - 1);
        return s;
    };
    return {part(0, split), part(split, L)};
}

namespace {

SnapshotLog restrict_outputs(const SnapshotLog& log, const std::vector<std::string>& outputs) {
    SnapshotLog out = log;
    out.output_names = outputs;
    out.outputs.resize(static_cast<Eigen::Index>(outputs.size()), log.outputs.cols());
    out.reference_point.outputs.resize(static_cast<Eigen::Index>(outputs.size()));
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const auto j = index_of(log.output_names, outputs[i]);
        if (j < 0) throw std::invalid_argument("snapshot log has no output named " + outputs[i]);
        out.outputs.row(static_cast<Eigen::Index>(i)) = log.outputs.row(j);
        out.reference_point.outputs(static_cast<Eigen::Index>(i)) = log.reference_point.outputs(j);
    }
    return out;
}

}  // namespace

SubsetScore evaluate_subset(const SnapshotLog& log, const std::vector<std::string>& states,
                            const RankTruncation& rank) {
    SubsetScore score{states, std::numeric_limits<double>::infinity()};
    const SnapshotLog sub = select_state_rows(log, states);
    const auto L = static_cast<std::size_t>(sub.inputs.cols());
    const auto split = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(L)));
    auto [train, valid] = split_log(sub, split);

    Eigen::MatrixXd predicted;
    if (states.empty()) {
        predicted = valid.reference_point.outputs.replicate(1, valid.outputs.cols());
    } else {
        LtiModel model;
        try {
            model = identify_dmdc(train, rank);
        } catch (const std::exception&) {
            return score;
        }
        if (!(spectral_radius(model.a) < 1.0)) return score;
        predicted = simulate_model(model, valid.states.col(0), valid.inputs).outputs;
    }
    const double mse = normalized_mse(predicted, valid.outputs).mean();
    if (std::isfinite(mse)) score.mse = mse;
    return score;
}

SelectionResult select_states(const SnapshotLog& log, const std::vector<std::string>& candidates,
                              const std::vector<std::string>& outputs, const RankTruncation& rank) {
    const SnapshotLog base = restrict_outputs(log, outputs);
    SelectionResult result;
    SubsetScore current = evaluate_subset(base, {}, rank);
    result.evaluated.push_back(current);

    std::vector<std::string> remaining = candidates;
    while (!remaining.empty()) {
        std::size_t best_idx = remaining.size();
        SubsetScore best;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            std::vector<std::string> trial = result.selected;
            trial.push_back(remaining[i]);
            SubsetScore s = evaluate_subset(base, trial, rank);
            result.evaluated.push_back(s);
            if (best_idx == remaining.size() || s.mse < best.mse) {
                best = s;
                best_idx = i;
            }
        }
        const bool improves = std::isinf(current.mse)
                                  ? std::isfinite(best.mse)
                                  : best.mse < current.mse * (1.0 - 0.01);
        if (!improves) break;
        result.selected.push_back(remaining[best_idx]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_idx));
        current = best;
    }
    result.mse = current.mse;
    return result;
}

}  // namespace saltgov
