#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "saltgov/dmdc.hpp"

using namespace saltgov;

namespace {

Eigen::MatrixXd random_stable(int n, std::mt19937& rng, double radius = 0.9) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
    return a * (radius / std::max(spectral_radius(a), 1e-12));
}

Eigen::MatrixXd random_inputs(int m, int L, std::mt19937& rng) {
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    Eigen::MatrixXd u(m, L);
    for (int i = 0; i < m; ++i)
        for (int k = 0; k < L; ++k) u(i, k) = ud(rng);
    return u;
}

std::vector<std::string> labels(const std::string& prefix, Eigen::Index count) {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

SnapshotLog make_log(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c,
                     const Eigen::MatrixXd& u, const Eigen::VectorXd& x0) {
    const Eigen::Index L = u.cols();
    SnapshotLog log;
    log.states.resize(a.rows(), L + 1);
    log.inputs = u;
    log.outputs.resize(c.rows(), L + 1);
    Eigen::VectorXd x = x0;
    for (Eigen::Index k = 0; k <= L; ++k) {
        log.times.push_back(0.2 * static_cast<double>(k));
        log.states.col(k) = x;
        log.outputs.col(k) = c * x;
        if (k < L) x = a * x + b * u.col(k);
    }
    log.state_names = labels("x", a.rows());
    log.input_names = labels("u", b.cols());
    log.output_names = labels("y", c.rows());
    log.reference_point = {Eigen::VectorXd::Zero(a.rows()), Eigen::VectorXd::Zero(b.cols()),
                           Eigen::VectorXd::Zero(c.rows())};
    return log;
}

// Independent oracle: [A B] = X' Omega^T (Omega Omega^T)^-1.
Eigen::MatrixXd normal_equations(const SnapshotLog& log) {
    const Eigen::Index n = log.states.rows(), m = log.inputs.rows(), L = log.inputs.cols();
    Eigen::MatrixXd omega(n + m, L);
    omega << log.states.leftCols(L), log.inputs;
    const Eigen::MatrixXd gram = omega * omega.transpose();
    return (log.states.rightCols(L) * omega.transpose()) * gram.inverse();
}

}  // namespace

TEST(Dmdc, ScalarRecovery) {
    std::mt19937 rng(1);
    Eigen::MatrixXd a(1, 1), b(1, 1), c(1, 1);
    a << 0.9;
    b << 0.1;
    c << 1.0;
    const SnapshotLog log = make_log(a, b, c, random_inputs(1, 50, rng), Eigen::VectorXd::Zero(1));
    const LtiModel m = identify_dmdc(log);
    EXPECT_NEAR(m.a(0, 0), 0.9, 1e-10);
    EXPECT_NEAR(m.b(0, 0), 0.1, 1e-10);
    EXPECT_EQ(m.d.rows(), 1);
    EXPECT_EQ(m.d(0, 0), 0.0);
}

TEST(Dmdc, RandomSystemMatchesTruthAndNormalEquations) {
    std::mt19937 rng(7);
    const Eigen::MatrixXd a = random_stable(3, rng);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Random(3, 2);
    const Eigen::MatrixXd c = Eigen::MatrixXd::Random(2, 3);
    const SnapshotLog log = make_log(a, b, c, random_inputs(2, 500, rng), Eigen::VectorXd::Ones(3));
    const LtiModel m = identify_dmdc(log);
    EXPECT_LE((m.a - a).norm(), 1e-8);
    EXPECT_LE((m.b - b).norm(), 1e-8);
    EXPECT_LE((m.c - c).norm(), 1e-8);

    const Eigen::MatrixXd g = normal_equations(log);
    EXPECT_LE((m.a - g.leftCols(3)).norm(), 1e-10);
    EXPECT_LE((m.b - g.rightCols(2)).norm(), 1e-10);
}

TEST(Dmdc, SvdPathMatchesNormalEquationsUpToTenDimensions) {
    std::mt19937 rng(11);
    for (int n = 1; n <= 8; ++n) {
        const int m = 2;
        const Eigen::MatrixXd a = random_stable(n, rng, 0.8);
        const Eigen::MatrixXd b = Eigen::MatrixXd::Random(n, m);
        const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(1, n);
        const SnapshotLog log = make_log(a, b, c, random_inputs(m, 400, rng), Eigen::VectorXd::Zero(n));
        const LtiModel est = identify_dmdc(log);
        const Eigen::MatrixXd g = normal_equations(log);
        Eigen::MatrixXd ab(n, n + m);
        ab << est.a, est.b;
        EXPECT_LE((ab - g).norm(), 1e-9) << "n = " << n;
    }
}

TEST(Dmdc, ShiftInvariantInDeviationCoordinates) {
    std::mt19937 rng(3);
    const Eigen::MatrixXd a = random_stable(3, rng);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Random(3, 2);
    const Eigen::MatrixXd c = Eigen::MatrixXd::Random(2, 3);
    const SnapshotLog log = make_log(a, b, c, random_inputs(2, 300, rng), Eigen::VectorXd::Zero(3));
    SnapshotLog shifted = log;
    const Eigen::Vector3d offset(500.0, -20.0, 3.0);
    shifted.states.colwise() += offset;
    shifted.reference_point.states = offset;
    const LtiModel m0 = identify_dmdc(log);
    const LtiModel m1 = identify_dmdc(shifted);
    EXPECT_LE((m0.a - m1.a).norm(), 1e-10);
    EXPECT_LE((m0.b - m1.b).norm(), 1e-10);
}

TEST(Dmdc, ReplayNoWorseThanResidual) {
    std::mt19937 rng(5);
    const Eigen::MatrixXd a = random_stable(4, rng, 0.7);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Random(4, 1);
    const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(4, 4);
    const SnapshotLog log = make_log(a, b, c, random_inputs(1, 200, rng), Eigen::VectorXd::Zero(4));
    const LtiModel m = identify_dmdc(log);
    const ModelTrajectory sim = simulate_model(m, log.states.col(0), log.inputs);
    const Eigen::Index L = log.inputs.cols();
    const Eigen::MatrixXd one_step =
        m.a * log.states.leftCols(L) + m.b * log.inputs - log.states.rightCols(L);
    const double residual = one_step.squaredNorm() / static_cast<double>(one_step.size());
    const double replay = (sim.states - log.states).squaredNorm() / static_cast<double>(log.states.size());
    EXPECT_LE(replay, residual + 1e-24);
}

TEST(Dmdc, OutputsThatAreStatesGetSelectorRows) {
    std::mt19937 rng(9);
    const Eigen::MatrixXd a = random_stable(2, rng);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Random(2, 1);
    Eigen::MatrixXd c(2, 2);
    c << 0.0, 1.0, 0.3, 0.4;
    SnapshotLog log = make_log(a, b, c, random_inputs(1, 100, rng), Eigen::VectorXd::Zero(2));
    log.output_names = {"x1", "mix"};
    const LtiModel m = identify_dmdc(log);
    EXPECT_EQ(m.c(0, 0), 0.0);
    EXPECT_EQ(m.c(0, 1), 1.0);
    EXPECT_NEAR(m.c(1, 0), 0.3, 1e-10);
    EXPECT_NEAR(m.c(1, 1), 0.4, 1e-10);
}

TEST(Dmdc, RankErrorsAndWarnings) {
    std::mt19937 rng(2);
    const Eigen::MatrixXd a = random_stable(2, rng);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Random(2, 2);
    const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(2, 2);

    // Second input is a copy of the first: Omega has rank 3 of 4.
    Eigen::MatrixXd u = random_inputs(2, 100, rng);
    u.row(1) = u.row(0);
    const SnapshotLog log = make_log(a, b, c, u, Eigen::VectorXd::Zero(2));
    RankTruncation full;
    full.rank = 4;
    EXPECT_THROW(identify_dmdc(log, full), RankDeficiencyError);
    RankTruncation too_big;
    too_big.rank = 5;
    EXPECT_THROW(identify_dmdc(log, too_big), std::invalid_argument);
    EXPECT_EQ(identify_dmdc(log).singular_values.size(), 3u);

    // Nearly collinear inputs pass the threshold but trip the condition warning.
    Eigen::MatrixXd u2 = random_inputs(2, 100, rng);
    u2.row(1) = u2.row(0) + 1e-13 * random_inputs(1, 100, rng);
    RankTruncation loose;
    loose.threshold = 1e-16;
    const LtiModel m = identify_dmdc(make_log(a, b, c, u2, Eigen::VectorXd::Zero(2)), loose);
    ASSERT_FALSE(m.warnings.empty());
    EXPECT_NE(m.warnings[0].find("ill-conditioned"), std::string::npos);
}

TEST(Dmdc, OutputRankProjection) {
    std::mt19937 rng(4);
    const Eigen::MatrixXd a = random_stable(3, rng);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Random(3, 1);
    const Eigen::MatrixXd c = Eigen::MatrixXd::Random(1, 3);
    const SnapshotLog log = make_log(a, b, c, random_inputs(1, 200, rng), Eigen::VectorXd::Zero(3));
    RankTruncation r;
    r.output_rank = 2;
    const LtiModel m = identify_dmdc(log, r);
    EXPECT_EQ(m.a.rows(), 2);
    EXPECT_EQ(m.b.rows(), 2);
    EXPECT_EQ(m.c.cols(), 2);
    EXPECT_EQ(m.state_names.size(), 2u);
}

TEST(Dmdc, ValidateRejectsBadLogs) {
    std::mt19937 rng(6);
    const Eigen::MatrixXd a = random_stable(2, rng);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Random(2, 1);
    const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(2, 2);
    const SnapshotLog log = make_log(a, b, c, random_inputs(1, 20, rng), Eigen::VectorXd::Zero(2));

    SnapshotLog bad = log;
    bad.inputs = bad.inputs.leftCols(19).eval();
    EXPECT_THROW(validate(bad), std::invalid_argument);
    bad = log;
    bad.times[5] += 1e-6;
    EXPECT_THROW(validate(bad), std::invalid_argument);
    bad = log;
    bad.state_names.pop_back();
    EXPECT_THROW(validate(bad), std::invalid_argument);
    EXPECT_NO_THROW(validate(log));

    SnapshotLog short_log = make_log(a, b, c, random_inputs(1, 2, rng), Eigen::VectorXd::Zero(2));
    EXPECT_THROW(identify_dmdc(short_log), std::invalid_argument);
}

TEST(Dmdc, SimulateModelTrivialCases) {
    LtiModel m;
    m.a = Eigen::MatrixXd::Identity(2, 2);
    m.b = Eigen::MatrixXd::Zero(2, 1);
    m.c = Eigen::MatrixXd::Identity(2, 2);
    m.d = Eigen::MatrixXd::Zero(2, 1);
    m.reference_point = {Eigen::Vector2d(10.0, 20.0), Eigen::VectorXd::Constant(1, 5.0),
                         Eigen::Vector2d(10.0, 20.0)};
    const Eigen::MatrixXd u = Eigen::MatrixXd::Constant(1, 10, 5.0);

    const ModelTrajectory eq = simulate_model(m, m.reference_point.states, u);
    for (Eigen::Index k = 0; k < eq.outputs.cols(); ++k)
        EXPECT_EQ(eq.outputs.col(k), m.reference_point.outputs);

    const ModelTrajectory e1 = simulate_model(m, Eigen::Vector2d(11.0, 20.0), u);
    for (Eigen::Index k = 0; k < e1.states.cols(); ++k) EXPECT_EQ(e1.states.col(k), Eigen::Vector2d(11.0, 20.0));

    EXPECT_THROW(simulate_model(m, Eigen::Vector3d::Zero(), u), DimensionMismatchError);
}

TEST(Dmdc, NormalizedMseFloorsConstantSignals) {
    Eigen::MatrixXd actual(2, 4), pred(2, 4);
    actual << 1, 2, 3, 4, 179, 179, 179, 179;
    pred << 1, 2, 3, 5, 179, 179, 179, 180;
    const Eigen::VectorXd e = normalized_mse(pred, actual);
    EXPECT_NEAR(e(0), 0.25 / 1.25, 1e-15);
    EXPECT_NEAR(e(1), 0.25 / (179.0 * 179.0), 1e-15);
}

namespace {

// Two-state cascade with y = x1; a third row is white noise.
SnapshotLog cascade_with_noise() {
    std::mt19937 rng(21);
    Eigen::MatrixXd a(2, 2), b(2, 1), c(1, 2);
    a << 0.95, 0.0, 0.04, 0.9;
    b << 0.05, 0.0;
    c << 0.0, 1.0;
    Eigen::MatrixXd u(1, 600);
    for (int k = 0; k < 600; ++k) u(0, k) = ((k / 40) % 2 == 0 ? 1.0 : -1.0) + 0.3 * std::sin(0.05 * k);
    SnapshotLog log = make_log(a, b, c, u, Eigen::VectorXd::Zero(2));
    std::normal_distribution<double> nd(0.0, 0.5);
    Eigen::MatrixXd states(3, log.states.cols());
    states.topRows(2) = log.states;
    for (Eigen::Index k = 0; k < states.cols(); ++k) states(2, k) = nd(rng);
    log.states = states;
    log.state_names = {"x0", "x1", "noise"};
    log.reference_point.states = Eigen::VectorXd::Zero(3);
    return log;
}

}  // namespace

TEST(Selection, NoiseNeverBeatsSignal) {
    const SnapshotLog log = cascade_with_noise();
    const SelectionResult r = select_states(log, {"noise", "x0", "x1"}, {"y0"});
    ASSERT_FALSE(r.selected.empty());
    bool seen_noise = false;
    for (const auto& s : r.selected) {
        if (s == "noise") seen_noise = true;
        else EXPECT_FALSE(seen_noise) << "noise selected before " << s;
    }

    // Exhaustive oracle over all subsets: the best subset holds no noise row.
    std::vector<std::vector<std::string>> subsets = {{"x0"},          {"x1"},          {"noise"},
                                                     {"x0", "x1"},    {"x0", "noise"}, {"x1", "noise"},
                                                     {"x0", "x1", "noise"}};
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::string> best_set;
    for (const auto& s : subsets) {
        const double mse = evaluate_subset(select_state_rows(log, {"x0", "x1", "noise"}), s).mse;
        if (mse < best) {
            best = mse;
            best_set = s;
        }
    }
    EXPECT_EQ(std::count(best_set.begin(), best_set.end(), "noise"), 0);
    EXPECT_LE(r.mse, 1.1 * best);
}

TEST(Selection, CascadeNeedsBothStates) {
    // x1 alone cannot see the input, so the pair is what wins.
    const SnapshotLog log = cascade_with_noise();
    const SelectionResult r = select_states(log, {"noise", "x1", "x0"}, {"y0"});
    EXPECT_NE(std::find(r.selected.begin(), r.selected.end(), "x0"), r.selected.end());
    EXPECT_NE(std::find(r.selected.begin(), r.selected.end(), "x1"), r.selected.end());
    EXPECT_LT(r.mse, 1e-6);
}

TEST(Selection, Deterministic) {
    const SnapshotLog log = cascade_with_noise();
    const SelectionResult a = select_states(log, {"noise", "x0", "x1"}, {"y0"});
    const SelectionResult b = select_states(log, {"noise", "x0", "x1"}, {"y0"});
    EXPECT_EQ(a.selected, b.selected);
    EXPECT_EQ(a.mse, b.mse);
    EXPECT_EQ(a.evaluated.size(), b.evaluated.size());
}

TEST(Selection, SplitKeepsSharedInstant) {
    const SnapshotLog log = cascade_with_noise();
    auto [train, valid] = split_log(log, 420);
    EXPECT_EQ(train.states.cols(), 421);
    EXPECT_EQ(valid.states.cols(), log.states.cols() - 420);
    EXPECT_EQ(train.states.col(420), valid.states.col(0));
    EXPECT_THROW(split_log(log, 0), std::invalid_argument);
}
