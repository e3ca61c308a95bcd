#include <gtest/gtest.h>

#include <cmath>

#include "saltgov/scenario.hpp"

using namespace saltgov;

namespace {

const LtiModel& loop_model() {
    static const LtiModel m = identify_loop_model(ScenarioConfig{});
    return m;
}

ScenarioConfig governed(GovernorMode mode, BoundDirection dir) {
    ScenarioConfig c;
    c.mode = mode;
    c.constraints = dir;
    c.model = loop_model();
    return c;
}

const RunArtifacts& ungoverned() {
    static const RunArtifacts r = run_experiment(ScenarioConfig{});
    return r;
}

const RunArtifacts& cg_constant() {
    static const RunArtifacts r = run_experiment(governed(GovernorMode::cg, BoundDirection::constant));
    return r;
}

}  // namespace

// ---- bound schedules ----------------------------------------------------------

TEST(BoundSchedule, RampValues) {
    const BoundSchedule inc{kTsOutMin, BoundDirection::increasing};
    const BoundSchedule dec{kTsOutMin, BoundDirection::decreasing};
    EXPECT_DOUBLE_EQ(bound_at(inc, 1000.0), 512.85);
    EXPECT_DOUBLE_EQ(bound_at(dec, 1000.0), 512.85);
    EXPECT_DOUBLE_EQ(bound_at(inc, 2400.0), 513.85);
    EXPECT_DOUBLE_EQ(bound_at(dec, 3000.0), 510.85);
    EXPECT_DOUBLE_EQ(bound_at(inc, 2800.0), 514.85);
    EXPECT_DOUBLE_EQ(bound_at(inc, 3600.0), 514.85);
    EXPECT_DOUBLE_EQ(bound_at(inc, 2000.0), 512.85);
}

TEST(BoundSchedule, DirectionsAreSymmetric) {
    const BoundSchedule inc{kTsOutMin, BoundDirection::increasing};
    const BoundSchedule dec{kTsOutMin, BoundDirection::decreasing};
    const BoundSchedule flat{kTsOutMin, BoundDirection::constant};
    EXPECT_NEAR(bound_at(inc, 2400.0) + bound_at(dec, 2400.0), 1025.7, 1e-12);
    for (double t = 0.0; t <= 3600.0; t += 37.5) {
        EXPECT_NEAR(bound_at(inc, t) + bound_at(dec, t), 2.0 * kTsOutMin, 1e-12) << t;
        EXPECT_EQ(bound_at(flat, t), kTsOutMin);
        EXPECT_LE(bound_at(dec, t), bound_at(flat, t));
    }
}

TEST(BoundSchedule, ParseDirection) {
    EXPECT_EQ(parse_direction("constant"), BoundDirection::constant);
    EXPECT_EQ(parse_direction("eq7-increasing"), BoundDirection::increasing);
    EXPECT_EQ(to_string(BoundDirection::decreasing), "eq7-decreasing");
    EXPECT_THROW(parse_direction("increasing"), std::invalid_argument);
}

TEST(BoundSchedule, LoopConstraintRows) {
    const OutputConstraintSet cs = loop_constraints(BoundDirection::increasing).at(2400.0);
    ASSERT_EQ(cs.coeffs.rows(), 2);
    EXPECT_EQ(cs.coeffs.row(0), Eigen::RowVector4d(1, 0, 0, 0));
    EXPECT_EQ(cs.coeffs.row(1), Eigen::RowVector4d(0, -1, 0, 0));
    EXPECT_DOUBLE_EQ(cs.bounds(0), 586.85);
    EXPECT_DOUBLE_EQ(cs.bounds(1), -513.85);
}

// ---- trajectories -----------------------------------------------------------

TEST(Trajectory, LoadFollowStartsAtNominal) {
    const ReferenceTrajectory lf = build_load_follow();
    EXPECT_EQ(lf.at(0.0), Eigen::Vector2d(380.0, 585.0));
    EXPECT_EQ(lf.at(3600.0), Eigen::Vector2d(380.0, 585.0));
    EXPECT_EQ(lf.at(1e6), Eigen::Vector2d(380.0, 585.0));
    EXPECT_NO_THROW(validate(lf.m_dot_s_ref));
    EXPECT_NO_THROW(validate(lf.t_p_in_ref));
    // Continuous to the sampling step.
    for (double t = 0.0; t < 3600.0; t += 0.2)
        EXPECT_LT((lf.at(t + 0.2) - lf.at(t)).cwiseAbs().maxCoeff(), 0.5) << t;
}

TEST(Trajectory, ProfileInterpolatesKnots) {
    const Profile p = profile_from_knots({{0.0, 1.0}, {10.0, 3.0}, {20.0, 3.0}});
    EXPECT_DOUBLE_EQ(p.at(5.0), 2.0);
    EXPECT_DOUBLE_EQ(p.at(-1.0), 1.0);
    EXPECT_DOUBLE_EQ(p.at(15.0), 3.0);
    EXPECT_THROW(profile_from_knots({{0.0, 1.0}, {0.0, 2.0}}), std::invalid_argument);
}

TEST(Trajectory, SteadyHoldKeepsTemperatures) {
    ScenarioConfig c;
    c.trajectory = build_steady_hold();
    c.duration = 600.0;
    const RunArtifacts r = run_experiment(c);
    for (const auto& row : r.trace) {
        ASSERT_NEAR(row.state.t_p_in, 585.0, 1e-6) << row.t;
        ASSERT_NEAR(row.state.t_s_out, 517.0, 1e-6) << row.t;
    }
}

// ---- closed-loop runs -------------------------------------------------------

TEST(Scenario, UngovernedLoadFollowViolatesBothBounds) {
    const ViolationSummary v = summarize(ungoverned());
    EXPECT_GE(v.t_p_out_max_excess, 1.0);
    EXPECT_GE(v.t_s_out_max_deficit, 1.0);
    EXPECT_EQ(ungoverned().trace.size(), 18001u);
}

TEST(Scenario, CommandGovernorHoldsConstantBounds) {
    const ViolationSummary v = summarize(cg_constant());
    EXPECT_LE(v.t_p_out_max_excess, 0.05);
    EXPECT_LE(v.t_s_out_max_deficit, 0.05);
    EXPECT_EQ(v.fallback_steps, 0);
    for (const auto& g : cg_constant().governor_log) ASSERT_LE(g.step.kkt_residual, 1e-8) << g.t;
}

TEST(Scenario, ScalarGovernorHoldsConstantBounds) {
    const RunArtifacts r = run_experiment(governed(GovernorMode::srg, BoundDirection::constant));
    const ViolationSummary v = summarize(r);
    EXPECT_LE(v.t_p_out_max_excess, 0.05);
    EXPECT_LE(v.t_s_out_max_deficit, 0.05);
    for (const auto& g : r.governor_log)
        if (g.step.flag == StepFlag::ok) ASSERT_TRUE(g.step.kappa >= 0.0 && g.step.kappa <= 1.0);
}

TEST(Scenario, LoopModelIsStableAndOriginAdmissible) {
    const LtiModel& m = loop_model();
    EXPECT_LT(spectral_radius(m.a), 1.0);
    EXPECT_EQ(m.state_names, default_model_states());
    MoasOptions opt;
    opt.check_determinedness = false;
    const AdmissibleSet set = build_moas(m, loop_constraints(BoundDirection::constant).at(0.0), opt);
    EXPECT_TRUE(is_member(set, Eigen::VectorXd::Zero(m.a.rows()), Eigen::VectorXd::Zero(2)).member);
}

TEST(Scenario, ModelReplaysHeldOutManeuver) {
    ScenarioConfig c;
    c.trajectory = build_alternating_ramps();
    const RunArtifacts held_out = run_experiment(c);
    const SnapshotLog log = snapshot_log(held_out.trace, loop_model().state_names);
    const ModelTrajectory sim = simulate_model(loop_model(), log.states.col(0), log.inputs);
    const Eigen::VectorXd e = normalized_mse(sim.outputs, log.outputs);
    ASSERT_EQ(e.size(), 4);
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_LE(e(i), 1e-3) << output_labels()[static_cast<std::size_t>(i)];
}

TEST(Scenario, RunsAreDeterministic) {
    ScenarioConfig c;
    c.duration = 400.0;
    const RunArtifacts a = run_experiment(c);
    const RunArtifacts b = run_experiment(c);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        ASSERT_EQ(pack_dynamic(a.trace[i].state), pack_dynamic(b.trace[i].state));
        ASSERT_EQ(a.trace[i].command.q_dot, b.trace[i].command.q_dot);
    }
}

TEST(Scenario, SliceRecordedAtRequestedTime) {
    ScenarioConfig c = governed(GovernorMode::cg, BoundDirection::constant);
    c.duration = 700.0;
    c.slice_times = {550.0, 650.0};
    const RunArtifacts r = run_experiment(c);
    ASSERT_EQ(r.slices.size(), 2u);
    EXPECT_DOUBLE_EQ(r.slices[0].t, 550.0);
    EXPECT_FALSE(r.slices[0].empty);
    EXPECT_GT(polygon_area(r.slices[0].polygon), 0.0);
}

TEST(Scenario, PlantFailureReportsStep) {
    ScenarioConfig c;
    c.plant.t_s_in = 850.0;
    c.pi_m_dot_s = PiGains{0.004, 0.001};
    c.pi_t_p_in = PiGains{3.0, 0.03};
    try {
        run_experiment(c);
        FAIL() << "expected ScenarioError";
    } catch (const ScenarioError& e) {
        EXPECT_GT(e.step, 0);
        EXPECT_NE(std::string(e.what()).find("(step " + std::to_string(e.step) + ")"), std::string::npos);
    }
}

TEST(Scenario, RejectsBadConfig) {
    ScenarioConfig c;
    c.dt = 0.0;
    EXPECT_THROW(run_experiment(c), std::invalid_argument);
    c = ScenarioConfig{};
    c.model_states = {"T_p_in", "bogus"};
    EXPECT_THROW(run_experiment(c), std::invalid_argument);
    c = ScenarioConfig{};
    c.span = Eigen::Vector2d(80.0, 0.0);
    EXPECT_THROW(run_experiment(c), std::invalid_argument);
}

TEST(Scenario, SnapshotLogShapes) {
    ScenarioConfig c;
    c.duration = 10.0;
    const RunArtifacts r = run_experiment(c);
    const SnapshotLog log = snapshot_log(r.trace, default_model_states());
    EXPECT_EQ(log.states.rows(), 7);
    EXPECT_EQ(log.states.cols(), 51);
    EXPECT_EQ(log.inputs.cols(), 50);
    EXPECT_EQ(log.outputs.rows(), 4);
    EXPECT_EQ(log.input_names, input_labels());
    EXPECT_DOUBLE_EQ(log.states(0, 0), r.trace[0].state.t_p_3);
}
