#include <gtest/gtest.h>

#include <cmath>

#include "saltgov/control.hpp"

using namespace saltgov;

namespace {

struct Loop {
    LoopParams params = calibrate_steady_state();
    TunedGains gains = tune_open_loop(params, 0.2);
};

const Loop& loop() {
    static const Loop l;
    return l;
}

}  // namespace

TEST(Pi, ZeroErrorGivesBias) {
    PiController c{2.0, 0.5, 0.0, 0.0, 10.0, 3.0, 4.0};
    const auto [next, u] = pi_step(c, 3.0, 0.2);
    EXPECT_DOUBLE_EQ(u, 4.0);
    EXPECT_DOUBLE_EQ(next.integrator, 0.0);
}

TEST(Pi, IntegratorAccumulatesError) {
    PiController c{2.0, 0.5, 0.0, -100.0, 100.0, 1.0, 0.0};
    auto [c1, u1] = pi_step(c, 0.0, 0.2);
    auto [c2, u2] = pi_step(c1, 0.0, 0.2);
    EXPECT_DOUBLE_EQ(c1.integrator, 0.2);
    EXPECT_DOUBLE_EQ(c2.integrator, 0.4);
    EXPECT_NEAR(u2 - u1, c.ki * 1.0 * 0.2, 1e-15);
}

TEST(Pi, OutputClampedAndIntegratorHeld) {
    PiController c{10.0, 1.0, 0.0, 0.0, 1.0, 5.0, 0.5};
    double prev_abs = 0.0;
    for (int k = 0; k < 50; ++k) {
        auto [next, u] = pi_step(c, 0.0, 0.2);
        EXPECT_LE(u, 1.0);
        EXPECT_GE(u, 0.0);
        EXPECT_LE(std::abs(next.integrator), prev_abs + 1e-15);
        prev_abs = std::abs(next.integrator);
        c = next;
    }
    EXPECT_DOUBLE_EQ(c.integrator, 0.0);
}

TEST(Pi, IntegratorUnwindsOutOfSaturation) {
    // Saturated high with a large positive integral: a negative error must
    // still be allowed to shrink the integrator.
    PiController c{0.1, 1.0, 10.0, 0.0, 1.0, 0.0, 0.5};
    auto [next, u] = pi_step(c, 1.0, 0.2);
    EXPECT_DOUBLE_EQ(u, 1.0);
    EXPECT_LT(next.integrator, 10.0);
}

TEST(Pi, RejectsNonPositiveDt) {
    PiController c{1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
    EXPECT_THROW(pi_step(c, 0.0, 0.0), std::invalid_argument);
}

TEST(Tuning, ReactionCurveOnFirstOrderResponse) {
    // Oracle: y = K (1 - exp(-(t - theta)/tau)) for t > theta.
    const double K = 2.0, tau = 50.0, theta = 5.0, dt = 0.2;
    std::vector<double> t, y;
    for (int k = 0; k <= 5000; ++k) {
        const double tk = k * dt;
        t.push_back(tk);
        y.push_back(tk > theta ? K * 0.5 * (1.0 - std::exp(-(tk - theta) / tau)) : 0.0);
    }
    const ReactionCurve rc = fit_reaction_curve(t, y, 0.5, dt);
    EXPECT_NEAR(rc.gain, K, 1e-6);
    EXPECT_NEAR(rc.tau, tau, 0.5);
    EXPECT_NEAR(rc.dead_time, theta, 0.5);
}

TEST(Tuning, RejectsOscillatoryResponse) {
    std::vector<double> t, y;
    for (int k = 0; k <= 1000; ++k) {
        t.push_back(0.2 * k);
        y.push_back(1.0 - std::exp(-0.01 * k) * std::cos(0.05 * k));
    }
    EXPECT_THROW(fit_reaction_curve(t, y, 1.0, 0.2), TuningError);
}

TEST(Tuning, GainsArePositiveAndFinite) {
    const TunedGains& g = loop().gains;
    for (const PiGains& pg : {g.m_dot_s, g.t_p_in}) {
        EXPECT_GT(pg.kp, 0.0);
        EXPECT_GT(pg.ki, 0.0);
        EXPECT_TRUE(std::isfinite(pg.kp));
        EXPECT_TRUE(std::isfinite(pg.ki));
    }
    // The pump loop is a pure first-order lag: K = 500 kg/s per unit drive,
    // tau = 4 s.
    EXPECT_NEAR(g.m_dot_s_curve.gain, 500.0, 0.5);
    EXPECT_NEAR(g.m_dot_s_curve.tau, 4.0, 0.1);
}

namespace {

// Closed loop with only one setpoint moving; returns the trace of the moved
// measurement.
std::vector<double> closed_loop(double ms_ref, double t_ref, int steps, bool record_temp) {
    const Loop& l = loop();
    LoopControllers c = make_controllers(l.params, l.gains.m_dot_s, l.gains.t_p_in);
    PlantState s = nominal_state();
    std::vector<double> y;
    for (int k = 0; k < steps; ++k) {
        auto [next, cmd] = control_step(c, s, ms_ref, t_ref, 0.2);
        s = step_plant(l.params, s, cmd, 0.2);
        c = next;
        y.push_back(record_temp ? s.t_p_in : s.m_dot_s);
    }
    return y;
}

}  // namespace

TEST(Tuning, SetpointStepsOvershootBelowFivePercent) {
    for (double sign : {1.0, -1.0}) {
        const double d_ms = sign * 3.8;
        const auto ms = closed_loop(380.0 + d_ms, 585.0, 1500, false);
        double peak = 0.0;
        for (double v : ms) peak = std::max(peak, (v - 380.0) / d_ms);
        EXPECT_LT(peak, 1.05);
        EXPECT_NEAR(ms.back(), 380.0 + d_ms, 0.01 * std::abs(d_ms));

        const double d_t = sign * 5.85;
        const auto tt = closed_loop(380.0, 585.0 + d_t, 6000, true);
        peak = 0.0;
        for (double v : tt) peak = std::max(peak, (v - 585.0) / d_t);
        EXPECT_LT(peak, 1.05);
        EXPECT_NEAR(tt.back(), 585.0 + d_t, 0.01 * std::abs(d_t));
    }
}

TEST(Control, HoldsSteadyStateFor600s) {
    const Loop& l = loop();
    LoopControllers c = make_controllers(l.params, l.gains.m_dot_s, l.gains.t_p_in);
    PlantState s = nominal_state();
    for (int k = 0; k < 3000; ++k) {
        auto [next, cmd] = control_step(c, s, 380.0, 585.0, 0.2);
        s = step_plant(l.params, s, cmd, 0.2);
        c = next;
        ASSERT_NEAR(s.m_dot_s, 380.0, 0.38);
        ASSERT_NEAR(s.t_p_in, 585.0, 0.585);
    }
}

TEST(Control, TracksSecondaryFlowRamp) {
    const Loop& l = loop();
    LoopControllers c = make_controllers(l.params, l.gains.m_dot_s, l.gains.t_p_in);
    PlantState s = nominal_state();
    for (int k = 0; k < 3000; ++k) {
        const double t = 0.2 * k;
        const double ref = t < 100.0 ? 380.0 - 0.8 * t : 300.0;
        auto [next, cmd] = control_step(c, s, ref, 585.0, 0.2);
        s = step_plant(l.params, s, cmd, 0.2);
        c = next;
    }
    EXPECT_LT(std::abs(s.m_dot_s - 300.0), 0.5);
}

TEST(Control, IntegratorsExposedForLogging) {
    const Loop& l = loop();
    LoopControllers c = make_controllers(l.params, l.gains.m_dot_s, l.gains.t_p_in);
    PlantState s = nominal_state();
    auto [next, cmd] = control_step(c, s, 381.0, 585.0, 0.2);
    EXPECT_DOUBLE_EQ(next.m_dot_s.integrator, 0.2);
    EXPECT_DOUBLE_EQ(next.t_p_in.integrator, 0.0);
    EXPECT_GT(cmd.u_s, nominal_command(l.params).u_s);
}
