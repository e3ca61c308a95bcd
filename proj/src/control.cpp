#include "saltgov/control.hpp"

#include <algorithm>
#include <cmath>

namespace saltgov {

std::pair<PiController, double> pi_step(const PiController& ctrl, double measurement, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("pi_step: dt must be positive");
    PiController next = ctrl;
    const double e = ctrl.setpoint - measurement;
    const double candidate_i = ctrl.integrator + e * dt;
    const double u_raw = ctrl.bias + ctrl.kp * e + ctrl.ki * candidate_i;

    const bool high = u_raw > ctrl.output_max;
    const bool low = u_raw < ctrl.output_min;
    bool hold = false;
    if (high || low) {
        const bool deeper = (high && e > 0.0) || (low && e < 0.0);
        const bool grows = std::abs(candidate_i) > std::abs(ctrl.integrator);
        hold = deeper || grows;
    }
    next.integrator = hold ? ctrl.integrator : candidate_i;
    const double u = ctrl.bias + ctrl.kp * e + ctrl.ki * next.integrator;
    return {next, std::clamp(u, ctrl.output_min, ctrl.output_max)};
}

namespace {

double crossing_time(const std::vector<double>& t, const std::vector<double>& y, double level) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] >= level) {
            if (i == 0) return t[0];
            const double frac = (level - y[i - 1]) / (y[i] - y[i - 1]);
            return t[i - 1] + frac * (t[i] - t[i - 1]);
        }
    }
    throw TuningError("step response never reached the fit level");
}

}  // namespace

ReactionCurve fit_reaction_curve(const std::vector<double>& times,
                                 const std::vector<double>& response, double step_size,
                                 double dt) {
    if (times.size() != response.size() || times.size() < 3)
        throw std::invalid_argument("fit_reaction_curve: inconsistent samples");
    if (step_size == 0.0) throw std::invalid_argument("fit_reaction_curve: zero step");

    const double final_value = response.back();
    if (!(std::abs(final_value) > 0.0)) throw TuningError("step produced no response");

    // Normalize so the response rises toward +1.
    std::vector<double> y(response.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = response[i] / final_value;

    constexpr double kMonotoneTol = 0.01;
    double running_max = y[0];
    for (double v : y) {
        if (v < running_max - kMonotoneTol)
            throw TuningError("step response is not monotonic");
        running_max = std::max(running_max, v);
    }
    if (running_max > 1.0 + kMonotoneTol) throw TuningError("step response overshoots");

    const double t28 = crossing_time(times, y, 0.283);
    const double t63 = crossing_time(times, y, 0.632);
    ReactionCurve rc;
    rc.gain = final_value / step_size;
    rc.tau = 1.5 * (t63 - t28);
    rc.dead_time = std::max(t63 - rc.tau, dt);
    if (!(rc.tau > 0.0)) throw TuningError("degenerate time constant");
    return rc;
}

PiGains gains_from_reaction_curve(const ReactionCurve& rc, double dt) {
    const double tau_c = std::max({rc.dead_time, 0.05 * rc.tau, 10.0 * dt});
    PiGains g;
    g.kp = rc.tau / (rc.gain * (tau_c + rc.dead_time));
    g.ki = g.kp / rc.tau;
    if (!(g.kp > 0.0) || !(g.ki > 0.0) || !std::isfinite(g.kp) || !std::isfinite(g.ki))
        throw TuningError("tuning produced non-positive gains");
    return g;
}

TunedGains tune_open_loop(const LoopParams& params, double dt) {
    const PlantState s0 = nominal_state();
    const ActuatorCommand u0 = nominal_command(params);

    auto record = [&](ActuatorCommand cmd, double duration, auto measure) {
        std::vector<double> t, y;
        PlantState s = s0;
        const int n = static_cast<int>(std::lround(duration / dt));
        t.reserve(n + 1);
        y.reserve(n + 1);
        t.push_back(0.0);
        y.push_back(0.0);
        for (int k = 1; k <= n; ++k) {
            s = step_plant(params, s, cmd, dt);
            t.push_back(k * dt);
            y.push_back(measure(s) - measure(s0));
        }
        return std::make_pair(t, y);
    };

    TunedGains out;

    ActuatorCommand pump_step = u0;
    pump_step.u_s = u0.u_s * 1.01;
    auto [tm, ym] = record(pump_step, 60.0, [](const PlantState& s) { return s.m_dot_s; });
    out.m_dot_s_curve = fit_reaction_curve(tm, ym, pump_step.u_s - u0.u_s, dt);
    out.m_dot_s = gains_from_reaction_curve(out.m_dot_s_curve, dt);

    ActuatorCommand heat_step = u0;
    heat_step.q_dot = u0.q_dot * 1.01;
    auto [th, yh] = record(heat_step, 1500.0, [](const PlantState& s) { return s.t_p_in; });
    out.t_p_in_curve = fit_reaction_curve(th, yh, heat_step.q_dot - u0.q_dot, dt);
    out.t_p_in = gains_from_reaction_curve(out.t_p_in_curve, dt);
    return out;
}

LoopControllers make_controllers(const LoopParams& params, const PiGains& m_dot_s,
                                 const PiGains& t_p_in, const ActuatorLimits& limits) {
    const ActuatorCommand u0 = nominal_command(params);
    LoopControllers c;
    c.m_dot_s = {m_dot_s.kp, m_dot_s.ki, 0.0, limits.u_s_min, limits.u_s_max,
                 NominalPoint::m_dot_s, u0.u_s};
    c.t_p_in = {t_p_in.kp, t_p_in.ki, 0.0, limits.q_dot_min, limits.q_dot_max,
                NominalPoint::t_p_in, u0.q_dot};
    return c;
}

std::pair<LoopControllers, ActuatorCommand> control_step(const LoopControllers& ctrls,
                                                         const PlantState& state,
                                                         double m_dot_s_ref, double t_p_in_ref,
                                                         double dt) {
    LoopControllers next = ctrls;
    next.m_dot_s.setpoint = m_dot_s_ref;
    next.t_p_in.setpoint = t_p_in_ref;
    ActuatorCommand cmd;
    std::tie(next.m_dot_s, cmd.u_s) = pi_step(next.m_dot_s, state.m_dot_s, dt);
    std::tie(next.t_p_in, cmd.q_dot) = pi_step(next.t_p_in, state.t_p_in, dt);
    return {next, cmd};
}

}  // namespace saltgov
