#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "saltgov/plant.hpp"

namespace saltgov {

struct PiGains {
    double kp = 0.0;
    double ki = 0.0;
};

struct PiController {
    double kp = 0.0;
    double ki = 0.0;
    double integrator = 0.0;
    double output_min = 0.0;
    double output_max = 0.0;
    double setpoint = 0.0;
    double bias = 0.0;  // command at zero error and zero integral
};

// One PI update: e = setpoint - measurement, u = bias + kp e + ki I.
// Conditional integration: the integrator is held whenever the
// unclamped command saturates and integrating would either push deeper
// into saturation or grow |I|.
std::pair<PiController, double> pi_step(const PiController& ctrl, double measurement, double dt);

class TuningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// First-order-plus-dead-time fit of an open-loop step.
struct ReactionCurve {
    double gain = 0.0;      // process units per command unit
    double tau = 0.0;       // s
    double dead_time = 0.0; // s
};

// Two-point (28.3% / 63.2%) fit on a recorded step response.
// `response` holds the deviation from the pre-step value at times[i].
ReactionCurve fit_reaction_curve(const std::vector<double>& times,
                                 const std::vector<double>& response, double step_size,
                                 double dt);

// PI gains from a reaction curve: tau_c = max(theta, 0.05 tau, 10 dt),
// kp = tau / (K (tau_c + theta)), Ti = tau.
PiGains gains_from_reaction_curve(const ReactionCurve& rc, double dt);

struct TunedGains {
    PiGains m_dot_s;
    PiGains t_p_in;
    ReactionCurve m_dot_s_curve;
    ReactionCurve t_p_in_curve;
};

TunedGains tune_open_loop(const LoopParams& params, double dt = 0.2);

// Actuator limits used by the loop controllers.
struct ActuatorLimits {
    double u_s_min = 0.0;
    double u_s_max = 1.0;
    double q_dot_min = 0.0;   // MW
    double q_dot_max = 40.0;  // MW
};

struct LoopControllers {
    PiController m_dot_s;
    PiController t_p_in;
};

LoopControllers make_controllers(const LoopParams& params, const PiGains& m_dot_s,
                                 const PiGains& t_p_in, const ActuatorLimits& limits = {});

// Runs both PI loops for one step: returns the updated controllers and the
// actuator command to hold over [t, t + dt].
std::pair<LoopControllers, ActuatorCommand> control_step(const LoopControllers& ctrls,
                                                         const PlantState& state,
                                                         double m_dot_s_ref, double t_p_in_ref,
                                                         double dt);

}  // namespace saltgov
