#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace saltgov {

struct LoopParams {
    double cp_primary = 0.0;    // J/(kg K)
    double cp_secondary = 0.0;  // J/(kg K)
    // heater node, HX primary node, HX secondary node (J/K)
    std::array<double, 3> thermal_masses{};
    double hx_ua = 0.0;  // W/K, fixed
    // hot leg, cold leg advection lags (s)
    std::array<double, 2> transport_delays{};
    double pump_head = 0.0;       // kPa
    double friction_coeff = 0.0;  // kPa s^2/kg^2
    double flow_inertia = 0.0;    // kPa s/(kg/s)
    double p_p_out = 0.0;         // kPa, pressurizer boundary
    double t_s_in = 0.0;          // C
    double m_dot_s_max = 0.0;     // kg/s at u_s = 1
    double u_s_max = 1.0;
    double pump_lag = 0.0;  // s, secondary pump
};

struct PlantState {
    double t_p_in = 0.0;
    double t_p_out = 0.0;
    double t_p_1 = 0.0;
    double t_p_3 = 0.0;
    double t_s_out = 0.0;
    double p_p_out = 0.0;
    double p_p_1 = 0.0;
    double m_dot_p = 0.0;
    double m_dot_s = 0.0;
    double q_dot = 0.0;  // MW, last applied heater power
    std::array<double, 2> pi_integrators{};  // [m_dot_s loop, T_p_in loop]
};

struct ActuatorCommand {
    double u_s = 0.0;
    double q_dot = 0.0;  // MW
};

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OutOfRangeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Nominal full-power operating point of the loop.
struct NominalPoint {
    static constexpr double q_dot = 18.0;  // MW
    static constexpr double m_dot_p = 589.0;
    static constexpr double t_p_in = 585.0;
    static constexpr double t_p_out = 572.0;
    static constexpr double t_p_1 = 572.0;
    static constexpr double t_p_3 = 585.0;
    static constexpr double p_p_out = 179.0;
    static constexpr double p_p_1 = 200.0;
    static constexpr double m_dot_s = 380.0;
    static constexpr double t_s_in = 492.0;
    static constexpr double t_s_out = 517.0;
};

LoopParams calibrate_steady_state();

// Throws std::invalid_argument if any parameter is non-positive.
void validate(const LoopParams& params);

PlantState nominal_state();
ActuatorCommand nominal_command(const LoopParams& params);

PlantState step_plant(const LoopParams& params, const PlantState& state,
                      const ActuatorCommand& cmd, double dt);

// [t_p_out, t_s_out, p_p_out, p_p_1]
Eigen::Vector4d measure_outputs(const PlantState& state);

// Heat duty across the exchanger (W).
double hx_duty(const LoopParams& params, const PlantState& state);

// Dynamic part of the state: [t_p_3, t_p_in, t_p_out, t_p_1, t_s_out, m_dot_s, m_dot_p]
using DynVector = Eigen::Matrix<double, 7, 1>;
DynVector pack_dynamic(const PlantState& state);
DynVector plant_derivative(const LoopParams& params, const DynVector& z,
                           const ActuatorCommand& cmd);

}  // namespace saltgov
