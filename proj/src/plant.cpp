#include "saltgov/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace saltgov {

namespace {

constexpr double kMW = 1.0e6;
constexpr int kSubsteps = 10;
constexpr double kTempMin = 400.0;
constexpr double kTempMax = 800.0;

// Residence times used to size the lumped nodes (s).
constexpr double kHeaterResidence = 4.0;
constexpr double kHxPrimaryResidence = 4.0;
constexpr double kHxSecondaryResidence = 5.0;
constexpr double kHotLegLag = 6.0;
constexpr double kColdLegLag = 6.0;
constexpr double kPumpLag = 4.0;
constexpr double kFlowTimeConstant = 2.0;
constexpr double kSecondaryPumpCapacity = 500.0;  // kg/s

void unpack_dynamic(const DynVector& z, PlantState& s) {
    s.t_p_3 = z(0);
    s.t_p_in = z(1);
    s.t_p_out = z(2);
    s.t_p_1 = z(3);
    s.t_s_out = z(4);
    s.m_dot_s = z(5);
    s.m_dot_p = z(6);
}

double mean_temperature_difference(const LoopParams& p, double t_in, double t_out,
                                   double t_s_out) {
    return 0.5 * (t_in + t_out) - 0.5 * (p.t_s_in + t_s_out);
}

}  // namespace

void validate(const LoopParams& p) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string("loop parameter must be positive: ") + name);
    };
    positive(p.cp_primary, "cp_primary");
    positive(p.cp_secondary, "cp_secondary");
    for (double m : p.thermal_masses) positive(m, "thermal_masses");
    positive(p.hx_ua, "hx_ua");
    for (double d : p.transport_delays) positive(d, "transport_delays");
    positive(p.pump_head, "pump_head");
    positive(p.friction_coeff, "friction_coeff");
    positive(p.flow_inertia, "flow_inertia");
    positive(p.p_p_out, "p_p_out");
    positive(p.t_s_in, "t_s_in");
    positive(p.m_dot_s_max, "m_dot_s_max");
    positive(p.u_s_max, "u_s_max");
    positive(p.pump_lag, "pump_lag");
}

LoopParams calibrate_steady_state() {
    using N = NominalPoint;
    LoopParams p;
    const double q = N::q_dot * kMW;
    p.cp_primary = q / (N::m_dot_p * (N::t_p_in - N::t_p_out));
    p.cp_secondary = q / (N::m_dot_s * (N::t_s_out - N::t_s_in));
    p.t_s_in = N::t_s_in;
    p.hx_ua = q / (0.5 * (N::t_p_in + N::t_p_out) - 0.5 * (N::t_s_in + N::t_s_out));

    const double wcp_p = N::m_dot_p * p.cp_primary;
    const double wcp_s = N::m_dot_s * p.cp_secondary;
    p.thermal_masses = {kHeaterResidence * wcp_p, kHxPrimaryResidence * wcp_p,
                        kHxSecondaryResidence * wcp_s};
    p.transport_delays = {kHotLegLag, kColdLegLag};

    p.p_p_out = N::p_p_out;
    p.pump_head = N::p_p_1 - N::p_p_out;
    p.friction_coeff = p.pump_head / (N::m_dot_p * N::m_dot_p);
    p.flow_inertia = 2.0 * p.friction_coeff * N::m_dot_p * kFlowTimeConstant;

    p.m_dot_s_max = kSecondaryPumpCapacity;
    p.u_s_max = 1.0;
    p.pump_lag = kPumpLag;
    validate(p);

    // Fixed-point check: the nominal state must be an equilibrium of the
    // calibrated dynamics under the nominal command.
    const PlantState s0 = nominal_state();
    const ActuatorCommand u0 = nominal_command(p);
    const DynVector z0 = pack_dynamic(s0);
    PlantState s = s0;
    for (int k = 0; k < 1000; ++k) s = step_plant(p, s, u0, 0.2);
    const DynVector drift = pack_dynamic(s) - z0;
    for (int i = 0; i < drift.size(); ++i) {
        if (std::abs(drift(i)) > 1e-6 * std::max(1.0, std::abs(z0(i))))
            throw CalibrationError("steady-state calibration did not converge");
    }
    return p;
}

PlantState nominal_state() {
    using N = NominalPoint;
    PlantState s;
    s.t_p_in = N::t_p_in;
    s.t_p_out = N::t_p_out;
    s.t_p_1 = N::t_p_1;
    s.t_p_3 = N::t_p_3;
    s.t_s_out = N::t_s_out;
    s.p_p_out = N::p_p_out;
    s.p_p_1 = N::p_p_1;
    s.m_dot_p = N::m_dot_p;
    s.m_dot_s = N::m_dot_s;
    s.q_dot = N::q_dot;
    return s;
}

ActuatorCommand nominal_command(const LoopParams& p) {
    return {NominalPoint::m_dot_s / p.m_dot_s_max, NominalPoint::q_dot};
}

DynVector pack_dynamic(const PlantState& s) {
    DynVector z;
    z << s.t_p_3, s.t_p_in, s.t_p_out, s.t_p_1, s.t_s_out, s.m_dot_s, s.m_dot_p;
    return z;
}

DynVector plant_derivative(const LoopParams& p, const DynVector& z, const ActuatorCommand& cmd) {
    const double t3 = z(0), t_in = z(1), t_out = z(2), t1 = z(3), ts = z(4);
    const double ms = z(5), mp = z(6);
    const double wcp = mp * p.cp_primary;
    const double q_hx = p.hx_ua * mean_temperature_difference(p, t_in, t_out, ts);

    DynVector dz;
    dz(0) = (wcp * (t1 - t3) + cmd.q_dot * kMW) / p.thermal_masses[0];
    dz(1) = (t3 - t_in) / p.transport_delays[0];
    dz(2) = (wcp * (t_in - t_out) - q_hx) / p.thermal_masses[1];
    dz(3) = (t_out - t1) / p.transport_delays[1];
    dz(4) = (ms * p.cp_secondary * (p.t_s_in - ts) + q_hx) / p.thermal_masses[2];
    dz(5) = (p.m_dot_s_max * cmd.u_s - ms) / p.pump_lag;
    dz(6) = (p.pump_head - p.friction_coeff * mp * mp) / p.flow_inertia;
    return dz;
}

PlantState step_plant(const LoopParams& p, const PlantState& state, const ActuatorCommand& cmd,
                      double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_plant: dt must be positive");
    if (cmd.q_dot < 0.0) throw std::invalid_argument("step_plant: negative heater power");
    if (cmd.u_s < 0.0 || cmd.u_s > p.u_s_max)
        throw std::invalid_argument("step_plant: pump drive outside actuator range");

    const double h = dt / kSubsteps;
    DynVector z = pack_dynamic(state);
    for (int i = 0; i < kSubsteps; ++i) {
        const DynVector k1 = plant_derivative(p, z, cmd);
        const DynVector k2 = plant_derivative(p, z + 0.5 * h * k1, cmd);
        const DynVector k3 = plant_derivative(p, z + 0.5 * h * k2, cmd);
        const DynVector k4 = plant_derivative(p, z + h * k3, cmd);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    PlantState next = state;
    unpack_dynamic(z, next);
    next.p_p_out = p.p_p_out;
    next.p_p_1 = p.p_p_out + p.friction_coeff * next.m_dot_p * next.m_dot_p;
    next.q_dot = cmd.q_dot;

    for (double t : {next.t_p_in, next.t_p_out, next.t_p_1, next.t_p_3, next.t_s_out}) {
        if (!(t >= kTempMin && t <= kTempMax))
            throw OutOfRangeError("plant temperature left the physical range [400, 800] C");
    }
    if (!(next.m_dot_p > 0.0) || !(next.m_dot_s > 0.0))
        throw OutOfRangeError("plant mass flow became non-positive");
    return next;
}

Eigen::Vector4d measure_outputs(const PlantState& s) {
    return {s.t_p_out, s.t_s_out, s.p_p_out, s.p_p_1};
}

double hx_duty(const LoopParams& p, const PlantState& s) {
    return p.hx_ua * mean_temperature_difference(p, s.t_p_in, s.t_p_out, s.t_s_out);
}

}  // namespace saltgov
