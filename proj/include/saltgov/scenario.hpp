#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "saltgov/control.hpp"
#include "saltgov/dmdc.hpp"
#include "saltgov/governor.hpp"
#include "saltgov/moas.hpp"
#include "saltgov/plant.hpp"

namespace saltgov {

// ---- reference trajectories ----------------------------------------------

struct Segment {
    double t_start = 0.0;
    double t_end = 0.0;
    double start_value = 0.0;
    double end_value = 0.0;
};

// Piecewise-linear profile; holds the end values outside its span.
struct Profile {
    std::vector<Segment> segments;
    double at(double t) const;
};

Profile profile_from_knots(const std::vector<std::pair<double, double>>& knots);
void validate(const Profile& profile);

struct ReferenceTrajectory {
    Profile m_dot_s_ref;  // kg/s
    Profile t_p_in_ref;   // C
    Eigen::Vector2d at(double t) const { return {m_dot_s_ref.at(t), t_p_in_ref.at(t)}; }
};

ReferenceTrajectory build_load_follow();
// Held-out validation maneuver with alternating ramps.
ReferenceTrajectory build_alternating_ramps();
ReferenceTrajectory build_steady_hold();

// ---- constraint schedules -------------------------------------------------

enum class BoundDirection { constant, increasing, decreasing };

BoundDirection parse_direction(const std::string& text);  // constant | eq7-increasing | eq7-decreasing
std::string to_string(BoundDirection direction);

// base until t_start, linear ramp of rate_per_ks per 1000 s until t_end,
// then held.
struct BoundSchedule {
    double base = 0.0;
    BoundDirection direction = BoundDirection::constant;
    double t_start = 2000.0;
    double t_end = 2800.0;
    double rate_per_ks = 2.5;
};

double bound_at(const BoundSchedule& schedule, double t);

struct ScheduledConstraint {
    std::string label;
    int output = 0;       // index into [T_p_out, T_s_out, P_p_out, P_p_1]
    bool upper = true;    // y <= bound, otherwise y >= bound
    BoundSchedule bound;
};

struct ConstraintSchedule {
    std::vector<ScheduledConstraint> rows;
    OutputConstraintSet at(double t, int outputs = 4) const;
};

constexpr double kTpOutMax = 586.85;
constexpr double kTsOutMin = 512.85;

// T_p_out <= 586.85 and T_s_out >= 512.85 ramped by 2.5 C/ks over [2000, 2800] s in `direction`.
ConstraintSchedule loop_constraints(BoundDirection direction);

// ---- closed-loop runs ------------------------------------------------------

const std::vector<std::string>& trace_state_labels();
const std::vector<std::string>& default_model_states();
const std::vector<std::string>& output_labels();
const std::vector<std::string>& input_labels();

struct ScenarioConfig {
    LoopParams plant = calibrate_steady_state();
    std::optional<PiGains> pi_m_dot_s;
    std::optional<PiGains> pi_t_p_in;
    ActuatorLimits limits;
    ReferenceTrajectory trajectory = build_load_follow();
    ReferenceTrajectory identification_trajectory = build_load_follow();
    double duration = 3600.0;
    double dt = 0.2;
    GovernorMode mode = GovernorMode::bypass;
    BoundDirection constraints = BoundDirection::constant;
    Eigen::Vector2d span{80.0, 10.0};
    Eigen::Matrix2d q_weight = Eigen::Matrix2d::Identity();
    int horizon = 1500;
    double epsilon = 1e-3;
    bool prune = false;
    std::vector<std::string> model_states = default_model_states();
    std::optional<std::size_t> rank;
    std::vector<double> slice_times;
    std::optional<LtiModel> model;
};

struct TraceRow {
    double t = 0.0;
    Eigen::Vector2d v = Eigen::Vector2d::Zero();  // applied setpoints
    PlantState state;                             // integrators at the start of the step
    ActuatorCommand command;                      // held over [t, t + dt]
};

struct GovernorRecord {
    double t = 0.0;
    GovernorStep step;  // r and v in physical units
};

struct SliceRecord {
    double t = 0.0;
    Polygon polygon;  // deviation coordinates
    bool empty = false;
};

struct RunArtifacts {
    ScenarioConfig config;
    PiGains gains_m_dot_s;
    PiGains gains_t_p_in;
    std::vector<TraceRow> trace;
    std::vector<GovernorRecord> governor_log;
    std::vector<SliceRecord> slices;
    std::optional<LtiModel> model;
    std::vector<std::string> warnings;
};

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& what, long step) : std::runtime_error(what), step(step) {}
    long step;
};

// Value of a named signal (see trace_state_labels) at one trace row.
double signal_value(const TraceRow& row, const std::string& label);

// Identification log from a trace: states are `state_labels`, inputs the
// applied setpoints, outputs [T_p_out, T_s_out, P_p_out, P_p_1].
SnapshotLog snapshot_log(const std::vector<TraceRow>& trace,
                         const std::vector<std::string>& state_labels);

ReferencePoint nominal_reference(const std::vector<std::string>& state_labels);

std::pair<PiGains, PiGains> resolve_gains(const ScenarioConfig& config);

// BYPASS run of the identification trajectory followed by DMDc.
LtiModel identify_loop_model(const ScenarioConfig& config);

RunArtifacts run_experiment(const ScenarioConfig& config);

struct ViolationSummary {
    double t_p_out_max_excess = 0.0;  // max(T_p_out - bound), C
    double t_s_out_max_deficit = 0.0; // max(bound - T_s_out), C
    long fallback_steps = 0;
};

ViolationSummary summarize(const RunArtifacts& run);

}  // namespace saltgov
