#include "saltgov/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace saltgov {

// ---- profiles --------------------------------------------------------------

double Profile::at(double t) const {
    if (segments.empty()) throw std::invalid_argument("profile has no segments");
    if (t <= segments.front().t_start) return segments.front().start_value;
    for (const Segment& s : segments) {
        if (t <= s.t_end) {
            const double frac = (t - s.t_start) / (s.t_end - s.t_start);
            return s.start_value + (s.end_value - s.start_value) * frac;
        }
    }
    return segments.back().end_value;
}

Profile profile_from_knots(const std::vector<std::pair<double, double>>& knots) {
    if (knots.size() < 2) throw std::invalid_argument("profile needs at least two knots");
    Profile p;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
        p.segments.push_back({knots[i].first, knots[i + 1].first, knots[i].second, knots[i + 1].second});
    validate(p);
    return p;
}

void validate(const Profile& p) {
    if (p.segments.empty()) throw std::invalid_argument("profile has no segments");
    for (std::size_t i = 0; i < p.segments.size(); ++i) {
        const Segment& s = p.segments[i];
        if (!(s.t_end > s.t_start)) throw std::invalid_argument("profile segment has non-positive length");
        if (i > 0) {
            const Segment& prev = p.segments[i - 1];
            if (prev.t_end != s.t_start)
                throw std::invalid_argument("profile segments must be contiguous");
            if (std::abs(prev.end_value - s.start_value) > 1e-12)
                throw std::invalid_argument("profile is discontinuous at a breakpoint");
        }
    }
}

ReferenceTrajectory build_load_follow() {
    ReferenceTrajectory r;
    r.m_dot_s_ref = profile_from_knots(
        {{0, 380}, {100, 380}, {300, 350}, {450, 350}, {600, 380}, {3600, 380}});
    r.t_p_in_ref = profile_from_knots({{0, 585},
                                       {700, 585},
                                       {1000, 605},
                                       {1400, 605},
                                       {1700, 585},
                                       {1900, 585},
                                       {2200, 563},
                                       {3000, 563},
                                       {3300, 585},
                                       {3600, 585}});
    return r;
}

ReferenceTrajectory build_alternating_ramps() {
    ReferenceTrajectory r;
    r.m_dot_s_ref = profile_from_knots({{0, 380},
                                        {250, 380},
                                        {500, 387.5},
                                        {800, 387.5},
                                        {1000, 372.5},
                                        {1400, 372.5},
                                        {1700, 385},
                                        {2000, 385},
                                        {2300, 375},
                                        {2800, 375},
                                        {3100, 382.5},
                                        {3600, 382.5}});
    r.t_p_in_ref = profile_from_knots({{0, 585},
                                       {150, 585},
                                       {450, 598},
                                       {700, 598},
                                       {900, 575},
                                       {1300, 575},
                                       {1500, 595},
                                       {1900, 595},
                                       {2200, 568},
                                       {2700, 568},
                                       {2900, 590},
                                       {3600, 590}});
    return r;
}

ReferenceTrajectory build_steady_hold() {
    ReferenceTrajectory r;
    r.m_dot_s_ref = profile_from_knots({{0, NominalPoint::m_dot_s}, {3600, NominalPoint::m_dot_s}});
    r.t_p_in_ref = profile_from_knots({{0, NominalPoint::t_p_in}, {3600, NominalPoint::t_p_in}});
    return r;
}

// ---- constraint schedules -----------------------------------------------

BoundDirection parse_direction(const std::string& text) {
    if (text == "constant") return BoundDirection::constant;
    if (text == "eq7-increasing") return BoundDirection::increasing;
    if (text == "eq7-decreasing") return BoundDirection::decreasing;
    throw std::invalid_argument("unknown constraint schedule: " + text);
}

std::string to_string(BoundDirection d) {
    switch (d) {
        case BoundDirection::constant: return "constant";
        case BoundDirection::increasing: return "eq7-increasing";
        case BoundDirection::decreasing: return "eq7-decreasing";
    }
    return "unknown";
}

double bound_at(const BoundSchedule& s, double t) {
    if (s.direction == BoundDirection::constant || t < s.t_start) return s.base;
    const double sign = s.direction == BoundDirection::increasing ? 1.0 : -1.0;
    const double te = std::min(t, s.t_end);
    return s.base + sign * (s.rate_per_ks * (te - s.t_start) / 1000.0);
}

OutputConstraintSet ConstraintSchedule::at(double t, int outputs) const {
    OutputConstraintSet cs;
    const auto n = static_cast<Eigen::Index>(rows.size());
    cs.coeffs = Eigen::MatrixXd::Zero(n, outputs);
    cs.bounds.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const ScheduledConstraint& r = rows[static_cast<std::size_t>(i)];
        const double sign = r.upper ? 1.0 : -1.0;
        cs.coeffs(i, r.output) = sign;
        cs.bounds(i) = sign * bound_at(r.bound, t);
        cs.labels.push_back(r.label);
    }
    return cs;
}

ConstraintSchedule loop_constraints(BoundDirection direction) {
    ConstraintSchedule s;
    s.rows.push_back({"T_p_out_max", 0, true, {kTpOutMax, BoundDirection::constant}});
    s.rows.push_back({"T_s_out_min", 1, false, {kTsOutMin, direction}});
    return s;
}

// ---- signals ---------------------------------------------------------------

const std::vector<std::string>& trace_state_labels() {
    static const std::vector<std::string> labels = {
        "T_p_in", "T_p_out", "T_p_1",  "T_p_3",       "T_s_out",     "m_dot_s",
        "m_dot_p", "P_p_out", "P_p_1", "I_pi_mdot_s", "I_pi_T_p_in"};
    return labels;
}

const std::vector<std::string>& default_model_states() {
    static const std::vector<std::string> labels = {"T_p_3",   "T_p_in",      "T_p_out",    "T_p_1",
                                                    "T_s_out", "I_pi_mdot_s", "I_pi_T_p_in"};
    return labels;
}

const std::vector<std::string>& output_labels() {
    static const std::vector<std::string> labels = {"T_p_out", "T_s_out", "P_p_out", "P_p_1"};
    return labels;
}

const std::vector<std::string>& input_labels() {
    static const std::vector<std::string> labels = {"m_dot_s_ref", "T_p_in_ref"};
    return labels;
}

namespace {

double state_signal(const PlantState& s, const std::string& label) {
    if (label == "T_p_in") return s.t_p_in;
    if (label == "T_p_out") return s.t_p_out;
    if (label == "T_p_1") return s.t_p_1;
    if (label == "T_p_3") return s.t_p_3;
    if (label == "T_s_out") return s.t_s_out;
    if (label == "m_dot_s") return s.m_dot_s;
    if (label == "m_dot_p") return s.m_dot_p;
    if (label == "P_p_out") return s.p_p_out;
    if (label == "P_p_1") return s.p_p_1;
    if (label == "I_pi_mdot_s") return s.pi_integrators[0];
    if (label == "I_pi_T_p_in") return s.pi_integrators[1];
    throw std::invalid_argument("unknown signal label: " + label);
}

double nominal_signal(const std::string& label) {
    using N = NominalPoint;
    if (label == "T_p_in") return N::t_p_in;
    if (label == "T_p_out") return N::t_p_out;
    if (label == "T_p_1") return N::t_p_1;
    if (label == "T_p_3") return N::t_p_3;
    if (label == "T_s_out") return N::t_s_out;
    if (label == "m_dot_s") return N::m_dot_s;
    if (label == "m_dot_p") return N::m_dot_p;
    if (label == "P_p_out") return N::p_p_out;
    if (label == "P_p_1") return N::p_p_1;
    if (label == "I_pi_mdot_s" || label == "I_pi_T_p_in") return 0.0;
    throw std::invalid_argument("unknown signal label: " + label);
}

Eigen::VectorXd state_vector(const PlantState& s, const std::vector<std::string>& labels) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) x(static_cast<Eigen::Index>(i)) = state_signal(s, labels[i]);
    return x;
}

}  // namespace

double signal_value(const TraceRow& row, const std::string& label) { return state_signal(row.state, label); }

ReferencePoint nominal_reference(const std::vector<std::string>& state_labels) {
    ReferencePoint ref;
    ref.states.resize(static_cast<Eigen::Index>(state_labels.size()));
    for (std::size_t i = 0; i < state_labels.size(); ++i)
        ref.states(static_cast<Eigen::Index>(i)) = nominal_signal(state_labels[i]);
    ref.inputs = Eigen::Vector2d(NominalPoint::m_dot_s, NominalPoint::t_p_in);
    ref.outputs.resize(4);
    ref.outputs << NominalPoint::t_p_out, NominalPoint::t_s_out, NominalPoint::p_p_out, NominalPoint::p_p_1;
    return ref;
}

SnapshotLog snapshot_log(const std::vector<TraceRow>& trace, const std::vector<std::string>& labels) {
    if (trace.size() < 2) throw std::invalid_argument("snapshot_log: trace needs at least two rows");
    const auto cols = static_cast<Eigen::Index>(trace.size());
    SnapshotLog log;
    log.state_names = labels;
    log.input_names = input_labels();
    log.output_names = output_labels();
    log.states.resize(static_cast<Eigen::Index>(labels.size()), cols);
    log.inputs.resize(2, cols - 1);
    log.outputs.resize(4, cols);
    for (Eigen::Index k = 0; k < cols; ++k) {
        const TraceRow& row = trace[static_cast<std::size_t>(k)];
        log.times.push_back(row.t);
        log.states.col(k) = state_vector(row.state, labels);
        log.outputs.col(k) = measure_outputs(row.state);
        if (k + 1 < cols) log.inputs.col(k) = row.v;
    }
    log.reference_point = nominal_reference(labels);
    return log;
}

std::pair<PiGains, PiGains> resolve_gains(const ScenarioConfig& config) {
    if (config.pi_m_dot_s && config.pi_t_p_in) return {*config.pi_m_dot_s, *config.pi_t_p_in};
    const TunedGains tuned = tune_open_loop(config.plant, config.dt);
    return {config.pi_m_dot_s.value_or(tuned.m_dot_s), config.pi_t_p_in.value_or(tuned.t_p_in)};
}

namespace {

struct LoopSetup {
    PiGains gm;
    PiGains gt;
};

void check_config(const ScenarioConfig& c) {
    validate(c.plant);
    validate(c.trajectory.m_dot_s_ref);
    validate(c.trajectory.t_p_in_ref);
    if (!(c.dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(c.duration > 0.0)) throw std::invalid_argument("duration must be positive");
    if ((c.span.array() <= 0.0).any()) throw std::invalid_argument("spans must be positive");
    for (const auto& s : c.model_states) nominal_signal(s);
}

std::vector<TraceRow> run_bypass(const ScenarioConfig& c, const ReferenceTrajectory& traj,
                                 const LoopSetup& setup) {
    const long n = std::lround(c.duration / c.dt);
    LoopControllers ctrls = make_controllers(c.plant, setup.gm, setup.gt, c.limits);
    PlantState s = nominal_state();
    std::vector<TraceRow> trace;
    trace.reserve(static_cast<std::size_t>(n + 1));
    for (long k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * c.dt;
        const Eigen::Vector2d v = traj.at(t);
        s.pi_integrators = {ctrls.m_dot_s.integrator, ctrls.t_p_in.integrator};
        auto [next, cmd] = control_step(ctrls, s, v(0), v(1), c.dt);
        trace.push_back({t, v, s, cmd});
        if (k == n) break;
        try {
            s = step_plant(c.plant, s, cmd, c.dt);
        } catch (const std::exception& e) {
            throw ScenarioError(std::string(e.what()) + " (step " + std::to_string(k) + ")", k);
        }
        ctrls = next;
    }
    return trace;
}

}  // namespace

LtiModel identify_loop_model(const ScenarioConfig& config) {
    check_config(config);
    const auto [gm, gt] = resolve_gains(config);
    const auto trace = run_bypass(config, config.identification_trajectory, {gm, gt});
    RankTruncation rank;
    rank.rank = config.rank;
    return identify_dmdc(snapshot_log(trace, config.model_states), rank);
}

RunArtifacts run_experiment(const ScenarioConfig& config) {
    check_config(config);
    RunArtifacts art;
    art.config = config;
    std::tie(art.gains_m_dot_s, art.gains_t_p_in) = resolve_gains(config);
    const LoopSetup setup{art.gains_m_dot_s, art.gains_t_p_in};

    const bool need_set = config.mode != GovernorMode::bypass || !config.slice_times.empty();
    if (!need_set) {
        art.trace = run_bypass(config, config.trajectory, setup);
        return art;
    }

    if (config.model) {
        art.model = *config.model;
    } else {
        ScenarioConfig id = config;
        id.pi_m_dot_s = setup.gm;
        id.pi_t_p_in = setup.gt;
        art.model = identify_loop_model(id);
    }
    const LtiModel& model = *art.model;
    if (model.input_names != input_labels() || model.output_names != output_labels())
        throw std::invalid_argument("model inputs/outputs do not match the loop signals");
    for (const auto& w : model.warnings) art.warnings.push_back("identification: " + w);

    const ConstraintSchedule schedule = loop_constraints(config.constraints);
    MoasOptions mo;
    mo.horizon = config.horizon;
    mo.epsilon = config.epsilon;
    mo.prune = config.prune;
    AdmissibleSet set = build_moas(model, schedule.at(0.0), mo);
    for (const auto& w : set.warnings) art.warnings.push_back("moas: " + w);

    const Eigen::VectorXd v_ref = model.reference_point.inputs;
    GovernorState gov = make_governor(config.mode, config.span, config.q_weight);
    gov.v_prev = config.trajectory.at(0.0) - v_ref;

    std::vector<long> slice_steps;
    for (double ts : config.slice_times) slice_steps.push_back(std::lround(ts / config.dt));

    const long n = std::lround(config.duration / config.dt);
    LoopControllers ctrls = make_controllers(config.plant, setup.gm, setup.gt, config.limits);
    PlantState s = nominal_state();
    art.trace.reserve(static_cast<std::size_t>(n + 1));
    art.governor_log.reserve(static_cast<std::size_t>(n + 1));
    for (long k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * config.dt;
        try {
            s.pi_integrators = {ctrls.m_dot_s.integrator, ctrls.t_p_in.integrator};
            const Eigen::VectorXd x = state_vector(s, model.state_names) - model.reference_point.states;
            update_bounds(set, schedule.at(t));

            const Eigen::Vector2d r = config.trajectory.at(t);
            auto [next_gov, step] = govern(gov, &set, x, r - v_ref);
            gov = next_gov;
            step.r += v_ref;
            step.v += v_ref;
            const Eigen::Vector2d v = step.v;
            art.governor_log.push_back({t, step});

            for (std::size_t i = 0; i < slice_steps.size(); ++i) {
                if (slice_steps[i] != k) continue;
                SliceRecord rec{config.slice_times[i], {}, false};
                try {
                    rec.polygon = export_slice(set, x);
                } catch (const EmptySliceError&) {
                    rec.empty = true;
                }
                art.slices.push_back(rec);
            }

            auto [next, cmd] = control_step(ctrls, s, v(0), v(1), config.dt);
            art.trace.push_back({t, v, s, cmd});
            if (k == n) break;
            s = step_plant(config.plant, s, cmd, config.dt);
            ctrls = next;
        } catch (const ScenarioError&) {
            throw;
        } catch (const std::exception& e) {
            throw ScenarioError(std::string(e.what()) + " (step " + std::to_string(k) + ")", k);
        }
    }
    return art;
}

ViolationSummary summarize(const RunArtifacts& run) {
    const ConstraintSchedule schedule = loop_constraints(run.config.constraints);
    ViolationSummary v;
    v.t_p_out_max_excess = -std::numeric_limits<double>::infinity();
    v.t_s_out_max_deficit = -std::numeric_limits<double>::infinity();
    for (const TraceRow& row : run.trace) {
        const double ub = bound_at(schedule.rows[0].bound, row.t);
        const double lb = bound_at(schedule.rows[1].bound, row.t);
        v.t_p_out_max_excess = std::max(v.t_p_out_max_excess, row.state.t_p_out - ub);
        v.t_s_out_max_deficit = std::max(v.t_s_out_max_deficit, lb - row.state.t_s_out);
    }
    for (const auto& g : run.governor_log)
        if (g.step.flag == StepFlag::fallback) ++v.fallback_steps;
    return v;
}

}  // namespace saltgov
