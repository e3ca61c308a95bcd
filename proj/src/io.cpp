#include "saltgov/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "saltgov/hash.hpp"

namespace saltgov {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex_digest(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, std::size_t line, const std::string& column) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (cell.empty() || end != begin + cell.size())
        throw SchemaError("line " + std::to_string(line) + ", column " + column + ": not a number: '" +
                          cell + "'");
    return v;
}

bool getline_trimmed(std::istream& is, std::string& line) {
    if (!std::getline(is, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

// Reads a CSV whose header must contain `required`; returns rows in the
// order of `required`.
std::vector<std::vector<double>> read_columns(std::istream& is, const std::vector<std::string>& required) {
    std::string line;
    if (!getline_trimmed(is, line)) throw SchemaError("empty CSV");
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
    std::vector<std::string> missing;
    std::vector<std::size_t> cols;
    for (const auto& name : required) {
        auto it = index.find(name);
        if (it == index.end()) {
            missing.push_back(name);
        } else {
            cols.push_back(it->second);
        }
    }
    if (!missing.empty()) {
        std::string msg = "CSV is missing columns:";
        for (const auto& m : missing) msg += " " + m;
        throw SchemaError(msg);
    }
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (getline_trimmed(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw SchemaError("line " + std::to_string(lineno) + ": expected " +
                              std::to_string(header.size()) + " cells");
        std::vector<double> row;
        row.reserve(cols.size());
        for (std::size_t i = 0; i < cols.size(); ++i)
            row.push_back(parse_cell(cells[cols[i]], lineno, required[i]));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_row(std::ostream& os, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << ',';
        os << format_double(values[i]);
    }
    os << '\n';
}

void write_header(std::ostream& os, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) os << ',';
        os << names[i];
    }
    os << '\n';
}

}  // namespace

// ---- trace CSV --------------------------------------------------------------

const std::vector<std::string>& trace_header() {
    static const std::vector<std::string> h = {"t",       "m_dot_s_ref", "T_p_in_ref", "m_dot_s", "T_p_in",
                                               "T_p_out", "T_s_out",     "T_p_1",      "T_p_3",   "P_p_out",
                                               "P_p_1",   "Q_dot",       "u_s",        "I_pi_mdot_s"};
    return h;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
    write_header(os, trace_header());
    for (const TraceRow& r : trace) {
        const PlantState& s = r.state;
        write_row(os, {r.t, r.v(0), r.v(1), s.m_dot_s, s.t_p_in, s.t_p_out, s.t_s_out, s.t_p_1, s.t_p_3,
                       s.p_p_out, s.p_p_1, r.command.q_dot, r.command.u_s, s.pi_integrators[0]});
    }
}

TraceReadResult read_trace_csv(std::istream& is, const ActuatorLimits& limits) {
    const auto rows = read_columns(is, trace_header());
    TraceReadResult out;
    out.rows.reserve(rows.size());
    for (const auto& c : rows) {
        TraceRow r;
        r.t = c[0];
        r.v = Eigen::Vector2d(c[1], c[2]);
        PlantState& s = r.state;
        s.m_dot_s = c[3];
        s.t_p_in = c[4];
        s.t_p_out = c[5];
        s.t_s_out = c[6];
        s.t_p_1 = c[7];
        s.t_p_3 = c[8];
        s.p_p_out = c[9];
        s.p_p_1 = c[10];
        r.command.q_dot = c[11];
        r.command.u_s = c[12];
        s.pi_integrators[0] = c[13];
        out.rows.push_back(r);
    }
    if (out.rows.size() < 2) return out;

    const double dt = out.rows[1].t - out.rows[0].t;
    std::size_t saturated = 0;
    double integ = 0.0;
    for (std::size_t k = 0; k < out.rows.size(); ++k) {
        TraceRow& r = out.rows[k];
        r.state.q_dot = k ? out.rows[k - 1].command.q_dot : r.command.q_dot;
        r.state.pi_integrators[1] = integ;
        integ = integ + (r.v(1) - r.state.t_p_in) * dt;
        if (r.command.q_dot <= limits.q_dot_min || r.command.q_dot >= limits.q_dot_max) ++saturated;
    }
    if (saturated > 0)
        out.warnings.push_back("Q_dot is on an actuator limit in " + std::to_string(saturated) +
                               " rows; the rebuilt I_pi_T_p_in may differ from the controller");
    return out;
}

// ---- governor and slice CSV -------------------------------------------------

void write_governor_csv(std::ostream& os, const std::vector<GovernorRecord>& log) {
    os << "t,r_m_dot_s,r_T_p_in,v_m_dot_s,v_T_p_in,kappa,margin,kkt_residual,flag,active_set\n";
    for (const GovernorRecord& g : log) {
        const GovernorStep& s = g.step;
        os << format_double(g.t);
        for (Eigen::Index i = 0; i < s.r.size(); ++i) os << ',' << format_double(s.r(i));
        for (Eigen::Index i = 0; i < s.v.size(); ++i) os << ',' << format_double(s.v(i));
        os << ',' << format_double(s.kappa) << ',' << format_double(s.margin) << ','
           << format_double(s.kkt_residual) << ',' << static_cast<int>(s.flag) << ',';
        for (std::size_t i = 0; i < s.active_set.size(); ++i) {
            if (i) os << ';';
            os << s.active_set[i];
        }
        os << '\n';
    }
}

void write_slice_csv(std::ostream& os, const Polygon& polygon) {
    os << "dm_dot_s_ref,dT_p_in_ref\n";
    for (const auto& p : polygon.vertices) write_row(os, {p(0), p(1)});
}

Polygon read_slice_csv(std::istream& is) {
    Polygon poly;
    for (const auto& r : read_columns(is, {"dm_dot_s_ref", "dT_p_in_ref"}))
        poly.vertices.emplace_back(r[0], r[1]);
    return poly;
}

// ---- JSON: models -----------------------------------------------------------

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols_if_empty = 0) {
    if (!j.is_array()) throw std::invalid_argument("expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : cols_if_empty;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw std::invalid_argument("ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

}  // namespace

json model_to_json(const LtiModel& m) {
    json j;
    j["dt"] = m.dt;
    j["state_names"] = m.state_names;
    j["input_names"] = m.input_names;
    j["output_names"] = m.output_names;
    j["a"] = matrix_to_json(m.a);
    j["b"] = matrix_to_json(m.b);
    j["c"] = matrix_to_json(m.c);
    j["d"] = matrix_to_json(m.d);
    j["reference_point"] = {{"states", vector_to_json(m.reference_point.states)},
                            {"inputs", vector_to_json(m.reference_point.inputs)},
                            {"outputs", vector_to_json(m.reference_point.outputs)}};
    j["singular_values"] = m.singular_values;
    j["warnings"] = m.warnings;
    return j;
}

LtiModel model_from_json(const json& j) {
    try {
        LtiModel m;
        m.dt = j.at("dt").get<double>();
        m.state_names = j.at("state_names").get<std::vector<std::string>>();
        m.input_names = j.at("input_names").get<std::vector<std::string>>();
        m.output_names = j.at("output_names").get<std::vector<std::string>>();
        const auto n = static_cast<Eigen::Index>(m.state_names.size());
        const auto mi = static_cast<Eigen::Index>(m.input_names.size());
        const auto p = static_cast<Eigen::Index>(m.output_names.size());
        m.a = matrix_from_json(j.at("a"), n);
        m.b = matrix_from_json(j.at("b"), mi);
        m.c = matrix_from_json(j.at("c"), n);
        m.d = matrix_from_json(j.at("d"), mi);
        const json& ref = j.at("reference_point");
        m.reference_point.states = vector_from_json(ref.at("states"));
        m.reference_point.inputs = vector_from_json(ref.at("inputs"));
        m.reference_point.outputs = vector_from_json(ref.at("outputs"));
        if (j.contains("singular_values")) m.singular_values = j["singular_values"].get<std::vector<double>>();
        if (j.contains("warnings")) m.warnings = j["warnings"].get<std::vector<std::string>>();
        if (m.a.rows() != n || m.a.cols() != n || m.b.rows() != n || m.b.cols() != mi || m.c.rows() != p ||
            m.c.cols() != n || m.d.rows() != p || m.d.cols() != mi ||
            m.reference_point.states.size() != n || m.reference_point.inputs.size() != mi ||
            m.reference_point.outputs.size() != p)
            throw std::invalid_argument("matrix shapes do not match the signal names");
        if (!(m.dt > 0.0)) throw std::invalid_argument("dt must be positive");
        return m;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("model JSON: ") + e.what());
    }
}

// ---- JSON: configs ----------------------------------------------------------

namespace {

// Walks one JSON object, remembering which keys were consumed so that
// leftovers can be reported by name.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(where("") + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& at(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <class T>
    void read(const std::string& key, T& target) {
        if (!has(key)) return;
        try {
            target = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + ": wrong type");
        }
    }

    std::string where(const std::string& key) const {
        if (key.empty()) return path_.empty() ? "config" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown config key: " + where(it.key()));
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json profile_to_json(const Profile& p) {
    json knots = json::array();
    for (const Segment& s : p.segments) knots.push_back({s.t_start, s.start_value});
    knots.push_back({p.segments.back().t_end, p.segments.back().end_value});
    return knots;
}

Profile profile_from_json(const json& j, const std::string& where) {
    std::vector<std::pair<double, double>> knots;
    try {
        for (const auto& k : j) {
            if (!k.is_array() || k.size() != 2) throw ConfigError(where + ": knots must be [t, value] pairs");
            knots.emplace_back(k[0].get<double>(), k[1].get<double>());
        }
        return profile_from_knots(knots);
    } catch (const json::exception&) {
        throw ConfigError(where + ": wrong type");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

json trajectory_to_json(const ReferenceTrajectory& t) {
    return {{"m_dot_s_ref", profile_to_json(t.m_dot_s_ref)}, {"t_p_in_ref", profile_to_json(t.t_p_in_ref)}};
}

ReferenceTrajectory trajectory_from_json(const json& j, const std::string& where) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "load_follow") return build_load_follow();
        if (name == "alternating_ramps") return build_alternating_ramps();
        if (name == "steady_hold") return build_steady_hold();
        throw ConfigError(where + ": unknown trajectory preset '" + name + "'");
    }
    ObjectReader r(j, where);
    if (!r.has("m_dot_s_ref") || !r.has("t_p_in_ref"))
        throw ConfigError(where + ": needs m_dot_s_ref and t_p_in_ref");
    ReferenceTrajectory t;
    t.m_dot_s_ref = profile_from_json(r.at("m_dot_s_ref"), r.where("m_dot_s_ref"));
    t.t_p_in_ref = profile_from_json(r.at("t_p_in_ref"), r.where("t_p_in_ref"));
    r.finish();
    return t;
}

json plant_to_json(const LoopParams& p) {
    return {{"cp_primary", p.cp_primary},
            {"cp_secondary", p.cp_secondary},
            {"thermal_masses", p.thermal_masses},
            {"hx_ua", p.hx_ua},
            {"transport_delays", p.transport_delays},
            {"pump_head", p.pump_head},
            {"friction_coeff", p.friction_coeff},
            {"flow_inertia", p.flow_inertia},
            {"p_p_out", p.p_p_out},
            {"t_s_in", p.t_s_in},
            {"m_dot_s_max", p.m_dot_s_max},
            {"u_s_max", p.u_s_max},
            {"pump_lag", p.pump_lag}};
}

void plant_from_json(const json& j, LoopParams& p) {
    ObjectReader r(j, "plant");
    r.read("cp_primary", p.cp_primary);
    r.read("cp_secondary", p.cp_secondary);
    r.read("thermal_masses", p.thermal_masses);
    r.read("hx_ua", p.hx_ua);
    r.read("transport_delays", p.transport_delays);
    r.read("pump_head", p.pump_head);
    r.read("friction_coeff", p.friction_coeff);
    r.read("flow_inertia", p.flow_inertia);
    r.read("p_p_out", p.p_p_out);
    r.read("t_s_in", p.t_s_in);
    r.read("m_dot_s_max", p.m_dot_s_max);
    r.read("u_s_max", p.u_s_max);
    r.read("pump_lag", p.pump_lag);
    r.finish();
    try {
        validate(p);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("plant: ") + e.what());
    }
}

PiGains gains_from_json(const json& j, const std::string& where) {
    ObjectReader r(j, where);
    PiGains g;
    if (!r.has("kp") || !r.has("ki")) throw ConfigError(where + ": needs kp and ki");
    r.read("kp", g.kp);
    r.read("ki", g.ki);
    r.finish();
    return g;
}

}  // namespace

json config_to_json(const ScenarioConfig& c) {
    json j;
    j["plant"] = plant_to_json(c.plant);
    json gains = json::object();
    if (c.pi_m_dot_s) gains["m_dot_s"] = {{"kp", c.pi_m_dot_s->kp}, {"ki", c.pi_m_dot_s->ki}};
    if (c.pi_t_p_in) gains["t_p_in"] = {{"kp", c.pi_t_p_in->kp}, {"ki", c.pi_t_p_in->ki}};
    j["gains"] = gains;
    j["limits"] = {{"u_s_min", c.limits.u_s_min},
                   {"u_s_max", c.limits.u_s_max},
                   {"q_dot_min", c.limits.q_dot_min},
                   {"q_dot_max", c.limits.q_dot_max}};
    j["trajectory"] = trajectory_to_json(c.trajectory);
    j["identification_trajectory"] = trajectory_to_json(c.identification_trajectory);
    j["duration"] = c.duration;
    j["dt"] = c.dt;
    j["mode"] = to_string(c.mode);
    j["constraints"] = to_string(c.constraints);
    j["span"] = {c.span(0), c.span(1)};
    j["q_weight"] = matrix_to_json(c.q_weight);
    j["horizon"] = c.horizon;
    j["epsilon"] = c.epsilon;
    j["prune"] = c.prune;
    j["model_states"] = c.model_states;
    j["rank"] = c.rank ? json(*c.rank) : json(nullptr);
    j["slice_times"] = c.slice_times;
    if (c.model) j["model"] = model_to_json(*c.model);
    return j;
}

ScenarioConfig config_from_json(const json& j, const std::string& base_dir) {
    ScenarioConfig c;
    ObjectReader r(j, "");
    if (r.has("plant")) plant_from_json(r.at("plant"), c.plant);
    if (r.has("gains")) {
        ObjectReader g(r.at("gains"), "gains");
        if (g.has("m_dot_s")) c.pi_m_dot_s = gains_from_json(g.at("m_dot_s"), "gains.m_dot_s");
        if (g.has("t_p_in")) c.pi_t_p_in = gains_from_json(g.at("t_p_in"), "gains.t_p_in");
        g.finish();
    }
    if (r.has("limits")) {
        ObjectReader l(r.at("limits"), "limits");
        l.read("u_s_min", c.limits.u_s_min);
        l.read("u_s_max", c.limits.u_s_max);
        l.read("q_dot_min", c.limits.q_dot_min);
        l.read("q_dot_max", c.limits.q_dot_max);
        l.finish();
        if (!(c.limits.u_s_min < c.limits.u_s_max) || !(c.limits.q_dot_min < c.limits.q_dot_max))
            throw ConfigError("limits: min must be below max");
    }
    if (r.has("trajectory")) c.trajectory = trajectory_from_json(r.at("trajectory"), "trajectory");
    if (r.has("identification_trajectory"))
        c.identification_trajectory =
            trajectory_from_json(r.at("identification_trajectory"), "identification_trajectory");
    r.read("duration", c.duration);
    r.read("dt", c.dt);
    if (r.has("mode")) {
        try {
            c.mode = parse_mode(r.at("mode").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("mode: ") + e.what());
        }
    }
    if (r.has("constraints")) {
        try {
            c.constraints = parse_direction(r.at("constraints").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("constraints: ") + e.what());
        }
    }
    if (r.has("span")) {
        std::vector<double> s;
        r.read("span", s);
        if (s.size() != 2) throw ConfigError("span: expected two values");
        c.span = Eigen::Vector2d(s[0], s[1]);
    }
    if (r.has("q_weight")) {
        Eigen::MatrixXd q;
        try {
            q = matrix_from_json(r.at("q_weight"));
        } catch (const std::exception&) {
            throw ConfigError("q_weight: wrong type");
        }
        if (q.rows() != 2 || q.cols() != 2) throw ConfigError("q_weight: expected a 2x2 matrix");
        c.q_weight = q;
    }
    r.read("horizon", c.horizon);
    r.read("epsilon", c.epsilon);
    r.read("prune", c.prune);
    r.read("model_states", c.model_states);
    if (r.has("rank")) {
        std::size_t rank = 0;
        r.read("rank", rank);
        c.rank = rank;
    }
    r.read("slice_times", c.slice_times);
    if (r.has("model")) {
        const json& m = r.at("model");
        try {
            if (m.is_string()) {
                std::filesystem::path p(m.get<std::string>());
                if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
                c.model = model_from_json(read_json_file(p.string()));
            } else {
                c.model = model_from_json(m);
            }
        } catch (const std::exception& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
    }
    r.finish();

    if (!(c.dt > 0.0)) throw ConfigError("dt: must be positive");
    if (!(c.duration > 0.0)) throw ConfigError("duration: must be positive");
    if (c.horizon < 1) throw ConfigError("horizon: must be at least 1");
    if (!(c.epsilon > 0.0 && c.epsilon <= 0.1)) throw ConfigError("epsilon: must lie in (0, 0.1]");
    if ((c.span.array() <= 0.0).any()) throw ConfigError("span: must be positive");
    for (const auto& s : c.model_states) {
        const auto& labels = trace_state_labels();
        if (std::find(labels.begin(), labels.end(), s) == labels.end())
            throw ConfigError("model_states: unknown signal '" + s + "'");
    }
    return c;
}

json make_manifest(const RunArtifacts& run, const std::vector<ArtifactFile>& files) {
    ScenarioConfig resolved = run.config;
    resolved.pi_m_dot_s = run.gains_m_dot_s;
    resolved.pi_t_p_in = run.gains_t_p_in;
    if (run.model) resolved.model = run.model;

    json j;
    j["format"] = "saltgov-manifest-1";
    j["config"] = config_to_json(resolved);
    json files_j = json::object();
    for (const auto& f : files) {
        Fnv1a h;
        h.bytes(f.contents.data(), f.contents.size());
        files_j[f.name] = hex_digest(h.digest());
    }
    j["artifacts"] = files_j;
    json hashes = json::object();
    if (run.model) hashes["model"] = hex_digest(hash_model(*run.model));
    hashes["constraints_t0"] = hex_digest(hash_constraints(loop_constraints(run.config.constraints).at(0.0)));
    j["hashes"] = hashes;
    j["warnings"] = run.warnings;
    return j;
}

ScenarioConfig load_config(const std::string& path) {
    json j;
    try {
        j = read_json_file(path);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    std::string base = std::filesystem::path(path).parent_path().string();
    if (base.empty()) base = ".";
    if (j.is_object() && j.contains("format") && j.contains("config")) return config_from_json(j["config"], base);
    return config_from_json(j, base);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

json read_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace saltgov
