#include "saltgov/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "saltgov/io.hpp"

namespace saltgov {

namespace fs = std::filesystem;

namespace {

// ---- shared options ---------------------------------------------------------

struct CommonOptions {
    std::string config;
    std::string out = ".";
    std::string mode;
    std::string constraints;
    int horizon = 0;
    double epsilon = 0.0;
    std::size_t rank = 0;
    CLI::Option* horizon_opt = nullptr;
    CLI::Option* epsilon_opt = nullptr;
    CLI::Option* rank_opt = nullptr;
};

void add_set_options(CLI::App* cmd, CommonOptions& o) {
    o.horizon_opt = cmd->add_option("--horizon", o.horizon, "prediction horizon of the admissible set");
    o.epsilon_opt = cmd->add_option("--epsilon", o.epsilon, "steady-state tightening factor");
    o.rank_opt = cmd->add_option("--rank", o.rank, "SVD rank for identification");
}

ScenarioConfig resolve_config(const CommonOptions& o) {
    ScenarioConfig c = o.config.empty() ? ScenarioConfig{} : load_config(o.config);
    if (!o.mode.empty()) c.mode = parse_mode(o.mode);
    if (!o.constraints.empty()) c.constraints = parse_direction(o.constraints);
    if (o.horizon_opt && o.horizon_opt->count()) {
        if (o.horizon < 1) throw ConfigError("--horizon must be at least 1");
        c.horizon = o.horizon;
    }
    if (o.epsilon_opt && o.epsilon_opt->count()) {
        if (!(o.epsilon > 0.0 && o.epsilon <= 0.1)) throw ConfigError("--epsilon must lie in (0, 0.1]");
        c.epsilon = o.epsilon;
    }
    if (o.rank_opt && o.rank_opt->count()) {
        c.rank = o.rank;
        c.model.reset();
    }
    return c;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string slice_name(double t) {
    std::string s = format_double(t);
    std::replace(s.begin(), s.end(), '.', 'p');
    return "slice_t" + s + ".csv";
}

// ---- artifacts ----------------------------------------------------------------

std::vector<ArtifactFile> render_artifacts(const RunArtifacts& run) {
    std::vector<ArtifactFile> files;
    std::ostringstream trace;
    write_trace_csv(trace, run.trace);
    files.push_back({"trace.csv", trace.str()});
    if (!run.governor_log.empty()) {
        std::ostringstream gov;
        write_governor_csv(gov, run.governor_log);
        files.push_back({"governor.csv", gov.str()});
    }
    if (run.model) files.push_back({"model.json", model_to_json(*run.model).dump(2) + "\n"});
    for (const SliceRecord& s : run.slices) {
        if (s.empty) continue;
        std::ostringstream os;
        write_slice_csv(os, s.polygon);
        files.push_back({slice_name(s.t), os.str()});
    }
    return files;
}

void write_artifacts(const RunArtifacts& run, const std::string& dir) {
    fs::create_directories(dir);
    auto files = render_artifacts(run);
    const std::string manifest = make_manifest(run, files).dump(2) + "\n";
    for (const auto& f : files) write_text_file((fs::path(dir) / f.name).string(), f.contents);
    write_text_file((fs::path(dir) / "manifest.json").string(), manifest);
}

void print_summary(std::ostream& out, const RunArtifacts& run) {
    const ViolationSummary v = summarize(run);
    const ConstraintSchedule sched = loop_constraints(run.config.constraints);
    out << "mode " << to_string(run.config.mode) << ", constraints " << to_string(run.config.constraints)
        << ", rows " << run.trace.size() << "\n";
    auto line = [&](const std::string& label, double worst) {
        out << "  " << label << ": worst violation " << fmt(std::max(worst, 0.0)) << " C"
            << (worst > 0.0 ? "  VIOLATED" : "  ok") << "\n";
    };
    line(sched.rows[0].label, v.t_p_out_max_excess);
    line(sched.rows[1].label, v.t_s_out_max_deficit);

    if (run.config.mode == GovernorMode::srg) {
        double kmin = 1.0, ksum = 0.0;
        long nk = 0, below = 0;
        for (const auto& g : run.governor_log) {
            if (std::isnan(g.step.kappa)) continue;
            kmin = std::min(kmin, g.step.kappa);
            ksum += g.step.kappa;
            ++nk;
            if (g.step.kappa < 1.0) ++below;
        }
        out << "  kappa: min " << fmt(kmin) << ", mean " << fmt(nk ? ksum / static_cast<double>(nk) : 1.0)
            << ", steps with kappa < 1: " << below << "\n";
    } else if (run.config.mode == GovernorMode::cg) {
        long qp_steps = 0;
        std::map<std::size_t, long> freq;  // active-set size -> steps
        for (const auto& g : run.governor_log) {
            if (g.step.active_set.empty()) continue;
            ++qp_steps;
            ++freq[g.step.active_set.size()];
        }
        out << "  QP active in " << qp_steps << " of " << run.governor_log.size() << " steps\n";
        for (const auto& [size, n] : freq) out << "    active set size " << size << ": " << n << "\n";
    }
    if (run.config.mode != GovernorMode::bypass) out << "  fallback steps: " << v.fallback_steps << "\n";
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) err << "warning: " << w << "\n";
}

// ---- subcommands --------------------------------------------------------------

int cmd_simulate(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    ScenarioConfig c = resolve_config(o);
    c.mode = GovernorMode::bypass;
    const RunArtifacts run = run_experiment(c);
    write_artifacts(run, o.out);
    print_warnings(err, run.warnings);
    print_summary(out, run);
    return kExitOk;
}

int cmd_govern(const CommonOptions& o, const std::string& model_path, std::ostream& out, std::ostream& err) {
    ScenarioConfig c = resolve_config(o);
    if (o.mode.empty() && c.mode == GovernorMode::bypass && o.config.empty()) c.mode = GovernorMode::cg;
    if (!model_path.empty()) c.model = model_from_json(read_json_file(model_path));
    const RunArtifacts run = run_experiment(c);
    write_artifacts(run, o.out);
    print_warnings(err, run.warnings);
    print_summary(out, run);
    return kExitOk;
}

int cmd_identify(const std::string& trace_path, const std::string& out_path, const CommonOptions& o,
                 const std::vector<std::string>& states, const std::string& validate_path,
                 std::ostream& out, std::ostream& err) {
    std::istringstream is(read_text_file(trace_path));
    const TraceReadResult tr = read_trace_csv(is);
    print_warnings(err, tr.warnings);
    const std::vector<std::string> labels = states.empty() ? default_model_states() : states;
    const std::size_t need = labels.size() + input_labels().size() + 1;
    if (tr.rows.size() < need)
        throw std::runtime_error("insufficient data: " + std::to_string(tr.rows.size()) +
                                 " rows, identification needs at least " + std::to_string(need));

    const SnapshotLog log = snapshot_log(tr.rows, labels);
    RankTruncation rank;
    if (o.rank_opt && o.rank_opt->count()) rank.rank = o.rank;
    const LtiModel model = identify_dmdc(log, rank);
    print_warnings(err, model.warnings);
    write_text_file(out_path, model_to_json(model).dump(2) + "\n");

    auto report = [&](const std::string& name, const SnapshotLog& l) {
        const ModelTrajectory sim = simulate_model(model, l.states.col(0), l.inputs);
        const Eigen::VectorXd e = normalized_mse(sim.outputs, l.outputs);
        out << name << " replay, normalized MSE per output:\n";
        for (std::size_t i = 0; i < model.output_names.size(); ++i) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "  %-10s %.3e\n", model.output_names[i].c_str(),
                          e(static_cast<Eigen::Index>(i)));
            out << buf;
        }
    };
    out << "states " << labels.size() << ", spectral radius " << fmt(spectral_radius(model.a), 6) << "\n";
    report("training", log);
    if (!validate_path.empty()) {
        std::istringstream vs(read_text_file(validate_path));
        const TraceReadResult vr = read_trace_csv(vs);
        report("validation", snapshot_log(vr.rows, labels));
    }
    return kExitOk;
}

Eigen::VectorXd parse_state_list(const std::string& text, std::size_t n) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            vals.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw ConfigError("--state: not a number: '" + cell + "'");
        }
    }
    if (vals.size() != n)
        throw ConfigError("--state: expected " + std::to_string(n) + " values, got " + std::to_string(vals.size()));
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(n));
}

int cmd_moas_export(const std::string& model_path, const CommonOptions& o, double t, const std::string& trace_path,
                    const std::string& state_text, const std::string& out_path, std::ostream& out,
                    std::ostream& err) {
    if (trace_path.empty() == state_text.empty()) throw ConfigError("give exactly one of --trace or --state");
    const LtiModel model = model_from_json(read_json_file(model_path));
    const auto n = static_cast<std::size_t>(model.a.rows());

    Eigen::VectorXd x_phys;
    if (!trace_path.empty()) {
        std::istringstream is(read_text_file(trace_path));
        const TraceReadResult tr = read_trace_csv(is);
        print_warnings(err, tr.warnings);
        if (tr.rows.size() < 2) throw SchemaError("trace needs at least two rows");
        const double dt = tr.rows[1].t - tr.rows[0].t;
        const TraceRow* hit = nullptr;
        for (const auto& r : tr.rows)
            if (std::abs(r.t - t) <= 0.5 * dt) {
                hit = &r;
                break;
            }
        if (!hit) throw ConfigError("--time " + format_double(t) + " is outside the trace");
        x_phys.resize(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            x_phys(static_cast<Eigen::Index>(i)) = signal_value(*hit, model.state_names[i]);
    } else {
        x_phys = parse_state_list(state_text, n);
    }

    ScenarioConfig c = resolve_config(o);
    MoasOptions mo;
    mo.horizon = c.horizon;
    mo.epsilon = c.epsilon;
    mo.prune = c.prune;
    const OutputConstraintSet cs = loop_constraints(c.constraints).at(t);
    const AdmissibleSet set = build_moas(model, cs, mo);
    print_warnings(err, set.warnings);
    const Polygon poly = export_slice(set, x_phys - model.reference_point.states);
    std::ostringstream os;
    write_slice_csv(os, poly);
    write_text_file(out_path, os.str());
    out << "slice at t = " << format_double(t) << ": " << poly.vertices.size() << " vertices, area "
        << fmt(polygon_area(poly)) << "\n";
    return kExitOk;
}

unsigned worker_count(std::size_t jobs) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SALTGOV_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw ConfigError("SALTGOV_THREADS must be a positive integer");
        n = static_cast<unsigned>(v);
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, jobs));
}

int cmd_compare(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    ScenarioConfig base = resolve_config(o);
    if (!base.model) {
        const auto [gm, gt] = resolve_gains(base);
        base.pi_m_dot_s = gm;
        base.pi_t_p_in = gt;
        base.model = identify_loop_model(base);
    }

    struct Job {
        std::string name;
        ScenarioConfig config;
        std::optional<RunArtifacts> result;
        std::exception_ptr error;
    };
    std::vector<Job> jobs;
    auto add = [&](const std::string& name, GovernorMode mode, BoundDirection dir) {
        ScenarioConfig c = base;
        c.mode = mode;
        c.constraints = dir;
        jobs.push_back({name, c, std::nullopt, nullptr});
    };
    add("ungoverned", GovernorMode::bypass, BoundDirection::constant);
    add("cg_constant", GovernorMode::cg, BoundDirection::constant);
    add("cg_increasing", GovernorMode::cg, BoundDirection::increasing);
    add("cg_decreasing", GovernorMode::cg, BoundDirection::decreasing);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                jobs[i].result = run_experiment(jobs[i].config);
            } catch (...) {
                jobs[i].error = std::current_exception();
            }
        }
    };
    const unsigned nthreads = worker_count(jobs.size());
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < nthreads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (auto& j : jobs)
        if (j.error) std::rethrow_exception(j.error);
    for (auto& j : jobs) {
        write_artifacts(*j.result, (fs::path(o.out) / j.name).string());
        out << "[" << j.name << "] ";
        print_warnings(err, j.result->warnings);
        print_summary(out, *j.result);
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reference and command governors for a molten-salt loop"};
    app.require_subcommand(1);

    CommonOptions sim_o, gov_o, id_o, moas_o, cmp_o;

    auto* sim = app.add_subcommand("simulate", "ungoverned closed-loop run");
    sim->add_option("--config", sim_o.config, "scenario config or manifest JSON");
    sim->add_option("--out", sim_o.out, "output directory");
    sim->add_option("--constraints", sim_o.constraints, "constant | eq7-increasing | eq7-decreasing");

    std::string gov_model;
    auto* gov = app.add_subcommand("govern", "governed closed-loop run");
    gov->add_option("--config", gov_o.config, "scenario config or manifest JSON");
    gov->add_option("--mode", gov_o.mode, "bypass | srg | cg");
    gov->add_option("--constraints", gov_o.constraints, "constant | eq7-increasing | eq7-decreasing");
    gov->add_option("--out", gov_o.out, "output directory");
    gov->add_option("--model", gov_model, "model JSON (skips identification)");
    add_set_options(gov, gov_o);

    std::string id_trace, id_out = "model.json", id_validate;
    std::vector<std::string> id_states;
    auto* ident = app.add_subcommand("identify", "DMDc model from a trace CSV");
    ident->add_option("trace", id_trace, "trace CSV")->required();
    ident->add_option("--out", id_out, "model JSON path");
    ident->add_option("--states", id_states, "state signals (comma separated)")->delimiter(',');
    ident->add_option("--validate", id_validate, "held-out trace for a replay check");
    id_o.rank_opt = ident->add_option("--rank", id_o.rank, "SVD rank");

    std::string moas_model, moas_trace, moas_state, moas_out;
    double moas_t = 0.0;
    auto* moas = app.add_subcommand("moas-export", "2-D slice of the admissible set");
    moas->add_option("--model", moas_model, "model JSON")->required();
    moas->add_option("--constraints", moas_o.constraints, "constant | eq7-increasing | eq7-decreasing");
    moas->add_option("--time", moas_t, "time at which bounds and state are taken");
    moas->add_option("--trace", moas_trace, "trace CSV to take the state from");
    moas->add_option("--state", moas_state, "state in physical units, model order, comma separated");
    moas->add_option("--out", moas_out, "vertex CSV path")->required();
    moas->add_option("--config", moas_o.config, "scenario config (horizon, epsilon)");
    moas_o.horizon_opt = moas->add_option("--horizon", moas_o.horizon, "prediction horizon");
    moas_o.epsilon_opt = moas->add_option("--epsilon", moas_o.epsilon, "steady-state tightening factor");

    auto* cmp = app.add_subcommand("compare", "ungoverned and governed runs side by side");
    cmp->add_option("--config", cmp_o.config, "scenario config or manifest JSON");
    cmp->add_option("--out", cmp_o.out, "output directory");
    add_set_options(cmp, cmp_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_o, out, err);
        if (gov->parsed()) return cmd_govern(gov_o, gov_model, out, err);
        if (ident->parsed()) return cmd_identify(id_trace, id_out, id_o, id_states, id_validate, out, err);
        if (moas->parsed())
            return cmd_moas_export(moas_model, moas_o, moas_t, moas_trace, moas_state, moas_out, out, err);
        if (cmp->parsed()) return cmd_compare(cmp_o, out, err);
    } catch (const EmptySliceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitEmptySlice;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}

}  // namespace saltgov
