#include "saltgov/moas.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "saltgov/hash.hpp"
#include "saltgov/lp.hpp"

namespace saltgov {

void validate(const OutputConstraintSet& cs) {
    if (cs.coeffs.rows() < 1) throw std::invalid_argument("constraint set needs at least one row");
    if (cs.bounds.size() != cs.coeffs.rows())
        throw std::invalid_argument("constraint set: one bound per row required");
    if (!cs.labels.empty() && static_cast<Eigen::Index>(cs.labels.size()) != cs.coeffs.rows())
        throw std::invalid_argument("constraint set: one label per row required");
    for (Eigen::Index i = 0; i < cs.coeffs.rows(); ++i) {
        if (cs.coeffs.row(i).cwiseAbs().maxCoeff() == 0.0)
            throw std::invalid_argument("constraint set: zero coefficient row");
    }
}

Eigen::Index AdmissibleSet::kept_rows() const {
    return static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), 1));
}

std::uint64_t hash_model(const LtiModel& model) {
    Fnv1a f;
    f.matrix(model.a);
    f.matrix(model.b);
    f.matrix(model.c);
    f.value(model.dt);
    for (const auto& s : model.state_names) f.text(s);
    for (const auto& s : model.input_names) f.text(s);
    for (const auto& s : model.output_names) f.text(s);
    f.matrix(model.reference_point.states);
    f.matrix(model.reference_point.inputs);
    f.matrix(model.reference_point.outputs);
    return f.digest();
}

std::uint64_t hash_constraints(const OutputConstraintSet& cs) {
    Fnv1a f;
    f.matrix(cs.coeffs);
    f.matrix(cs.bounds);
    return f.digest();
}

namespace {

void assign_bounds(AdmissibleSet& set, const Eigen::VectorXd& bounds) {
    const Eigen::VectorXd b_dev = bounds - set.coeffs * set.output_reference;
    for (Eigen::Index r = 0; r < set.rows(); ++r) {
        const int j = set.row_constraint[static_cast<std::size_t>(r)];
        set.h(r) = b_dev(j);
        if (set.row_step[static_cast<std::size_t>(r)] < 0) set.h(r) -= set.tightening(j);
    }
    set.bounds = bounds;
}

// max a'z over the kept rows other than `row`, with `row` relaxed by one.
// Returns true if the row is implied by the others.
bool row_is_redundant(const AdmissibleSet& set, Eigen::Index row) {
    const Eigen::Index n = set.h_x.cols();
    const Eigen::Index m = set.h_v.cols();
    std::vector<Eigen::Index> idx;
    for (Eigen::Index r = 0; r < set.rows(); ++r)
        if (set.keep[static_cast<std::size_t>(r)] && r != row) idx.push_back(r);

    Eigen::MatrixXd g(static_cast<Eigen::Index>(idx.size()) + 1, n + m);
    Eigen::VectorXd h(g.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        g.row(ii) << set.h_x.row(idx[i]), set.h_v.row(idx[i]);
        h(ii) = set.h(idx[i]);
    }
    Eigen::VectorXd a(n + m);
    a << set.h_x.row(row).transpose(), set.h_v.row(row).transpose();
    g.row(g.rows() - 1) = a.transpose();
    h(h.size() - 1) = set.h(row) + 1.0;

    const LpResult lp = solve_lp(-a, g, h);
    if (lp.status != LpStatus::optimal) return false;
    const double tol = 1e-9 * std::max(1.0, std::abs(set.h(row)));
    return -lp.objective <= set.h(row) + tol;
}

}  // namespace

AdmissibleSet build_moas(const LtiModel& model, const OutputConstraintSet& cs,
                         const MoasOptions& opt) {
    validate(cs);
    const Eigen::Index n = model.a.rows();
    const Eigen::Index m = model.b.cols();
    if (cs.coeffs.cols() != model.c.rows())
        throw DimensionMismatchError("build_moas: constraint width differs from output count");
    if (model.d.size() > 0 && model.d.cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument("build_moas: feedthrough D must be zero");
    if (!(opt.epsilon > 0.0 && opt.epsilon <= 0.1))
        throw std::invalid_argument("build_moas: epsilon must lie in (0, 0.1]");
    if (opt.horizon < 0) throw std::invalid_argument("build_moas: negative horizon");
    if (!(spectral_radius(model.a) < 1.0))
        throw InstabilityError("build_moas: model is not stable (spectral radius >= 1)");

    const Eigen::Index nc = cs.coeffs.rows();
    const Eigen::Index rows = nc * (opt.horizon + 2);
    AdmissibleSet set;
    set.h_x.resize(rows, n);
    set.h_v.resize(rows, m);
    set.h.resize(rows);
    set.horizon = opt.horizon;
    set.epsilon = opt.epsilon;
    set.coeffs = cs.coeffs;
    set.output_reference = model.reference_point.outputs;
    set.row_constraint.resize(static_cast<std::size_t>(rows));
    set.row_step.resize(static_cast<std::size_t>(rows));
    set.keep.assign(static_cast<std::size_t>(rows), 1);

    const Eigen::MatrixXd gc = cs.coeffs * model.c;  // nc x n
    Eigen::MatrixXd gc_ak = gc;                      // g C A^k
    Eigen::MatrixXd sum_b = Eigen::MatrixXd::Zero(n, m);  // S_k B
    Eigen::MatrixXd ak_b = model.b;                  // A^k B
    for (int k = 0; k <= opt.horizon; ++k) {
        const Eigen::Index r0 = nc * k;
        set.h_x.middleRows(r0, nc) = gc_ak;
        set.h_v.middleRows(r0, nc) = gc * sum_b;
        for (Eigen::Index j = 0; j < nc; ++j) {
            set.row_constraint[static_cast<std::size_t>(r0 + j)] = static_cast<int>(j);
            set.row_step[static_cast<std::size_t>(r0 + j)] = k;
        }
        sum_b += ak_b;
        ak_b = model.a * ak_b;
        gc_ak = gc_ak * model.a;
    }
    const Eigen::Index rs = nc * (opt.horizon + 1);
    const Eigen::MatrixXd dc_gain =
        (Eigen::MatrixXd::Identity(n, n) - model.a).partialPivLu().solve(model.b);
    set.h_x.middleRows(rs, nc).setZero();
    set.h_v.middleRows(rs, nc) = gc * dc_gain;
    for (Eigen::Index j = 0; j < nc; ++j) {
        set.row_constraint[static_cast<std::size_t>(rs + j)] = static_cast<int>(j);
        set.row_step[static_cast<std::size_t>(rs + j)] = -1;
    }

    set.tightening.resize(nc);
    for (Eigen::Index j = 0; j < nc; ++j)
        set.tightening(j) = opt.epsilon * std::max(1.0, std::abs(cs.bounds(j)));
    assign_bounds(set, cs.bounds);

    set.provenance = {hash_model(model), hash_constraints(cs), opt.build_index};

    if (opt.check_determinedness && opt.horizon > 0) {
        for (Eigen::Index j = 0; j < nc; ++j) {
            const Eigen::Index r = nc * opt.horizon + j;
            if (set.h_x.row(r).cwiseAbs().maxCoeff() == 0.0 &&
                set.h_v.row(r).cwiseAbs().maxCoeff() == 0.0)
                continue;
            if (!row_is_redundant(set, r)) {
                std::ostringstream os;
                os << "horizon too small: step " << opt.horizon << " row for constraint "
                   << (cs.labels.empty() ? std::to_string(j) : cs.labels[static_cast<std::size_t>(j)])
                   << " is not redundant (determinedness not reached)";
                set.warnings.push_back(os.str());
            }
        }
    }
    if (opt.prune) prune_redundant(set);
    return set;
}

void prune_redundant(AdmissibleSet& set) {
    for (Eigen::Index r = 0; r < set.rows(); ++r) {
        if (!set.keep[static_cast<std::size_t>(r)]) continue;
        const bool zero_row = set.h_x.row(r).cwiseAbs().maxCoeff() == 0.0 &&
                              set.h_v.row(r).cwiseAbs().maxCoeff() == 0.0;
        if (zero_row ? set.h(r) >= 0.0 : row_is_redundant(set, r))
            set.keep[static_cast<std::size_t>(r)] = 0;
    }
    set.pruned = true;
}

ActiveRows kept(const AdmissibleSet& set) {
    const Eigen::Index k = set.kept_rows();
    ActiveRows out{Eigen::MatrixXd(k, set.h_x.cols()), Eigen::MatrixXd(k, set.h_v.cols()),
                   Eigen::VectorXd(k)};
    Eigen::Index i = 0;
    for (Eigen::Index r = 0; r < set.rows(); ++r) {
        if (!set.keep[static_cast<std::size_t>(r)]) continue;
        out.h_x.row(i) = set.h_x.row(r);
        out.h_v.row(i) = set.h_v.row(r);
        out.h(i) = set.h(r);
        ++i;
    }
    return out;
}

Membership is_member(const AdmissibleSet& set, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
    if (x.size() != set.h_x.cols() || v.size() != set.h_v.cols())
        throw DimensionMismatchError("is_member: dimension mismatch");
    const Eigen::VectorXd slack = set.h - set.h_x * x - set.h_v * v;
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < slack.size(); ++r)
        if (set.keep[static_cast<std::size_t>(r)]) margin = std::min(margin, slack(r));
    return {margin >= -1e-12, margin};
}

void update_bounds(AdmissibleSet& set, const OutputConstraintSet& cs, double reprune_threshold) {
    if (cs.coeffs.rows() != set.coeffs.rows() || cs.coeffs.cols() != set.coeffs.cols() ||
        cs.bounds.size() != set.coeffs.rows() || cs.coeffs != set.coeffs)
        throw ShapeChangeError("rebuild_bounds: constraint rows differ from the built set");
    const double moved = (cs.bounds - set.bounds).cwiseAbs().maxCoeff();
    assign_bounds(set, cs.bounds);
    set.provenance.constraint_hash = hash_constraints(cs);
    if (set.pruned && moved > reprune_threshold) {
        std::fill(set.keep.begin(), set.keep.end(), 1);
        prune_redundant(set);
    }
}

AdmissibleSet rebuild_bounds(const AdmissibleSet& set, const OutputConstraintSet& cs,
                             double reprune_threshold) {
    AdmissibleSet out = set;
    update_bounds(out, cs, reprune_threshold);
    return out;
}

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

std::vector<Eigen::Vector2d> clip(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& a,
                                  double c) {
    std::vector<Eigen::Vector2d> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d& p = poly[i];
        const Eigen::Vector2d& q = poly[(i + 1) % n];
        const double fp = a.dot(p) - c;
        const double fq = a.dot(q) - c;
        if (fp <= 0.0) out.push_back(p);
        if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) {
            const double s = fp / (fp - fq);
            out.push_back(p + s * (q - p));
        }
    }
    std::vector<Eigen::Vector2d> dedup;
    for (const auto& p : out) {
        if (dedup.empty() || (p - dedup.back()).norm() > 1e-12) dedup.push_back(p);
    }
    while (dedup.size() > 1 && (dedup.front() - dedup.back()).norm() <= 1e-12) dedup.pop_back();
    return dedup;
}

}  // namespace

Polygon export_slice(const AdmissibleSet& set, const Eigen::VectorXd& x,
                     const Eigen::Vector2d& box) {
    if (set.h_v.cols() != 2) throw std::invalid_argument("export_slice: requires exactly two inputs");
    if (x.size() != set.h_x.cols()) throw DimensionMismatchError("export_slice: state size mismatch");
    std::vector<Eigen::Vector2d> poly = {{-box.x(), -box.y()}, {box.x(), -box.y()},
                                         {box.x(), box.y()}, {-box.x(), box.y()}};
    const Eigen::VectorXd c = set.h - set.h_x * x;
    for (Eigen::Index r = 0; r < set.rows() && !poly.empty(); ++r) {
        if (!set.keep[static_cast<std::size_t>(r)]) continue;
        const Eigen::Vector2d a = set.h_v.row(r).transpose();
        if (a.cwiseAbs().maxCoeff() == 0.0) {
            if (c(r) < 0.0) poly.clear();
            continue;
        }
        poly = clip(poly, a, c(r));
    }
    if (poly.empty()) throw EmptySliceError("export_slice: no admissible input at this state");
    return {poly};
}

double polygon_area(const Polygon& poly) {
    double s = 0.0;
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0; i < n; ++i) s += cross(poly.vertices[i], poly.vertices[(i + 1) % n]);
    return 0.5 * s;
}

bool polygon_contains(const Polygon& poly, const Eigen::Vector2d& pt, double tol) {
    const std::size_t n = poly.vertices.size();
    if (n == 0) return false;
    if (n == 1) return (pt - poly.vertices[0]).norm() <= tol;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d& a = poly.vertices[i];
        const Eigen::Vector2d& b = poly.vertices[(i + 1) % n];
        const Eigen::Vector2d e = b - a;
        const double len = e.norm();
        if (len == 0.0) continue;
        if (cross(e, pt - a) / len < -tol) return false;
    }
    return true;
}

}  // namespace saltgov
