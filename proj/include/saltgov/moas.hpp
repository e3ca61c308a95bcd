#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "saltgov/dmdc.hpp"

namespace saltgov {

// Rows g'y <= b on physical outputs.
struct OutputConstraintSet {
    Eigen::MatrixXd coeffs;  // rows x p
    Eigen::VectorXd bounds;
    std::vector<std::string> labels;
};

void validate(const OutputConstraintSet& constraints);

struct SetProvenance {
    std::uint64_t model_hash = 0;
    std::uint64_t constraint_hash = 0;
    long build_index = 0;
};

// {(x, v) : H_x x + H_v v <= h} in deviation coordinates of the model.
// Row r belongs to constraint row_constraint[r]; row_step[r] is the
// prediction step k, or -1 for the tightened steady-state rows.
struct AdmissibleSet {
    Eigen::MatrixXd h_x;
    Eigen::MatrixXd h_v;
    Eigen::VectorXd h;
    int horizon = 0;
    double epsilon = 0.0;
    std::vector<int> row_constraint;
    std::vector<int> row_step;
    std::vector<char> keep;  // rows surviving redundancy pruning
    Eigen::VectorXd tightening;  // per constraint, fixed at build time
    Eigen::MatrixXd coeffs;      // constraint coefficients the set was built for
    Eigen::VectorXd bounds;      // current physical bounds
    Eigen::VectorXd output_reference;
    bool pruned = false;
    SetProvenance provenance;
    std::vector<std::string> warnings;

    Eigen::Index rows() const { return h.size(); }
    Eigen::Index kept_rows() const;
};

class InstabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeChangeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptySliceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MoasOptions {
    int horizon = 1500;
    double epsilon = 1e-3;
    bool prune = false;
    bool check_determinedness = true;
    long build_index = 0;
};

AdmissibleSet build_moas(const LtiModel& model, const OutputConstraintSet& constraints,
                         const MoasOptions& options = {});

struct Membership {
    bool member = false;
    double margin = 0.0;  // min over kept rows of h - H_x x - H_v v
};

Membership is_member(const AdmissibleSet& set, const Eigen::VectorXd& x, const Eigen::VectorXd& v);

// Replaces the bounds; coefficients must be unchanged. Pruning is
// re-evaluated when a bound moves by more than `reprune_threshold`.
AdmissibleSet rebuild_bounds(const AdmissibleSet& set, const OutputConstraintSet& constraints_at_t,
                             double reprune_threshold = 1e-6);
// In-place variant of rebuild_bounds for per-step use.
void update_bounds(AdmissibleSet& set, const OutputConstraintSet& constraints_at_t,
                   double reprune_threshold = 1e-6);

// Removes rows implied by the others (one LP per row).
void prune_redundant(AdmissibleSet& set);

// Rows in the kept subset, as dense matrices.
struct ActiveRows {
    Eigen::MatrixXd h_x;
    Eigen::MatrixXd h_v;
    Eigen::VectorXd h;
};
ActiveRows kept(const AdmissibleSet& set);

struct Polygon {
    std::vector<Eigen::Vector2d> vertices;  // counter-clockwise
};

// Slice of the set at fixed x in the plane of the two inputs, clipped to
// the box |v_i| <= box_half_width_i.
Polygon export_slice(const AdmissibleSet& set, const Eigen::VectorXd& x,
                     const Eigen::Vector2d& box_half_width = {200.0, 50.0});

double polygon_area(const Polygon& poly);
bool polygon_contains(const Polygon& poly, const Eigen::Vector2d& point, double tol = 1e-9);

std::uint64_t hash_model(const LtiModel& model);
std::uint64_t hash_constraints(const OutputConstraintSet& constraints);

}  // namespace saltgov
