#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace saltgov {

struct ReferencePoint {
    Eigen::VectorXd states;
    Eigen::VectorXd inputs;
    Eigen::VectorXd outputs;
};

// Time-aligned snapshots in physical units. Column j of `states` and
// `outputs` is instant j; column j of `inputs` is the input held over
// [t_j, t_{j+1}].
struct SnapshotLog {
    std::vector<double> times;
    Eigen::MatrixXd states;   // n x (L+1)
    Eigen::MatrixXd inputs;   // m x L
    Eigen::MatrixXd outputs;  // p x (L+1)
    std::vector<std::string> state_names;
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
    ReferencePoint reference_point;
};

struct LtiModel {
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
    Eigen::MatrixXd c;
    Eigen::MatrixXd d;
    double dt = 0.0;
    std::vector<std::string> state_names;
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
    ReferencePoint reference_point;
    std::vector<double> singular_values;  // of the snapshot matrix, retained ones
    std::vector<std::string> warnings;
};

class RankDeficiencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatchError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Rank truncation of the snapshot matrix: either a fixed rank or a
// relative singular-value threshold (keep sigma_i / sigma_1 > threshold).
struct RankTruncation {
    std::optional<std::size_t> rank;
    double threshold = 1e-8;
    // Optional reduced order for the state-space projection (defaults to n).
    std::optional<std::size_t> output_rank;
};

// Checks column counts, names and uniform sampling; throws std::invalid_argument.
void validate(const SnapshotLog& log);

LtiModel identify_dmdc(const SnapshotLog& log, const RankTruncation& rank = {});

struct ModelTrajectory {
    Eigen::MatrixXd states;   // physical units, n x (L+1)
    Eigen::MatrixXd outputs;  // physical units, p x (L+1)
};

// x0 and inputs are physical; inputs has one column per step.
ModelTrajectory simulate_model(const LtiModel& model, const Eigen::VectorXd& x0,
                               const Eigen::MatrixXd& inputs);

double spectral_radius(const Eigen::MatrixXd& a);

// Per-signal MSE divided by the signal variance. Signals with negligible
// variance are normalized by max(1, mean^2) instead.
Eigen::VectorXd normalized_mse(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& actual);

// Restrict a log to a subset of its state rows (by label).
SnapshotLog select_state_rows(const SnapshotLog& log, const std::vector<std::string>& names);

// Split at column `split`: training keeps instants [0, split], validation
// starts at instant split.
std::pair<SnapshotLog, SnapshotLog> split_log(const SnapshotLog& log, std::size_t split);

struct SubsetScore {
    std::vector<std::string> states;
    double mse = 0.0;  // mean normalized validation MSE over outputs (+inf if unusable)
};

struct SelectionResult {
    std::vector<std::string> selected;
    double mse = 0.0;
    std::vector<SubsetScore> evaluated;  // in evaluation order
};

// Validation score of one state subset with the 70/30 time split.
SubsetScore evaluate_subset(const SnapshotLog& log, const std::vector<std::string>& states,
                            const RankTruncation& rank = {});

SelectionResult select_states(const SnapshotLog& log, const std::vector<std::string>& candidates,
                              const std::vector<std::string>& outputs,
                              const RankTruncation& rank = {});

}  // namespace saltgov
