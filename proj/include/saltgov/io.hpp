#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "saltgov/scenario.hpp"

namespace saltgov {

// Bad or unknown configuration content; the message names the key.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// CSV that lacks required columns or has malformed cells.
class SchemaError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// 17 significant digits, enough for an exact round trip.
std::string format_double(double v);

// ---- trace CSV --------------------------------------------------------------

const std::vector<std::string>& trace_header();

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);

struct TraceReadResult {
    std::vector<TraceRow> rows;
    std::vector<std::string> warnings;
};

// Columns are bound by name. I_pi_T_p_in is not part of the header and is
// rebuilt by integrating the T_p_in tracking error, which matches the
// controller except while Q_dot sits on an actuator limit.
TraceReadResult read_trace_csv(std::istream& is, const ActuatorLimits& limits = {});

// ---- governor and slice CSV -------------------------------------------------

void write_governor_csv(std::ostream& os, const std::vector<GovernorRecord>& log);
void write_slice_csv(std::ostream& os, const Polygon& polygon);
Polygon read_slice_csv(std::istream& is);

// ---- JSON -------------------------------------------------------------------

nlohmann::json model_to_json(const LtiModel& model);
LtiModel model_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const ScenarioConfig& config);
// Unknown keys and type errors raise ConfigError. Relative model paths are
// resolved against `base_dir`.
ScenarioConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");

struct ArtifactFile {
    std::string name;
    std::string contents;
};

// Resolved config (gains and model filled in) plus FNV-1a digests of the
// written files. Feeding it back through --config reproduces the run.
nlohmann::json make_manifest(const RunArtifacts& run, const std::vector<ArtifactFile>& files);

// Accepts either a plain config or a manifest.
ScenarioConfig load_config(const std::string& path);

std::string hex_digest(std::uint64_t h);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
nlohmann::json read_json_file(const std::string& path);

}  // namespace saltgov
