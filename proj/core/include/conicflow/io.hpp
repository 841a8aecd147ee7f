#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "conicflow/diagnostics.hpp"
#include "conicflow/flow.hpp"
#include "conicflow/soliton.hpp"

namespace conicflow {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Header line of column names, then one row per sample, full precision.
std::string trace_to_csv(const FlowTrace& trace);
FlowTrace trace_from_csv(const std::string& text);

/// Nodal field as CSV: index, theta, phi, value.
std::string field_to_csv(const SphereGrid& grid, const Field& f);
/// Accepts the four-column form or one value per line.
Field read_field(const std::string& path);

/// Snapshot = field CSV plus a JSON sidecar with time, current marked points and the run config.
void write_snapshot(const std::string& stem, const MetricState& m, const FlowConfig& cfg);
MetricState load_snapshot(const std::string& sidecar_path, FlowConfig* cfg_out = nullptr);

std::string report_to_json(const ConvergenceReport& r, const Divisor& divisor);
std::string report_summary(const ConvergenceReport& r, const Divisor& divisor);

std::string mu_table_to_json(const MuTable& t, const Divisor& d);
std::string mu_table_to_text(const MuTable& t, const Divisor& d);

std::string profile_to_csv(const RadialProfile& p);

struct Manifest {
    std::string config_hash;
    std::string version;
    std::string config_text;
    double wall_seconds = 0.0;
    bool complete = true;
    std::string failure;
    std::vector<std::string> files;
    double initial_mu = 0.0, final_mu = 0.0;
    long steps = 0;
};
std::string manifest_to_json(const Manifest& m, const FlowConfig& cfg);

std::string version_string();

}  // namespace conicflow
