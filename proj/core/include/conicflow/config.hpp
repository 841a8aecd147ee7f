#pragma once

#include <string>
#include <utility>
#include <vector>

#include "conicflow/flow.hpp"

namespace conicflow {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown keys are errors.
/// Relative file paths are resolved against base_dir.
FlowConfig parse_config(const std::string& text, const std::string& base_dir = ".");
FlowConfig load_config(const std::string& path);
/// Canonical text form: every key, fixed order, full precision. Parsing it returns the same config.
std::string config_to_text(const FlowConfig& cfg);

struct SweepSpec {
    FlowConfig base;
    std::vector<double> epsilons;
    std::vector<std::pair<int, int>> resolutions;
    std::vector<double> dts;
    std::vector<std::uint64_t> seeds;
};

/// A run configuration plus `sweep.epsilon`, `sweep.resolution`, `sweep.dt`, `sweep.seed` lists.
SweepSpec parse_sweep(const std::string& text, const std::string& base_dir = ".");
SweepSpec load_sweep(const std::string& path);

struct SweepPoint {
    std::string name;
    FlowConfig config;
};
/// Cartesian product in a fixed order; throws on an empty sweep.
std::vector<SweepPoint> expand_sweep(const SweepSpec& s);

/// "64x128" -> {64, 128}.
std::pair<int, int> parse_resolution(const std::string& text);

}  // namespace conicflow
