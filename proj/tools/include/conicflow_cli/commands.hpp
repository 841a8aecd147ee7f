#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace conicflow::cli {

/// Process exit codes.
enum ExitCode : int { Ok = 0, Usage = 1, NumericalFailure = 2, Undecided = 3 };

/// Command-line overrides applied on top of a loaded configuration.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> resolution;
    std::optional<double> epsilon;
    std::optional<double> t_max;
    std::optional<double> dt;
};

/// Divisor input: a JSON divisor file, or a run configuration (its divisor is used).
int cmd_classify(const std::string& path, const std::string& out_dir, std::ostream& out, std::ostream& err);
int cmd_soliton_table(const std::string& path, const std::string& out_dir, std::ostream& out, std::ostream& err);

/// Writes manifest.json, trace.csv, snapshots, final.{csv,json}, report.{json,txt} into out_dir.
int cmd_run(const std::string& config_path, const std::string& out_dir, const Overrides& ov, std::ostream& out,
            std::ostream& err);

/// One sub-directory per sweep point plus aggregate.csv; failing runs are recorded, not fatal.
int cmd_sweep(const std::string& sweep_path, const std::string& out_dir, int workers, const Overrides& ov,
              std::ostream& out, std::ostream& err);

/// Rebuilds the convergence report of a finished run from its trace and final snapshot.
int cmd_report(const std::string& run_dir, std::ostream& out, std::ostream& err);

/// Dispatches argv to the subcommands (the `conicflow` executable is a thin wrapper).
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace conicflow::cli
