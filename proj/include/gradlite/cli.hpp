#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gradlite/harness.hpp"

namespace gradlite::cli {

enum class Command { run, ablate, rate_check, grad_check, mem_report };

/// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDiverged = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitGradCheck = 4;
inline constexpr int kExitIo = 5;

/// Malformed command line: unknown flag, bad enum value, unparsable number.
class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

struct CliConfig {
    Command command = Command::run;
    ProblemSpec problem;
    OptimizerSpec optimizer;
    /// 0 selects the command default (run 1000, ablate 3000).
    std::int64_t steps = 0;
    std::uint64_t seed = 0;
    /// Empty selects the command default (ablate {0,1,2}, rate-check {0..4}).
    std::vector<std::uint64_t> seeds;
    std::vector<std::int64_t> t_grid = kDefaultRateGrid;
    /// rate-check: one fit per rank; empty means just --k.
    std::vector<Index> ranks;
    double rate_c = 0.3;
    /// ablate: set when --eta was given, which skips tuning.
    bool eta_given = false;
    std::string out;
    std::string summary;
    unsigned threads = 0;
    /// Set by --help; nothing else is meaningful then.
    bool help = false;
};

std::string to_string(Command command);

/// Parses and validates. Throws UsageError for malformed input and
/// ConfigError (or RankError) for well-formed but invalid settings.
CliConfig parse_args(const std::vector<std::string>& args);

std::string help_text();

/// Executes a validated config and returns the exit code. Primary output goes
/// to --out (or `out` when empty); diagnostics go to `err`.
int dispatch(const CliConfig& cfg, std::ostream& out, std::ostream& err);

/// parse_args + dispatch with every error mapped to its exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gradlite::cli
