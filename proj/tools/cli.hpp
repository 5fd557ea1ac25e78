#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hslab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitConvergence = 2;
inline constexpr int kExitUsage = 64;

/// Invalid flags or config; reported with the offending field and exit 64.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// --help or --version; carries the text to print with exit 0.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string subcommand;

  // manifold / bubble
  std::optional<int> n;
  std::optional<double> s;
  double radius = 1.0;

  // potential
  std::optional<double> a_const;
  std::optional<std::string> a_file;

  // grids
  int grid_N = 512;
  std::string identity_grid = "default";

  // expansion sweep
  std::optional<double> rho;
  std::optional<double> eps_min;
  std::optional<double> eps_max;
  int per_decade = 12;

  // subcritical solver
  std::vector<double> q_ladder;  // empty: default ladder
  long max_iters = 100000;
  double tol = 1e-8;

  // output
  std::optional<std::string> csv_path;
  std::optional<std::string> json_path;
  std::optional<std::string> svg_path;

  std::uint64_t seed = 1;
  std::optional<int> threads;
  std::optional<std::string> config_path;
};

/// Parses command-line arguments (argv[0] is the program name) into a
/// config, applying --config overrides. Throws UsageError or HelpRequested.
[[nodiscard]] RunConfig parse_args(int argc, const char* const* argv);

/// Overrides fields of `cfg` from a JSON document. Throws UsageError.
void apply_config_json(RunConfig& cfg, const std::string& text);

/// Field-level validation against the module preconditions. Throws UsageError.
void validate(const RunConfig& cfg);

/// Runs a validated config. Primary output goes to `out` when no file path
/// is configured for it. Returns the exit status; library errors propagate.
int run(const RunConfig& cfg, std::ostream& out);

/// Full entry point: parse, validate, run, and map errors to exit codes.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hslab::cli
