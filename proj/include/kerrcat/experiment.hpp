#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kerrcat/analysis.hpp"
#include "kerrcat/types.hpp"

namespace kerrcat {

/// Configuration problems (bad schema, unknown keys, unreadable files).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Exit codes shared by the library entry points and the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitCutoff = 4;

struct TimeGrid {
    double stop = 1.0;
    int points = 101;  // includes t = 0

    std::vector<double> times() const;
};

struct WignerWindow {
    double re_min = -5.0, re_max = 5.0;
    double im_min = -5.0, im_max = 5.0;
    double step = 0.05;

    GridSpec grid() const;
};

/// One experiment: a scenario tag plus everything needed to reproduce it.
/// Loaded from a JSON file; unknown keys are rejected.
struct ExperimentConfig {
    std::string name;      // output file prefix
    std::string scenario;  // steady | evolve | trajectory | ensemble | feedback | wigner | sweep
    SystemParams params;
    int cutoff = 0;  // 0 = choose automatically
    std::vector<std::string> initial_states;
    TimeGrid time;
    std::string integrator = "adaptive";  // or "expm" (uniform grids only)
    int trajectories = 100;
    uint64_t seed = 1;
    double dt = 1e-3;
    int record_every = 1;
    double rtol = 1e-8;
    double atol = 1e-10;
    double series_tol = 1e-16;
    std::vector<double> feedback_rates;
    WignerWindow window;
    std::vector<double> sweep_detuning, sweep_pump, sweep_gamma, sweep_kerr;
    int workers = 0;  // 0 = resolve from options/environment

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig parse(const std::string& text);

    /// Effective Fock-space size once "auto" is resolved.
    int resolved_cutoff() const;
};

/// Parses an initial-state description: vacuum | fock:n | coherent:re,im |
/// cat:+:re,im | cat:-:re,im.
CVector build_state(const std::string& spec, int cutoff);

struct RunOptions {
    std::string output_dir = ".";
    int workers = 0;  // 0 = config, then environment, then 1
    std::optional<uint64_t> seed_override;
    std::optional<int> cutoff_override;
};

/// Runs one experiment and writes its CSV tables plus a JSON metadata
/// sidecar; returns one of the exit codes above and logs a line per artifact.
int run_experiment(const ExperimentConfig& config, const RunOptions& options,
                   std::ostream& log);

/// Convenience wrapper: load, run, and map failures to exit codes.
int run_experiment_file(const std::string& path, const RunOptions& options,
                        std::ostream& log, std::ostream& err);

/// Checks a config without running it: schema verdict, resolved cutoff, and
/// a rough memory estimate. Returns an exit code.
int validate_config_file(const std::string& path, std::ostream& out, std::ostream& err);

}  // namespace kerrcat
