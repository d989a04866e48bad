#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kerrcat/lindblad.hpp"
#include "kerrcat/types.hpp"

namespace kerrcat {

/// Counter-based splitmix64 generator; uniform() draws in [0, 1) with 53
/// bits, identical across platforms.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    uint64_t state_;
};

/// Deterministic per-trajectory seed so ensemble members are independent of
/// scheduling order.
uint64_t derive_seed(uint64_t master_seed, uint64_t index);

/// Non-Hermitian generator of the between-jump evolution,
///   H_eff = H - i (gamma/2) a^dag a - i (eta/2) a^dag^2 a^2
///           - i (gamma_f/2) a_f^dag a_f.
struct EffectiveHamiltonian {
    CMatrix matrix;
    double gamma = 0.0;
    double eta = 0.0;
    double gamma_f = 0.0;
};

EffectiveHamiltonian effective_hamiltonian(const SystemParams& params, int cutoff,
                                           Parity suppress = Parity::Odd);

struct JumpEvent {
    double time;
    ChannelKind channel;
};

struct TrajectoryRecord {
    uint64_t seed = 0;
    std::vector<double> times;
    std::vector<double> mean_n;
    std::vector<double> mean_parity;
    std::vector<JumpEvent> jumps;
    std::vector<CVector> snapshots;  // filled only when requested
};

struct EnsembleSummary {
    int count = 0;
    std::vector<double> times;
    std::vector<double> mean_n, se_n;
    std::vector<double> mean_parity, se_parity;
};

/// Photon-counting Monte Carlo wave-function stepper with a fixed step: at
/// each step the state either jumps through one channel or evolves by the
/// precomputed no-jump propagator exp(-i H_eff dt) and renormalizes.
class TrajectorySimulator {
  public:
    TrajectorySimulator(const SystemParams& params, int cutoff, double dt,
                        Parity suppress = Parity::Odd);

    /// Advances psi by one step in place; returns the jump channel if one
    /// fired. Throws if the total jump probability exceeds 0.1.
    std::optional<ChannelKind> step(CVector& psi, Rng& rng) const;

    double dt() const { return dt_; }
    int cutoff() const { return cutoff_; }

  private:
    int cutoff_;
    double dt_;
    CMatrix propagator;  // exp(-i H_eff dt)
    struct Channel {
        CMatrix op;
        double rate;
        ChannelKind kind;
    };
    std::vector<Channel> channels_;
};

TrajectoryRecord run_trajectory(const SystemParams& params, const CVector& psi0,
                                double horizon, double dt, uint64_t seed,
                                int record_every = 1, bool keep_snapshots = false,
                                Parity suppress = Parity::Odd);

/// Runs `count` trajectories with seeds derived from the master seed and
/// reduces per-time means and standard errors. Trajectories run in parallel
/// across `workers` threads (0 = hardware default); the reduction is in
/// index order, so results do not depend on scheduling.
EnsembleSummary ensemble(const SystemParams& params, const CVector& psi0,
                         double horizon, double dt, int count,
                         uint64_t master_seed, int record_every = 1,
                         int workers = 0, Parity suppress = Parity::Odd);

}  // namespace kerrcat
