#pragma once

#include <vector>

#include <Eigen/SparseCore>

#include "kerrcat/types.hpp"

namespace kerrcat {

enum class ChannelKind { OnePhoton, TwoPhoton, Feedback };

const char* channel_label(ChannelKind kind);

struct JumpChannel {
    CMatrix op;
    double rate = 0.0;
    ChannelKind kind = ChannelKind::OnePhoton;
};

/// Parity-selective loss channel a_f = a (1 -/+ P)/2: the projector onto the
/// suppressed parity sector acts first, then the photon is lost.
JumpChannel feedback_channel(Parity suppress, double rate, int cutoff);

/// Hamiltonian plus jump channels of the driven Kerr resonator. Channels
/// with zero rate are dropped.
struct LindbladModel {
    int cutoff = 0;
    CMatrix h;
    std::vector<JumpChannel> channels;
};

LindbladModel build_model(const SystemParams& params, int cutoff,
                          Parity suppress = Parity::Odd);

/// Right-hand side of the master equation,
///   drho/dt = i [rho, H] + sum_ch (rate/2)(2 L rho L^dag - L^dag L rho - rho L^dag L).
CMatrix liouvillian_apply(const LindbladModel& model, const CMatrix& rho);
CMatrix liouvillian_apply(const SystemParams& params, const CMatrix& rho);

/// The Liouvillian as a sparse matrix acting on column-major vec(rho).
Eigen::SparseMatrix<Complex> liouvillian_matrix(const LindbladModel& model);

/// Steady state as the null vector of the assembled Liouvillian, solved by
/// a sparse LU with the trace constraint replacing one redundant row.
CMatrix steady_state_null_vector(const LindbladModel& model);

struct EvolutionResult {
    std::vector<double> times;
    std::vector<CMatrix> states;  // one snapshot per requested time
    long steps = 0;
    long rejected = 0;
    double repair_magnitude = 0.0;  // cumulative Hermiticity/trace correction
};

/// Adaptive Dormand-Prince (RK45) integration of the master equation; each
/// requested grid time is hit exactly by step landing. Every accepted step
/// the Hermitian part is enforced and the trace renormalized, with the
/// cumulative correction reported (aborts above 1e-6).
EvolutionResult evolve(const LindbladModel& model, const CMatrix& rho0,
                       const std::vector<double>& t_grid, double rtol = 1e-8,
                       double atol = 1e-10);

/// Fixed-step propagation by the matrix exponential of the assembled
/// Liouvillian; exact up to the exponential's accuracy, intended for long
/// horizons where adaptive stepping is wasteful. The grid must be uniform.
EvolutionResult evolve_expm(const LindbladModel& model, const CMatrix& rho0,
                            const std::vector<double>& t_grid);

/// Uhlmann fidelity Tr sqrt(sqrt(a) b sqrt(a)), clipped to [0, 1].
double fidelity(const CMatrix& rho_a, const CMatrix& rho_b);

}  // namespace kerrcat
