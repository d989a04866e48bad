#pragma once

#include "kerrcat/types.hpp"

namespace kerrcat {

/// log(n!) via lgamma, safe far beyond the double-overflow point of n!.
double log_factorial(int n);

/// Annihilation operator a on the truncated Fock space: (n-1, n) = sqrt(n).
CMatrix annihilation(int cutoff);

/// Number operator n = a^dag a, diagonal (0, 1, ..., cutoff-1).
CMatrix number_operator(int cutoff);

/// Photon parity exp(i pi n), diagonal (+1, -1, +1, ...).
CMatrix parity_operator(int cutoff);

/// Normalized coherent state |alpha>. Throws CutoffError (naming the
/// required size) if the truncated norm falls below 1 - 1e-10.
CVector coherent_state(Complex alpha, int cutoff);

/// Even/odd cat state (|alpha> +/- |-alpha>), normalized.
/// The odd cat at alpha = 0 is the zero vector and is rejected.
CVector cat_state(Complex alpha, Parity parity, int cutoff);

/// Hamiltonian of the driven Kerr resonator:
///   H = -Delta a^dag a + (U/2) a^dag a^dag a a + (G/2) a^dag a^dag + (G*/2) a a
CMatrix hamiltonian(const SystemParams& params, int cutoff);

struct Displacement {
    CMatrix op;
    bool truncation_warning = false;  // set when |beta|^2 > cutoff/4
};

/// Displacement operator D(beta) = exp(beta a^dag - beta* a), built by
/// eigendecomposition of the Hermitian generator.
Displacement displacement(Complex beta, int cutoff);

/// <psi|O|psi> for a pure state.
Complex expectation(const CVector& psi, const CMatrix& op);

/// Tr[rho O] for a density matrix.
Complex expectation(const CMatrix& rho, const CMatrix& op);

/// Default truncation heuristic: N = max(30, ceil(4|g| + 10)) with
/// g = G / (U - i eta).
int default_cutoff(const SystemParams& params);

}  // namespace kerrcat
