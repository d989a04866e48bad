#pragma once

#include <vector>

#include "kerrcat/types.hpp"

namespace kerrcat {

/// Dimensionless parameters of the analytic steady state:
///   c = (Delta + i gamma/2) / (U - i eta),  g = G / (U - i eta).
struct ReducedParams {
    Complex c;
    Complex g;
};

ReducedParams reduced_params(const SystemParams& params);

/// Terminating Gauss hypergeometric series 2F1(-l, -c; -2c; 2), accumulated
/// with Pochhammer recurrences. Throws if some denominator factor -2c + k
/// (k = 0..l-1) is within 1e-12 of zero.
Complex hyp2f1_neg_int(int ell, Complex c);

/// Complex value carried as log-magnitude plus unit phase, so products of
/// fast-growing series coefficients never overflow.
struct LogComplex {
    double log_mag;  // -inf encodes an exact zero
    Complex phase;   // unit modulus (0 when the value is exactly zero)

    Complex value() const { return std::exp(log_mag) * phase; }
};

/// Table of F(g, c, l) = (i sqrt(g))^l 2F1(-l, -c; -2c; 2) for l = 0..L.
/// Odd entries are exactly zero; F(g, c, 0) = 1.
struct FCoefficientTable {
    ReducedParams reduced;
    std::vector<LogComplex> values;

    int max_index() const { return static_cast<int>(values.size()) - 1; }
    Complex value(int ell) const { return values[ell].value(); }
};

FCoefficientTable f_coefficients(const ReducedParams& rp, int max_index);

struct SteadyStateResult {
    CMatrix rho;            // trace-normalized, Hermitian
    double normalization;   // trace of the unnormalized matrix
    ReducedParams reduced;
    int cutoff;
    int series_terms;       // largest series index summed
    double tail_mass;       // populations of the last two Fock rows
};

/// Exact steady-state density matrix in the Fock basis,
///   <n|rho|m> = (1/norm) sum_l F(g,c,l+n) F*(g,c,l+m) / (l! sqrt(n! m!)).
/// Requires gamma > 0 or eta > 0 and gamma_f == 0; throws CutoffError when
/// the tail mass exceeds 1e-10.
SteadyStateResult steady_density_matrix(const SystemParams& params, int cutoff,
                                        double series_tol = 1e-16);

/// Steady-state correlation <a^dag^n a^m> from the closed-form series
///   (1/norm) sum_l (2^l / l!) F(g,c,l+m) F*(g,c,l+n).
Complex steady_moment(const SystemParams& params, int n, int m,
                      double series_tol = 1e-16);

/// Analytic steady-state Wigner function (feedback-free),
///   W(beta) = (2 / pi norm) exp(-2|beta|^2) |sum_l (2 beta*)^l / l! F(g,c,l)|^2.
/// Nonnegative for every beta.
double steady_wigner(const SystemParams& params, Complex beta,
                     double series_tol = 1e-16);

}  // namespace kerrcat
