#include "kerrcat/fock.hpp"

#include <cmath>

namespace kerrcat {

namespace {

void check_cutoff(int cutoff) {
    if (cutoff < 2) throw std::invalid_argument("cutoff must be >= 2");
}

}  // namespace

double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

CMatrix annihilation(int cutoff) {
    check_cutoff(cutoff);
    CMatrix a = CMatrix::Zero(cutoff, cutoff);
    for (int n = 1; n < cutoff; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

CMatrix number_operator(int cutoff) {
    check_cutoff(cutoff);
    CMatrix n = CMatrix::Zero(cutoff, cutoff);
    for (int k = 0; k < cutoff; ++k) n(k, k) = static_cast<double>(k);
    return n;
}

CMatrix parity_operator(int cutoff) {
    check_cutoff(cutoff);
    CMatrix p = CMatrix::Zero(cutoff, cutoff);
    for (int k = 0; k < cutoff; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    return p;
}

CVector coherent_state(Complex alpha, int cutoff) {
    check_cutoff(cutoff);
    const double a2 = std::norm(alpha);
    // c_n = exp(-|a|^2/2) alpha^n / sqrt(n!), assembled in log space.
    const double log_abs_alpha = (a2 > 0.0) ? std::log(std::abs(alpha)) : 0.0;
    const double arg_alpha = std::arg(alpha);
    CVector psi = CVector::Zero(cutoff);
    double norm2 = 0.0;
    for (int n = 0; n < cutoff; ++n) {
        if (a2 == 0.0) {
            psi(n) = (n == 0) ? 1.0 : 0.0;
        } else {
            const double log_mag = -0.5 * a2 + n * log_abs_alpha - 0.5 * log_factorial(n);
            psi(n) = std::exp(log_mag) * std::polar(1.0, n * arg_alpha);
        }
        norm2 += std::norm(psi(n));
    }
    constexpr double kNormTol = 1e-10;
    if (norm2 < 1.0 - kNormTol) {
        // Find the cutoff that would capture the Poisson tail.
        int required = cutoff;
        double tail2 = norm2;
        while (tail2 < 1.0 - kNormTol && required < 100000) {
            const double log_mag = -0.5 * a2 + required * log_abs_alpha - 0.5 * log_factorial(required);
            tail2 += std::exp(2.0 * log_mag);
            ++required;
        }
        throw CutoffError("coherent_state: cutoff " + std::to_string(cutoff) +
                              " too small for |alpha| = " + std::to_string(std::abs(alpha)) +
                              "; need at least " + std::to_string(required),
                          required);
    }
    psi /= std::sqrt(norm2);
    return psi;
}

CVector cat_state(Complex alpha, Parity parity, int cutoff) {
    if (parity == Parity::Odd && std::abs(alpha) == 0.0)
        throw std::invalid_argument("cat_state: odd cat is degenerate (zero vector) at alpha = 0");
    const CVector plus = coherent_state(alpha, cutoff);
    const CVector minus = coherent_state(-alpha, cutoff);
    CVector psi = (parity == Parity::Even) ? CVector(plus + minus) : CVector(plus - minus);
    const double norm = psi.norm();
    if (norm < 1e-300)
        throw std::invalid_argument("cat_state: degenerate cat (zero vector)");
    psi /= norm;
    // Enforce the exact parity structure: the opposite-parity amplitudes
    // are analytically zero and only carry rounding noise.
    const int keep = (parity == Parity::Even) ? 0 : 1;
    for (int n = 0; n < cutoff; ++n)
        if (n % 2 != keep) psi(n) = 0.0;
    psi /= psi.norm();
    return psi;
}

CMatrix hamiltonian(const SystemParams& params, int cutoff) {
    check_cutoff(cutoff);
    params.validate();
    CMatrix h = CMatrix::Zero(cutoff, cutoff);
    for (int n = 0; n < cutoff; ++n) {
        h(n, n) = -params.detuning * n + 0.5 * params.kerr * n * (n - 1.0);
        if (n + 2 < cutoff) {
            // (G/2) <n+2| a^dag a^dag |n> = (G/2) sqrt((n+1)(n+2))
            const double amp = std::sqrt((n + 1.0) * (n + 2.0));
            h(n + 2, n) = 0.5 * params.pump * amp;
            h(n, n + 2) = 0.5 * std::conj(params.pump) * amp;
        }
    }
    return h;
}

Displacement displacement(Complex beta, int cutoff) {
    check_cutoff(cutoff);
    Displacement result;
    result.truncation_warning = std::norm(beta) > 0.25 * cutoff;
    // D(beta) = exp(i K) with Hermitian K = -i (beta a^dag - beta* a).
    const CMatrix a = annihilation(cutoff);
    const CMatrix generator = beta * a.adjoint() - std::conj(beta) * a;
    const CMatrix k = -I * generator;
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(k);
    const auto& lambda = eig.eigenvalues();
    CVector phases(cutoff);
    for (int j = 0; j < cutoff; ++j) phases(j) = std::polar(1.0, lambda(j));
    result.op = eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
    return result;
}

Complex expectation(const CVector& psi, const CMatrix& op) {
    if (psi.size() != op.rows())
        throw std::invalid_argument("expectation: cutoff mismatch between state and operator");
    return psi.dot(op * psi);
}

Complex expectation(const CMatrix& rho, const CMatrix& op) {
    if (rho.rows() != op.rows())
        throw std::invalid_argument("expectation: cutoff mismatch between state and operator");
    return (rho * op).trace();
}

int default_cutoff(const SystemParams& params) {
    const Complex denom(params.kerr, -params.eta);
    const double g_mag = (std::abs(denom) > 0.0) ? std::abs(params.pump) / std::abs(denom) : 0.0;
    int n = static_cast<int>(std::ceil(4.0 * g_mag + 10.0));
    n += n % 2;  // even sizes match the even/odd block structure
    return std::max(30, n);
}

}  // namespace kerrcat
