#include "kerrcat/steady.hpp"

#include <cmath>
#include <limits>

#include "kerrcat/fock.hpp"

namespace kerrcat {

namespace {

constexpr double kPoleGuard = 1e-12;
constexpr int kConsecutiveBelowTol = 5;
constexpr int kMaxSeriesTerms = 100000;

/// Tracks the stop rule shared by all steady-state series: finish once a
/// fixed number of consecutive terms fall below tol relative to the scale
/// of the partial sum.
class SeriesAccumulator {
  public:
    explicit SeriesAccumulator(double tol) : tol_(tol) {}

    /// Returns true once the series has converged.
    bool add(Complex term) {
        sum_ += term;
        scale_ = std::max({scale_, std::abs(sum_), std::abs(term)});
        if (std::abs(term) <= tol_ * scale_)
            ++below_;
        else
            below_ = 0;
        return below_ >= kConsecutiveBelowTol;
    }

    Complex sum() const { return sum_; }

  private:
    double tol_;
    Complex sum_ = 0.0;
    double scale_ = 0.0;
    int below_ = 0;
};

void check_dissipative(const SystemParams& params) {
    params.validate();
    if (params.gamma <= 0.0 && params.eta <= 0.0)
        throw std::invalid_argument(
            "steady state requires at least one of gamma, eta strictly positive");
    if (params.gamma_f != 0.0)
        throw std::invalid_argument(
            "unsupported parameter: the analytic steady state excludes feedback (gamma_f must be 0)");
}

LogComplex log_zero() { return {-std::numeric_limits<double>::infinity(), Complex(0.0, 0.0)}; }

}  // namespace

ReducedParams reduced_params(const SystemParams& params) {
    params.validate();
    const Complex denom(params.kerr, -params.eta);
    if (std::abs(denom) == 0.0)
        throw std::invalid_argument("reduced_params: U - i eta must be nonzero");
    ReducedParams rp;
    rp.c = Complex(params.detuning, 0.5 * params.gamma) / denom;
    rp.g = params.pump / denom;
    return rp;
}

Complex hyp2f1_neg_int(int ell, Complex c) {
    if (ell < 0) throw std::invalid_argument("hyp2f1_neg_int: ell must be >= 0");
    for (int k = 0; k < ell; ++k) {
        if (std::abs(-2.0 * c + static_cast<double>(k)) < kPoleGuard)
            throw std::invalid_argument(
                "hyp2f1_neg_int: degenerate parameter, -2c + " + std::to_string(k) +
                " vanishes");
    }
    // The direct terminating sum sum_k (-l)_k (-c)_k / ((-2c)_k k!) 2^k
    // cancels catastrophically for l beyond ~35 (terms reach 3^l while the
    // sum stays O(1)). The contiguous relation in the first parameter has a
    // vanishing middle coefficient here and collapses to the stable product
    //   2F1(-l, -c; -2c; 2) = prod_{j odd, j < l} j / (j - 2c),
    // which also yields the exact zero at odd l.
    if (ell % 2 == 1) return 0.0;
    Complex prod = 1.0;
    for (int j = 1; j < ell; j += 2) prod *= static_cast<double>(j) / (static_cast<double>(j) - 2.0 * c);
    return prod;
}

FCoefficientTable f_coefficients(const ReducedParams& rp, int max_index) {
    if (max_index < 0) throw std::invalid_argument("f_coefficients: max_index must be >= 0");
    FCoefficientTable table;
    table.reduced = rp;
    table.values.reserve(max_index + 1);

    const double g_mag = std::abs(rp.g);
    // i sqrt(g) on the principal branch.
    const double log_isqrtg = (g_mag > 0.0) ? 0.5 * std::log(g_mag) : 0.0;
    const double arg_isqrtg = 0.5 * std::arg(rp.g) + 0.5 * M_PI;

    for (int ell = 0; ell <= max_index; ++ell) {
        if (ell % 2 == 1) {
            table.values.push_back(log_zero());  // F vanishes at odd index
            continue;
        }
        if (g_mag == 0.0 && ell > 0) {
            table.values.push_back(log_zero());
            continue;
        }
        const Complex h = hyp2f1_neg_int(ell, rp.c);
        const double h_mag = std::abs(h);
        if (h_mag == 0.0) {
            table.values.push_back(log_zero());
            continue;
        }
        LogComplex f;
        f.log_mag = ell * log_isqrtg + std::log(h_mag);
        f.phase = std::polar(1.0, ell * arg_isqrtg + std::arg(h));
        table.values.push_back(f);
    }
    return table;
}

namespace {

/// Ensures the table covers indices up to `needed`, growing geometrically.
void ensure_table(FCoefficientTable& table, int needed) {
    if (needed <= table.max_index()) return;
    const int target = std::max(needed, 2 * table.max_index());
    table = f_coefficients(table.reduced, target);
}

/// sum_l 2^l / l! F(l+m) F*(l+n), the common kernel of the moment series
/// (and, at n = m = 0, the normalization).
Complex moment_series(FCoefficientTable& table, int n, int m, double series_tol) {
    SeriesAccumulator acc(series_tol);
    for (int ell = 0; ell < kMaxSeriesTerms; ++ell) {
        ensure_table(table, std::max(ell + n, ell + m));
        const LogComplex& fa = table.values[ell + m];
        const LogComplex& fb = table.values[ell + n];
        Complex term = 0.0;
        if (std::isfinite(fa.log_mag) && std::isfinite(fb.log_mag)) {
            const double log_mag =
                fa.log_mag + fb.log_mag + ell * M_LN2 - log_factorial(ell);
            term = std::exp(log_mag) * fa.phase * std::conj(fb.phase);
        }
        if (acc.add(term)) return acc.sum();
    }
    throw std::runtime_error("steady-state series failed to converge");
}

}  // namespace

SteadyStateResult steady_density_matrix(const SystemParams& params, int cutoff,
                                        double series_tol) {
    if (cutoff < 2) throw std::invalid_argument("cutoff must be >= 2");
    check_dissipative(params);

    SteadyStateResult result;
    result.reduced = reduced_params(params);
    result.cutoff = cutoff;
    result.series_terms = 0;

    FCoefficientTable table = f_coefficients(result.reduced, cutoff + 64);
    CMatrix rho = CMatrix::Zero(cutoff, cutoff);

    for (int n = 0; n < cutoff; ++n) {
        for (int m = n; m < cutoff; ++m) {
            if ((n + m) % 2 != 0) continue;  // no even-odd coherences
            SeriesAccumulator acc(series_tol);
            const double log_nm = 0.5 * (log_factorial(n) + log_factorial(m));
            // F vanishes at odd index, so only l with l + n even contribute.
            int ell = (n % 2 == 0) ? 0 : 1;
            for (; ell < kMaxSeriesTerms; ell += 2) {
                ensure_table(table, ell + m);
                const LogComplex& fa = table.values[ell + n];
                const LogComplex& fb = table.values[ell + m];
                Complex term = 0.0;
                if (std::isfinite(fa.log_mag) && std::isfinite(fb.log_mag)) {
                    const double log_mag =
                        fa.log_mag + fb.log_mag - log_factorial(ell) - log_nm;
                    term = std::exp(log_mag) * fa.phase * std::conj(fb.phase);
                }
                if (acc.add(term)) break;
            }
            if (ell >= kMaxSeriesTerms)
                throw std::runtime_error("steady-state series failed to converge");
            result.series_terms = std::max(result.series_terms, ell + m);
            rho(n, m) = acc.sum();
            rho(m, n) = std::conj(acc.sum());
        }
    }

    const double trace = rho.trace().real();
    if (!(trace > 0.0)) throw std::runtime_error("steady state has nonpositive trace");
    rho /= trace;
    result.normalization = trace;

    result.tail_mass = rho(cutoff - 1, cutoff - 1).real() + rho(cutoff - 2, cutoff - 2).real();
    if (result.tail_mass > 1e-10)
        throw CutoffError("steady_density_matrix: tail mass " +
                              std::to_string(result.tail_mass) +
                              " exceeds 1e-10; increase the cutoff",
                          2 * cutoff);

    result.rho = std::move(rho);
    return result;
}

Complex steady_moment(const SystemParams& params, int n, int m, double series_tol) {
    if (n < 0 || m < 0) throw std::invalid_argument("moment orders must be >= 0");
    check_dissipative(params);
    if ((n + m) % 2 != 0) return 0.0;  // parity selection rule

    FCoefficientTable table = f_coefficients(reduced_params(params), std::max(n, m) + 64);
    const Complex norm = moment_series(table, 0, 0, series_tol);
    if (n == 0 && m == 0) return 1.0;
    return moment_series(table, n, m, series_tol) / norm;
}

double steady_wigner(const SystemParams& params, Complex beta, double series_tol) {
    check_dissipative(params);
    FCoefficientTable table = f_coefficients(reduced_params(params), 64);
    const double norm = moment_series(table, 0, 0, series_tol).real();

    const double b_mag = std::abs(2.0 * beta);
    const double b_arg = std::arg(std::conj(beta));
    SeriesAccumulator acc(series_tol);
    for (int ell = 0; ell < kMaxSeriesTerms; ell += 2) {
        ensure_table(table, ell);
        const LogComplex& f = table.values[ell];
        Complex term = 0.0;
        if (std::isfinite(f.log_mag) && (b_mag > 0.0 || ell == 0)) {
            const double log_mag = f.log_mag - log_factorial(ell) +
                                   (ell > 0 ? ell * std::log(b_mag) : 0.0);
            term = std::exp(log_mag) * f.phase * std::polar(1.0, ell * b_arg);
        }
        if (acc.add(term)) break;
    }
    const double amp = std::abs(acc.sum());
    return (2.0 / (M_PI * norm)) * std::exp(-2.0 * std::norm(beta)) * amp * amp;
}

}  // namespace kerrcat
