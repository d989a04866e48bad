#include "kerrcat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "kerrcat/fock.hpp"

namespace kerrcat {

SpectrumReport spectral_decompose(const CMatrix& rho) {
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
        throw std::invalid_argument("spectral_decompose: matrix is not Hermitian");
    const int n = static_cast<int>(rho.rows());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (rho + rho.adjoint()));

    const CVector parity_diag = parity_operator(n).diagonal();
    const CVector number_diag = number_operator(n).diagonal();
    auto diag_expect = [&](const CVector& psi, const CVector& diag) {
        double v = 0.0;
        for (int k = 0; k < n; ++k) v += std::norm(psi(k)) * diag(k).real();
        return v;
    };

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> parity(n);
    for (int k = 0; k < n; ++k)
        parity[k] = diag_expect(eig.eigenvectors().col(k), parity_diag);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double pa = eig.eigenvalues()(a), pb = eig.eigenvalues()(b);
        if (std::abs(pa - pb) >= 1e-12) return pa > pb;
        return parity[a] > parity[b];
    });

    SpectrumReport report;
    for (int idx : order) {
        CVector psi = eig.eigenvectors().col(idx);
        // Phase convention: largest-magnitude amplitude real positive.
        int peak = 0;
        for (int k = 1; k < n; ++k)
            if (std::abs(psi(k)) > std::abs(psi(peak))) peak = k;
        if (std::abs(psi(peak)) > 0.0)
            psi *= std::conj(psi(peak)) / std::abs(psi(peak));
        report.probabilities.push_back(eig.eigenvalues()(idx));
        report.mean_n.push_back(diag_expect(psi, number_diag));
        report.mean_parity.push_back(parity[idx]);
        report.states.push_back(std::move(psi));
    }
    report.residual = 1.0 - report.probabilities[0] -
                      (n > 1 ? report.probabilities[1] : 0.0);
    return report;
}

namespace {

double cat_overlap(const CVector& psi, Complex alpha, Parity parity) {
    const int cutoff = static_cast<int>(psi.size());
    if (parity == Parity::Odd && std::abs(alpha) == 0.0) return -1.0;
    try {
        return std::abs(psi.dot(cat_state(alpha, parity, cutoff)));
    } catch (const CutoffError&) {
        return -1.0;  // amplitude not representable at this cutoff
    }
}

/// Golden-section maximization of f on [lo, hi].
template <typename F>
double golden_max(F f, double lo, double hi, double tol) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

CatFit fit_cat(const CVector& psi) {
    const int cutoff = static_cast<int>(psi.size());
    if (std::abs(psi.norm() - 1.0) > 1e-8)
        throw std::invalid_argument("fit_cat: state must be normalized");

    const CVector parity_diag = parity_operator(cutoff).diagonal();
    const CVector number_diag = number_operator(cutoff).diagonal();
    double mean_p = 0.0, mean_n = 0.0;
    for (int k = 0; k < cutoff; ++k) {
        mean_p += std::norm(psi(k)) * parity_diag(k).real();
        mean_n += std::norm(psi(k)) * number_diag(k).real();
    }
    if (std::abs(mean_p) < 1e-6)
        throw std::invalid_argument("fit_cat: ambiguous parity (<P> is zero)");
    const Parity parity = mean_p > 0.0 ? Parity::Even : Parity::Odd;

    // Coarse grid; cats are alpha <-> -alpha symmetric, so phase in [0, pi).
    const double r_max = std::sqrt(2.0 * mean_n) + 2.0;
    constexpr int kGrid = 41;
    double best_r = 0.0, best_phi = 0.0, best = -1.0;
    for (int i = 0; i < kGrid; ++i) {
        const double r = r_max * i / (kGrid - 1);
        for (int j = 0; j < kGrid; ++j) {
            const double phi = M_PI * j / kGrid;
            const double v = cat_overlap(psi, std::polar(r, phi), parity);
            if (v > best) {
                best = v;
                best_r = r;
                best_phi = phi;
            }
        }
    }

    // Coordinate refinement to 1e-6 in alpha.
    double dr = r_max / (kGrid - 1);
    double dphi = M_PI / kGrid;
    for (int round = 0; round < 4; ++round) {
        best_r = golden_max(
            [&](double r) { return cat_overlap(psi, std::polar(r, best_phi), parity); },
            std::max(0.0, best_r - dr), best_r + dr, 1e-7);
        best_phi = golden_max(
            [&](double phi) { return cat_overlap(psi, std::polar(best_r, phi), parity); },
            best_phi - dphi, best_phi + dphi, 1e-7);
        dr *= 0.25;
        dphi *= 0.25;
    }

    CatFit fit;
    fit.alpha = std::polar(best_r, best_phi);
    fit.parity = parity;
    fit.overlap = cat_overlap(psi, fit.alpha, parity);
    return fit;
}

ObservableSplit observable_split(const SpectrumReport& report, const CMatrix& op) {
    if (report.states.empty() || report.states[0].size() != op.rows())
        throw std::invalid_argument("observable_split: cutoff mismatch");
    ObservableSplit split;
    split.total = 0.0;
    for (size_t k = 0; k < report.states.size(); ++k)
        split.total += report.probabilities[k] * expectation(report.states[k], op);
    split.first = expectation(report.states[0], op);
    split.second = report.states.size() > 1 ? expectation(report.states[1], op)
                                            : Complex(0.0);
    const double op_norm = op.jacobiSvd().singularValues()(0);
    split.bound = std::abs(report.residual) * op_norm;
    return split;
}

namespace {

/// Shared factorization of D(beta) = phase * D(x) * D(iy): per grid point
/// only diagonal phase scalings and two matrix-vector products remain.
struct DisplacementFactors {
    Eigen::VectorXd lambda1, lambda2;
    CMatrix v1, v2;
    CMatrix cross;  // V2^dag V1

    explicit DisplacementFactors(int cutoff) {
        const CMatrix a = annihilation(cutoff);
        const CMatrix k1 = -I * (a.adjoint() - a);  // generator of D(x)
        const CMatrix k2 = a.adjoint() + a;         // generator of D(iy)
        Eigen::SelfAdjointEigenSolver<CMatrix> e1(k1), e2(k2);
        lambda1 = e1.eigenvalues();
        lambda2 = e2.eigenvalues();
        v1 = e1.eigenvectors();
        v2 = e2.eigenvectors();
        cross = v2.adjoint() * v1;
    }

    /// D(beta)^dag psi1 given psi1 = V1^dag psi, up to a global phase.
    CVector displace_back(const CVector& psi1, double x, double y) const {
        CVector t = psi1;
        for (int k = 0; k < t.size(); ++k) t(k) *= std::polar(1.0, -x * lambda1(k));
        CVector u = cross * t;
        for (int k = 0; k < u.size(); ++k) u(k) *= std::polar(1.0, -y * lambda2(k));
        return v2 * u;
    }
};

WignerGrid wigner_from_components(const std::vector<double>& weights,
                                  const std::vector<CVector>& states,
                                  const GridSpec& spec, int workers) {
    const int cutoff = static_cast<int>(states.at(0).size());
    const DisplacementFactors factors(cutoff);
    std::vector<CVector> rotated;  // V1^dag psi_k
    for (const auto& s : states) rotated.push_back(factors.v1.adjoint() * s);

    const int nre = spec.re_points();
    const int nim = spec.im_points();
    WignerGrid grid;
    grid.spec = spec;
    grid.values.resize(nre, nim);

    const double safe_r2 = 0.25 * cutoff;
    auto compute_column = [&](int j) {
        const double y = spec.im_min + j * spec.step;
        for (int i = 0; i < nre; ++i) {
            const double x = spec.re_min + i * spec.step;
            double w = 0.0;
            for (size_t k = 0; k < rotated.size(); ++k) {
                const CVector back = factors.displace_back(rotated[k], x, y);
                double parity_sum = 0.0;
                for (int m = 0; m < cutoff; ++m)
                    parity_sum += (m % 2 == 0 ? 1.0 : -1.0) * std::norm(back(m));
                w += weights[k] * parity_sum;
            }
            grid.values(i, j) = (2.0 / M_PI) * w;
            if (x * x + y * y > safe_r2) grid.truncation_flag = true;
        }
    };

    if (workers <= 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, nim);
    if (workers == 1) {
        for (int j = 0; j < nim; ++j) compute_column(j);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w]() {
                for (int j = w; j < nim; j += workers) compute_column(j);
            });
        for (auto& th : pool) th.join();
    }

    int imin = 0, jmin = 0;
    grid.min_value = grid.values.minCoeff(&imin, &jmin);
    grid.min_location = Complex(spec.re_min + imin * spec.step,
                                spec.im_min + jmin * spec.step);
    return grid;
}

}  // namespace

WignerGrid wigner_numeric(const CMatrix& rho, const GridSpec& spec, int workers) {
    const SpectrumReport report = spectral_decompose(rho);
    std::vector<double> weights;
    std::vector<CVector> states;
    for (size_t k = 0; k < report.states.size(); ++k) {
        if (report.probabilities[k] > 1e-12) {
            weights.push_back(report.probabilities[k]);
            states.push_back(report.states[k]);
        }
    }
    if (states.empty())
        throw std::invalid_argument("wigner_numeric: state has no weight");
    return wigner_from_components(weights, states, spec, workers);
}

WignerGrid wigner_numeric(const CVector& psi, const GridSpec& spec, int workers) {
    return wigner_from_components({1.0}, {psi}, spec, workers);
}

}  // namespace kerrcat
