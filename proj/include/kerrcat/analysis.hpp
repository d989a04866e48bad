#pragma once

#include <vector>

#include "kerrcat/types.hpp"

namespace kerrcat {

/// Spectral decomposition rho = sum_k p_k |psi_k><psi_k| with descending
/// probabilities. Ties (|dp| < 1e-12) are broken by descending parity
/// expectation; each eigenvector's global phase makes its largest-magnitude
/// amplitude real positive.
struct SpectrumReport {
    std::vector<double> probabilities;
    std::vector<CVector> states;
    double residual = 0.0;  // 1 - p1 - p2
    std::vector<double> mean_n;
    std::vector<double> mean_parity;
};

SpectrumReport spectral_decompose(const CMatrix& rho);

struct CatFit {
    Complex alpha;
    Parity parity;
    double overlap;  // |<psi|C_alpha^pm>|
};

/// Fits the cat state maximizing overlap with a normalized pure state. The
/// parity sign follows the sign of <P>; the amplitude search is a coarse
/// 41x41 grid over |alpha| in [0, sqrt(2<n>)+2] and phase in [0, pi)
/// followed by coordinate bisection to 1e-6.
CatFit fit_cat(const CVector& psi);

struct ObservableSplit {
    Complex total;   // Tr[rho O]
    Complex first;   // <psi_1|O|psi_1>
    Complex second;  // <psi_2|O|psi_2>
    double bound;    // residual * ||O||
};

ObservableSplit observable_split(const SpectrumReport& report, const CMatrix& op);

struct GridSpec {
    double re_min = -5.0, re_max = 5.0;
    double im_min = -5.0, im_max = 5.0;
    double step = 0.05;

    int re_points() const { return static_cast<int>(std::round((re_max - re_min) / step)) + 1; }
    int im_points() const { return static_cast<int>(std::round((im_max - im_min) / step)) + 1; }
};

struct WignerGrid {
    GridSpec spec;
    RMatrix values;  // values(i, j) = W(re_i + i im_j)
    double min_value = 0.0;
    Complex min_location;
    bool truncation_flag = false;  // some point left the safe |beta|^2 <= N/4 region

    double integral() const {
        return values.sum() * spec.step * spec.step;
    }
};

/// Displaced-parity Wigner function W(beta) = (2/pi) Tr[rho D(beta) P D(beta)^dag],
/// evaluated pointwise on the grid; grid rows run in parallel over `workers`
/// threads (0 = hardware default).
WignerGrid wigner_numeric(const CMatrix& rho, const GridSpec& spec, int workers = 0);
WignerGrid wigner_numeric(const CVector& psi, const GridSpec& spec, int workers = 0);

}  // namespace kerrcat
