#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace kerrcat {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;

constexpr Complex I{0.0, 1.0};

/// Physical parameters in the frame rotating at the pump frequency.
/// Convention: hbar = 1, so energies and rates share units; the natural
/// unit is the two-photon loss rate eta.
struct SystemParams {
    double detuning = 0.0;  // pump-cavity detuning Delta
    double kerr = 1.0;      // photon-photon interaction U
    Complex pump = 0.0;     // two-photon pump amplitude G
    double gamma = 0.0;     // one-photon loss rate
    double eta = 1.0;       // two-photon loss rate
    double gamma_f = 0.0;   // parity-selective feedback loss rate

    void validate() const {
        if (gamma < 0.0 || eta < 0.0 || gamma_f < 0.0)
            throw std::invalid_argument("rates gamma, eta, gamma_f must be >= 0");
    }
};

enum class Parity { Even, Odd };

inline int parity_sign(Parity p) { return p == Parity::Even ? +1 : -1; }

/// Thrown when a requested computation needs a larger Fock cutoff.
class CutoffError : public std::runtime_error {
  public:
    CutoffError(const std::string& what, int required)
        : std::runtime_error(what), required_cutoff_(required) {}
    int required_cutoff() const { return required_cutoff_; }

  private:
    int required_cutoff_;
};

}  // namespace kerrcat
