#include "kerrcat/lindblad.hpp"

#include <cmath>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>

#include "kerrcat/fock.hpp"

namespace kerrcat {

const char* channel_label(ChannelKind kind) {
    switch (kind) {
        case ChannelKind::OnePhoton: return "one-photon";
        case ChannelKind::TwoPhoton: return "two-photon";
        case ChannelKind::Feedback: return "feedback";
    }
    return "unknown";
}

JumpChannel feedback_channel(Parity suppress, double rate, int cutoff) {
    if (rate < 0.0) throw std::invalid_argument("feedback rate must be >= 0");
    const CMatrix a = annihilation(cutoff);
    const CMatrix p = parity_operator(cutoff);
    const CMatrix id = CMatrix::Identity(cutoff, cutoff);
    // Projector onto the suppressed sector acts before the photon loss.
    const CMatrix projector =
        (suppress == Parity::Odd) ? CMatrix(0.5 * (id - p)) : CMatrix(0.5 * (id + p));
    return JumpChannel{a * projector, rate, ChannelKind::Feedback};
}

LindbladModel build_model(const SystemParams& params, int cutoff, Parity suppress) {
    params.validate();
    LindbladModel model;
    model.cutoff = cutoff;
    model.h = hamiltonian(params, cutoff);
    const CMatrix a = annihilation(cutoff);
    if (params.gamma > 0.0)
        model.channels.push_back({a, params.gamma, ChannelKind::OnePhoton});
    if (params.eta > 0.0)
        model.channels.push_back({a * a, params.eta, ChannelKind::TwoPhoton});
    if (params.gamma_f > 0.0)
        model.channels.push_back(feedback_channel(suppress, params.gamma_f, cutoff));
    return model;
}

CMatrix liouvillian_apply(const LindbladModel& model, const CMatrix& rho) {
    if (rho.rows() != model.cutoff || rho.cols() != model.cutoff)
        throw std::invalid_argument("liouvillian_apply: cutoff mismatch");
    CMatrix drho = I * (rho * model.h - model.h * rho);
    for (const auto& ch : model.channels) {
        const CMatrix ldl = ch.op.adjoint() * ch.op;
        drho += 0.5 * ch.rate *
                (2.0 * ch.op * rho * ch.op.adjoint() - ldl * rho - rho * ldl);
    }
    return drho;
}

CMatrix liouvillian_apply(const SystemParams& params, const CMatrix& rho) {
    return liouvillian_apply(build_model(params, static_cast<int>(rho.rows())), rho);
}

namespace {

using Triplet = Eigen::Triplet<Complex>;

/// Appends coeff * (X kron Y) acting on column-major vec(rho).
void add_kron(std::vector<Triplet>& out, Complex coeff, const CMatrix& x,
              const CMatrix& y) {
    const int n = static_cast<int>(y.rows());
    for (int j1 = 0; j1 < x.cols(); ++j1)
        for (int i1 = 0; i1 < x.rows(); ++i1) {
            const Complex xv = coeff * x(i1, j1);
            if (xv == Complex(0.0)) continue;
            for (int j2 = 0; j2 < n; ++j2)
                for (int i2 = 0; i2 < n; ++i2) {
                    const Complex yv = y(i2, j2);
                    if (yv == Complex(0.0)) continue;
                    out.emplace_back(i1 * n + i2, j1 * n + j2, xv * yv);
                }
        }
}

std::vector<Triplet> liouvillian_triplets(const LindbladModel& model) {
    const int n = model.cutoff;
    const CMatrix id = CMatrix::Identity(n, n);
    std::vector<Triplet> triplets;
    // i rho H -> i (H^T kron I);  -i H rho -> -i (I kron H)
    add_kron(triplets, I, model.h.transpose(), id);
    add_kron(triplets, -I, id, model.h);
    for (const auto& ch : model.channels) {
        const CMatrix ldl = ch.op.adjoint() * ch.op;
        add_kron(triplets, ch.rate, ch.op.conjugate(), ch.op);
        add_kron(triplets, -0.5 * ch.rate, id, ldl);
        add_kron(triplets, -0.5 * ch.rate, ldl.transpose(), id);
    }
    return triplets;
}

}  // namespace

Eigen::SparseMatrix<Complex> liouvillian_matrix(const LindbladModel& model) {
    const int dim = model.cutoff * model.cutoff;
    auto triplets = liouvillian_triplets(model);
    Eigen::SparseMatrix<Complex> l(dim, dim);
    l.setFromTriplets(triplets.begin(), triplets.end());
    return l;
}

CMatrix steady_state_null_vector(const LindbladModel& model) {
    const int n = model.cutoff;
    const int dim = n * n;
    // Replace the row for element (0,0) by the trace constraint: the steady
    // state satisfies the remaining equations plus Tr rho = 1.
    auto triplets = liouvillian_triplets(model);
    std::erase_if(triplets, [](const Triplet& t) { return t.row() == 0; });
    for (int k = 0; k < n; ++k) triplets.emplace_back(0, k * n + k, Complex(1.0));
    Eigen::SparseMatrix<Complex> sys(dim, dim);
    sys.setFromTriplets(triplets.begin(), triplets.end());
    sys.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
    lu.compute(sys);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("steady_state_null_vector: sparse LU failed");
    CVector rhs = CVector::Zero(dim);
    rhs(0) = 1.0;
    CVector sol = lu.solve(rhs);

    CMatrix rho = Eigen::Map<CMatrix>(sol.data(), n, n);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();
    return rho;
}

namespace {

struct CachedChannel {
    CMatrix op;
    CMatrix op_dag;
    CMatrix ldl;
    double rate;
};

class Rhs {
  public:
    explicit Rhs(const LindbladModel& model) : h_(model.h) {
        for (const auto& ch : model.channels)
            channels_.push_back({ch.op, ch.op.adjoint(), ch.op.adjoint() * ch.op, ch.rate});
    }

    CMatrix operator()(const CMatrix& rho) const {
        CMatrix drho = I * (rho * h_ - h_ * rho);
        for (const auto& ch : channels_)
            drho += 0.5 * ch.rate *
                    (2.0 * ch.op * rho * ch.op_dag - ch.ldl * rho - rho * ch.ldl);
        return drho;
    }

  private:
    CMatrix h_;
    std::vector<CachedChannel> channels_;
};

double error_norm(const CMatrix& err, const CMatrix& y0, const CMatrix& y1,
                  double rtol, double atol) {
    double acc = 0.0;
    for (int j = 0; j < err.cols(); ++j)
        for (int i = 0; i < err.rows(); ++i) {
            const double scale =
                atol + rtol * std::max(std::abs(y0(i, j)), std::abs(y1(i, j)));
            const double e = std::abs(err(i, j)) / scale;
            acc += e * e;
        }
    return std::sqrt(acc / (err.rows() * err.cols()));
}

/// Hermitize and trace-renormalize, returning the Frobenius norm of the
/// applied correction.
double repair(CMatrix& rho) {
    const CMatrix herm = 0.5 * (rho + rho.adjoint());
    double correction = (rho - herm).norm();
    rho = herm;
    const double tr = rho.trace().real();
    correction += std::abs(tr - 1.0) * std::sqrt(static_cast<double>(rho.rows()));
    rho /= tr;
    return correction;
}

constexpr double kMaxRepair = 1e-6;

}  // namespace

EvolutionResult evolve(const LindbladModel& model, const CMatrix& rho0,
                       const std::vector<double>& t_grid, double rtol, double atol) {
    if (t_grid.empty()) throw std::invalid_argument("evolve: empty time grid");
    for (size_t i = 0; i < t_grid.size(); ++i) {
        if (t_grid[i] < 0.0 || (i > 0 && t_grid[i] <= t_grid[i - 1]))
            throw std::invalid_argument("evolve: time grid must increase from 0");
    }
    const Rhs rhs(model);
    EvolutionResult result;

    // Dormand-Prince 5(4) coefficients.
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695,
                        e4 = b4 - 393.0 / 640, e5 = b5 + 92097.0 / 339200,
                        e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;

    CMatrix y = rho0;
    double t = 0.0;
    const double t_end = t_grid.back();
    double h = std::min(1e-3, (t_end > 0.0 ? t_end : 1.0) * 1e-3);
    CMatrix k1 = rhs(y);

    size_t next_out = 0;
    if (t_grid[next_out] == 0.0) {
        result.times.push_back(0.0);
        result.states.push_back(y);
        ++next_out;
    }

    while (next_out < t_grid.size()) {
        const double t_target = t_grid[next_out];
        bool landing = false;
        double h_try = h;
        if (t + h_try >= t_target) {
            h_try = t_target - t;
            landing = true;
        }
        if (h_try < 1e-14 * std::max(1.0, t_end))
            throw std::runtime_error(
                "evolve: step size underflow (stiff problem); reduce the cutoff "
                "or relax the tolerances");

        const CMatrix k2 = rhs(y + h_try * (a21 * k1));
        const CMatrix k3 = rhs(y + h_try * (a31 * k1 + a32 * k2));
        const CMatrix k4 = rhs(y + h_try * (a41 * k1 + a42 * k2 + a43 * k3));
        const CMatrix k5 =
            rhs(y + h_try * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const CMatrix k6 = rhs(
            y + h_try * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        CMatrix y_new =
            y + h_try * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const CMatrix k7 = rhs(y_new);
        const CMatrix err =
            h_try * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const double norm = error_norm(err, y, y_new, rtol, atol);
        if (norm <= 1.0) {
            t += h_try;
            result.repair_magnitude += repair(y_new);
            if (result.repair_magnitude > kMaxRepair)
                throw std::runtime_error(
                    "evolve: cumulative Hermiticity/trace repairs exceeded 1e-6");
            y = std::move(y_new);
            k1 = rhs(y);  // repair invalidates the FSAL stage
            ++result.steps;
            if (landing) {
                result.times.push_back(t_target);
                result.states.push_back(y);
                ++next_out;
            }
        } else {
            ++result.rejected;
        }
        const double factor = (norm > 0.0) ? 0.9 * std::pow(norm, -0.2) : 5.0;
        // A shortened landing step must not shrink the controller's step.
        const double h_next = h_try * std::clamp(factor, 0.2, 5.0);
        h = (landing && norm <= 1.0) ? std::max(h, h_next) : h_next;
    }
    return result;
}

EvolutionResult evolve_expm(const LindbladModel& model, const CMatrix& rho0,
                            const std::vector<double>& t_grid) {
    if (t_grid.empty()) throw std::invalid_argument("evolve_expm: empty time grid");
    const int n = model.cutoff;
    const int dim = n * n;

    // Single uniform spacing, with an optional distinct first gap from t = 0.
    double dt = 0.0;
    for (size_t i = 1; i < t_grid.size(); ++i) {
        const double gap = t_grid[i] - t_grid[i - 1];
        if (gap <= 0.0) throw std::invalid_argument("evolve_expm: grid must increase");
        if (dt == 0.0)
            dt = gap;
        else if (std::abs(gap - dt) > 1e-9 * dt)
            throw std::invalid_argument("evolve_expm: grid must be uniform");
    }

    const CMatrix l = CMatrix(liouvillian_matrix(model));
    CMatrix prop;
    if (dt > 0.0) prop = (l * dt).exp();

    EvolutionResult result;
    CVector v = Eigen::Map<const CVector>(rho0.data(), dim);
    if (t_grid.front() > 0.0) v = (l * t_grid.front()).exp() * v;

    for (size_t i = 0; i < t_grid.size(); ++i) {
        if (i > 0) v = prop * v;
        CMatrix rho = Eigen::Map<CMatrix>(v.data(), n, n);
        result.repair_magnitude += repair(rho);
        result.times.push_back(t_grid[i]);
        result.states.push_back(std::move(rho));
        ++result.steps;
    }
    return result;
}

double fidelity(const CMatrix& rho_a, const CMatrix& rho_b) {
    if (rho_a.rows() != rho_b.rows())
        throw std::invalid_argument("fidelity: cutoff mismatch");
    auto check_state = [](const CMatrix& rho) {
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
            throw std::invalid_argument("fidelity: input is not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho);
        if (eig.eigenvalues().minCoeff() < -1e-8)
            throw std::invalid_argument("fidelity: input is not positive semidefinite");
        return eig;
    };
    check_state(rho_b);
    const auto eig_a = check_state(rho_a);
    CVector roots(eig_a.eigenvalues().size());
    for (int i = 0; i < roots.size(); ++i)
        roots(i) = std::sqrt(std::max(0.0, eig_a.eigenvalues()(i)));
    const CMatrix sqrt_a =
        eig_a.eigenvectors() * roots.asDiagonal() * eig_a.eigenvectors().adjoint();
    CMatrix m = sqrt_a * rho_b * sqrt_a;
    m = 0.5 * (m + m.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(m);
    double f = 0.0;
    for (int i = 0; i < eig.eigenvalues().size(); ++i)
        f += std::sqrt(std::max(0.0, eig.eigenvalues()(i)));
    return std::clamp(f, 0.0, 1.0);
}

}  // namespace kerrcat
