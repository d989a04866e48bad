#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kerrcat/fock.hpp"
#include "kerrcat/lindblad.hpp"
#include "kerrcat/steady.hpp"

using namespace kerrcat;

namespace {

SystemParams fig2_params() {
    SystemParams p;
    p.kerr = 1.0;
    p.pump = 10.0;
    p.gamma = 0.1;
    p.eta = 1.0;
    return p;
}

CMatrix pure(const CVector& psi) { return psi * psi.adjoint(); }

CVector fock_ket(int n, int cutoff) {
    CVector v = CVector::Zero(cutoff);
    v(n) = 1.0;
    return v;
}

/// Deterministic pseudo-random density matrix (Hermitian, unit trace, psd).
CMatrix random_density(int n, uint64_t seed) {
    CMatrix m(n, n);
    uint64_t s = seed;
    auto next = [&s]() {
        s += 0x9E3779B97F4A7C15ull;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z ^= z >> 31;
        return static_cast<double>(z >> 11) * 0x1.0p-53 - 0.5;
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = Complex(next(), next());
    CMatrix rho = m * m.adjoint();
    return rho / rho.trace().real();
}

}  // namespace

TEST_CASE("model assembly drops zero-rate channels") {
    SystemParams p = fig2_params();
    const LindbladModel full = build_model(p, 20);
    CHECK(full.channels.size() == 2);  // one- and two-photon loss

    p.gamma = 0.0;
    CHECK(build_model(p, 20).channels.size() == 1);

    p.gamma_f = 0.3;
    const LindbladModel with_feedback = build_model(p, 20);
    CHECK(with_feedback.channels.size() == 2);
    CHECK(with_feedback.channels.back().kind == ChannelKind::Feedback);
}

TEST_CASE("feedback channel acts only on the suppressed parity sector") {
    const int n = 30;
    const JumpChannel fb = feedback_channel(Parity::Odd, 1.0, n);
    CHECK(fb.rate == 1.0);
    CHECK(fb.kind == ChannelKind::Feedback);

    // even states are annihilated, odd states lose a photon
    CHECK((fb.op * fock_ket(2, n)).norm() < 1e-14);
    CHECK((fb.op * fock_ket(1, n) - fock_ket(0, n)).norm() < 1e-14);
    CHECK((fb.op * cat_state(1.5, Parity::Even, n)).norm() < 1e-14);

    const CVector odd = cat_state(1.5, Parity::Odd, n);
    CVector lowered = fb.op * odd;
    CHECK(lowered.norm() > 0.5);  // the photon actually leaves
    lowered /= lowered.norm();
    // result is even: a flips the parity of the odd sector
    CHECK(expectation(lowered, parity_operator(n)).real() == doctest::Approx(1.0));

    // suppressing the even sector is the mirror image
    const JumpChannel fb_even = feedback_channel(Parity::Even, 1.0, n);
    CHECK((fb_even.op * fock_ket(1, n)).norm() < 1e-14);
    CHECK((fb_even.op * fock_ket(2, n) - std::sqrt(2.0) * fock_ket(1, n)).norm() < 1e-14);
}

TEST_CASE("vacuum is dark without a pump") {
    SystemParams p = fig2_params();
    p.pump = 0.0;
    const LindbladModel model = build_model(p, 15);
    const CMatrix d = liouvillian_apply(model, pure(fock_ket(0, 15)));
    CHECK(d.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("instantaneous decay rates of Fock states") {
    SystemParams p;
    p.kerr = 0.0;
    p.eta = 0.0;
    p.gamma = 0.37;
    const int n = 10;
    const CMatrix num = number_operator(n);

    // one-photon loss: d<n>/dt = -gamma <n>
    CMatrix d = liouvillian_apply(build_model(p, n), pure(fock_ket(3, n)));
    CHECK((d * num).trace().real() == doctest::Approx(-3.0 * p.gamma).epsilon(1e-12));

    // two-photon loss: d<n>/dt = -2 eta <ad^2 a^2>
    SystemParams q;
    q.kerr = 0.0;
    q.eta = 0.81;
    d = liouvillian_apply(build_model(q, n), pure(fock_ket(3, n)));
    // ad^2 a^2 |3> = 6 |3>
    CHECK((d * num).trace().real() == doctest::Approx(-2.0 * q.eta * 6.0).epsilon(1e-12));
}

TEST_CASE("sparse Liouvillian matches the direct superoperator") {
    const SystemParams p = fig2_params();
    SystemParams pf = p;
    pf.gamma_f = 0.4;
    pf.detuning = -0.2;
    pf.pump = Complex(6.0, -3.0);
    for (const SystemParams& params : {p, pf}) {
        const int n = 12;
        const LindbladModel model = build_model(params, n);
        const Eigen::SparseMatrix<Complex> liou = liouvillian_matrix(model);
        const CMatrix rho = random_density(n, 42);
        const CMatrix direct = liouvillian_apply(model, rho);
        const CVector vec_rho = Eigen::Map<const CVector>(rho.data(), n * n);
        const CVector via_matrix = liou * vec_rho;
        const CMatrix reshaped = Eigen::Map<const CMatrix>(via_matrix.data(), n, n);
        CHECK((reshaped - direct).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("null vector of the Liouvillian reproduces the analytic steady state") {
    const SystemParams p = fig2_params();
    const int n = 50;
    const CMatrix numeric = steady_state_null_vector(build_model(p, n));
    CHECK(std::abs(numeric.trace().real() - 1.0) < 1e-10);
    CHECK((numeric - numeric.adjoint()).cwiseAbs().maxCoeff() < 1e-10);

    const CMatrix analytic = steady_density_matrix(p, n).rho;
    CHECK((numeric - analytic).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fidelity(numeric, analytic) > 1.0 - 1e-10);

    // the residual of the analytic state under the generator itself
    CHECK(liouvillian_apply(build_model(p, n), analytic).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("feedback steady state favors the even sector") {
    SystemParams p = fig2_params();
    p.pump = 4.0;
    p.gamma_f = 2.0;
    const int n = 30;
    const CMatrix rho = steady_state_null_vector(build_model(p, n, Parity::Odd));
    CHECK(expectation(rho, parity_operator(n)).real() > 0.3);

    const CMatrix flipped = steady_state_null_vector(build_model(p, n, Parity::Even));
    CHECK(expectation(flipped, parity_operator(n)).real() < -0.3);
}

TEST_CASE("adaptive integration: exponential observable decays") {
    const int n = 25;
    std::vector<double> grid;
    for (int k = 0; k <= 20; ++k) grid.push_back(0.1 * k);

    // pure one-photon loss: <n>(t) = <n>(0) exp(-gamma t)
    SystemParams p;
    p.kerr = 0.0;
    p.eta = 0.0;
    p.gamma = 1.0;
    const CVector alpha = coherent_state(1.5, n);
    const EvolutionResult r =
        evolve(build_model(p, n), pure(alpha), grid, 1e-10, 1e-12);
    REQUIRE(r.states.size() == grid.size());
    const CMatrix num = number_operator(n);
    for (size_t k = 0; k < grid.size(); ++k) {
        const double expected = 2.25 * std::exp(-p.gamma * grid[k]);
        CHECK(expectation(r.states[k], num).real() ==
              doctest::Approx(expected).epsilon(1e-6));
        CHECK(std::abs(r.states[k].trace().real() - 1.0) < 1e-9);
    }
    CHECK(r.repair_magnitude < 1e-6);

    // pure two-photon loss from |2>: p_2(t) = exp(-2 eta t)
    SystemParams q;
    q.kerr = 0.0;
    q.eta = 1.0;
    const EvolutionResult r2 = evolve(build_model(q, n), pure(fock_ket(2, n)), grid, 1e-10, 1e-12);
    for (size_t k = 0; k < grid.size(); ++k)
        CHECK(r2.states[k](2, 2).real() ==
              doctest::Approx(std::exp(-2.0 * q.eta * grid[k])).epsilon(1e-6));
}

TEST_CASE("adaptive integration: trace and Hermiticity through the full model") {
    const int n = 30;
    SystemParams p = fig2_params();
    p.pump = 5.0;
    std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
    const EvolutionResult r = evolve(build_model(p, n), pure(fock_ket(0, n)), grid);
    CHECK(r.steps > 0);
    for (const CMatrix& rho : r.states) {
        CHECK(std::abs(rho.trace().real() - 1.0) < 1e-9);
        CHECK((rho - rho.adjoint()).cwiseAbs().maxCoeff() < 1e-9);
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho);
        CHECK(eig.eigenvalues().minCoeff() > -1e-7);
    }
    // it drifts toward the steady state
    const CMatrix ss = steady_density_matrix(p, n).rho;
    CHECK(fidelity(r.states.back(), ss) > fidelity(r.states.front(), ss));
}

TEST_CASE("matrix-exponential propagation agrees with adaptive stepping") {
    const int n = 16;
    SystemParams p = fig2_params();
    p.pump = 2.0;
    const LindbladModel model = build_model(p, n);
    std::vector<double> grid{0.0, 0.4, 0.8, 1.2, 1.6};
    const CMatrix rho0 = pure(coherent_state(1.0, n));
    const EvolutionResult a = evolve(model, rho0, grid, 1e-10, 1e-12);
    const EvolutionResult b = evolve_expm(model, rho0, grid);
    REQUIRE(a.states.size() == b.states.size());
    for (size_t k = 0; k < grid.size(); ++k)
        CHECK((a.states[k] - b.states[k]).cwiseAbs().maxCoeff() < 1e-7);

    std::vector<double> uneven{0.0, 0.3, 1.0};
    CHECK_THROWS_AS(evolve_expm(model, rho0, uneven), std::invalid_argument);
}

TEST_CASE("fidelity") {
    const int n = 25;
    const CMatrix rho = random_density(n, 7);
    CHECK(fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-10));

    CHECK(fidelity(pure(fock_ket(0, n)), pure(fock_ket(1, n))) < 1e-8);

    // pure coherent states: F = |<a|b>| = exp(-|a-b|^2 / 2)
    const Complex a(0.9, 0.0), b(0.2, 0.5);
    const double f = fidelity(pure(coherent_state(a, n)), pure(coherent_state(b, n)));
    CHECK(f == doctest::Approx(std::exp(-0.5 * std::norm(a - b))).epsilon(1e-8));

    // maximally mixed vs pure: F = 1/sqrt(n)
    const CMatrix mixed = CMatrix::Identity(n, n) / double(n);
    CHECK(fidelity(mixed, pure(fock_ket(3, n))) ==
          doctest::Approx(1.0 / std::sqrt(double(n))).epsilon(1e-10));

    // non-density inputs are rejected
    CMatrix bad = rho;
    bad(0, 1) += Complex(0.0, 1.0);  // not Hermitian
    CHECK_THROWS_AS(fidelity(bad, rho), std::invalid_argument);
}
