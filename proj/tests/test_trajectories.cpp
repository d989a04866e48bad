#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kerrcat/fock.hpp"
#include "kerrcat/trajectories.hpp"

using namespace kerrcat;

namespace {

CVector fock_ket(int n, int cutoff) {
    CVector v = CVector::Zero(cutoff);
    v(n) = 1.0;
    return v;
}

}  // namespace

TEST_CASE("rng draws lie in [0, 1) and streams are reproducible") {
    Rng r1(12345), r2(12345), r3(54321);
    bool identical = true, all_distinct = true;
    for (int k = 0; k < 1000; ++k) {
        const double u = r1.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        identical = identical && (u == r2.uniform());
        all_distinct = all_distinct && (u != r3.uniform());
    }
    CHECK(identical);
    CHECK(all_distinct);
}

TEST_CASE("derived seeds are distinct and order-independent") {
    const uint64_t master = 99;
    std::vector<uint64_t> seeds;
    for (uint64_t i = 0; i < 64; ++i) seeds.push_back(derive_seed(master, i));
    for (size_t i = 0; i < seeds.size(); ++i)
        for (size_t j = i + 1; j < seeds.size(); ++j) CHECK(seeds[i] != seeds[j]);
    CHECK(derive_seed(master, 5) == seeds[5]);
    CHECK(derive_seed(master + 1, 0) != seeds[0]);
}

TEST_CASE("effective Hamiltonian assembles the anti-Hermitian loss terms") {
    const int n = 12;
    SystemParams p;
    p.kerr = 0.0;
    p.gamma = 0.8;
    p.eta = 0.5;
    const EffectiveHamiltonian he = effective_hamiltonian(p, n);
    // diagonal: -i (gamma/2) k - i (eta/2) k(k-1)
    for (int k = 0; k < n; ++k) {
        CHECK(he.matrix(k, k).real() == doctest::Approx(0.0));
        CHECK(he.matrix(k, k).imag() ==
              doctest::Approx(-0.5 * p.gamma * k - 0.5 * p.eta * k * (k - 1.0)));
    }

    // the feedback term only damps the suppressed parity sector
    SystemParams pf;
    pf.kerr = 0.0;
    pf.eta = 0.0;
    pf.gamma_f = 1.0;
    const EffectiveHamiltonian hf = effective_hamiltonian(pf, n, Parity::Odd);
    for (int k = 0; k < n; ++k)
        CHECK(hf.matrix(k, k).imag() == doctest::Approx(k % 2 == 1 ? -0.5 * k : 0.0));
}

TEST_CASE("closed system: no jumps and unitary norm") {
    SystemParams p;
    p.kerr = 2.0;
    p.detuning = 0.3;
    p.eta = 0.0;
    const int n = 20;
    TrajectorySimulator sim(p, n, 1e-3);
    Rng rng(7);
    CVector psi = coherent_state(1.0, n);
    for (int k = 0; k < 2000; ++k) {
        const auto jumped = sim.step(psi, rng);
        CHECK_FALSE(jumped.has_value());
    }
    CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-10));
    // the Hamiltonian is diagonal here, so populations are conserved
    const CVector start = coherent_state(1.0, n);
    for (int k = 0; k < n; ++k)
        CHECK(std::abs(psi(k)) == doctest::Approx(std::abs(start(k))).epsilon(1e-8));
}

TEST_CASE("one-photon jumps flip parity; the record shows the ping-pong") {
    SystemParams p;
    p.kerr = 0.0;
    p.eta = 0.0;
    p.gamma = 1.0;
    const int n = 8;
    const TrajectoryRecord rec =
        run_trajectory(p, fock_ket(3, n), 12.0, 1e-3, /*seed=*/2024);

    CHECK(rec.jumps.size() <= 3);  // only three photons to lose
    for (double par : rec.mean_parity) CHECK(std::abs(std::abs(par) - 1.0) < 1e-9);

    // parity alternates exactly at the recorded jump times
    size_t next_jump = 0;
    double current = -1.0;  // |3> is odd
    for (size_t k = 0; k < rec.times.size(); ++k) {
        while (next_jump < rec.jumps.size() && rec.jumps[next_jump].time <= rec.times[k]) {
            CHECK(rec.jumps[next_jump].channel == ChannelKind::OnePhoton);
            current = -current;
            ++next_jump;
        }
        CHECK(rec.mean_parity[k] == doctest::Approx(current).epsilon(1e-9));
    }

    // after losing all photons the state is vacuum
    if (rec.jumps.size() == 3) CHECK(rec.mean_n.back() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("two-photon jumps preserve parity") {
    SystemParams p;
    p.kerr = 0.0;
    p.eta = 1.0;
    const int n = 8;
    const TrajectoryRecord rec = run_trajectory(p, fock_ket(4, n), 10.0, 1e-3, 31);
    CHECK(rec.jumps.size() <= 2);
    for (const JumpEvent& j : rec.jumps) CHECK(j.channel == ChannelKind::TwoPhoton);
    for (double par : rec.mean_parity) CHECK(par == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("trajectories are deterministic given the seed") {
    SystemParams p;
    p.kerr = 1.0;
    p.pump = 4.0;
    p.gamma = 0.2;
    p.eta = 1.0;
    const int n = 25;
    const CVector psi0 = fock_ket(0, n);
    const TrajectoryRecord a = run_trajectory(p, psi0, 2.0, 1e-3, 777, 10);
    const TrajectoryRecord b = run_trajectory(p, psi0, 2.0, 1e-3, 777, 10);
    REQUIRE(a.times.size() == b.times.size());
    REQUIRE(a.jumps.size() == b.jumps.size());
    for (size_t k = 0; k < a.times.size(); ++k) {
        CHECK(a.mean_n[k] == b.mean_n[k]);  // bitwise
        CHECK(a.mean_parity[k] == b.mean_parity[k]);
    }
    for (size_t k = 0; k < a.jumps.size(); ++k) {
        CHECK(a.jumps[k].time == b.jumps[k].time);
        CHECK(a.jumps[k].channel == b.jumps[k].channel);
    }
    const TrajectoryRecord c = run_trajectory(p, psi0, 2.0, 1e-3, 778, 10);
    bool same = a.jumps.size() == c.jumps.size();
    if (same)
        for (size_t k = 0; k < a.jumps.size(); ++k)
            same = same && a.jumps[k].time == c.jumps[k].time;
    CHECK_FALSE(same);
}

TEST_CASE("oversized step is rejected with a usable message") {
    SystemParams p;
    p.kerr = 0.0;
    p.eta = 0.0;
    p.gamma = 10.0;
    const int n = 30;
    TrajectorySimulator sim(p, n, 0.05);  // p_jump ~ 10 * 25 * 0.05 >> 0.1
    Rng rng(1);
    CVector psi = fock_ket(25, n);
    CHECK_THROWS_AS(sim.step(psi, rng), std::runtime_error);
}

TEST_CASE("mean jump count matches the initial photon number") {
    // pure one-photon decay run to completion emits <n>(0) photons on average
    SystemParams p;
    p.kerr = 0.0;
    p.eta = 0.0;
    p.gamma = 1.0;
    const int n = 15;
    const CVector psi0 = coherent_state(1.2, n);  // <n> = 1.44
    double total = 0.0;
    const int count = 200;
    for (int i = 0; i < count; ++i)
        total += run_trajectory(p, psi0, 12.0, 1e-3, derive_seed(5150, i), 100).jumps.size();
    const double mean = total / count;
    CHECK(mean == doctest::Approx(1.44).epsilon(0.20));
}

TEST_CASE("ensemble of one reduces to the single trajectory") {
    SystemParams p;
    p.kerr = 1.0;
    p.pump = 3.0;
    p.gamma = 0.1;
    p.eta = 1.0;
    const int n = 20;
    const CVector psi0 = fock_ket(0, n);
    const EnsembleSummary s = ensemble(p, psi0, 1.0, 1e-3, 1, 909, 10, 1);
    const TrajectoryRecord r = run_trajectory(p, psi0, 1.0, 1e-3, derive_seed(909, 0), 10);
    REQUIRE(s.times.size() == r.times.size());
    CHECK(s.count == 1);
    for (size_t k = 0; k < s.times.size(); ++k) {
        CHECK(s.mean_n[k] == r.mean_n[k]);
        CHECK(s.se_n[k] == 0.0);
    }
}

TEST_CASE("ensemble reduction is independent of the worker count") {
    SystemParams p;
    p.kerr = 1.0;
    p.pump = 3.0;
    p.gamma = 0.1;
    p.eta = 1.0;
    const CVector psi0 = fock_ket(0, 20);
    const EnsembleSummary s1 = ensemble(p, psi0, 0.5, 1e-3, 8, 11, 25, 1);
    const EnsembleSummary s3 = ensemble(p, psi0, 0.5, 1e-3, 8, 11, 25, 3);
    REQUIRE(s1.times.size() == s3.times.size());
    for (size_t k = 0; k < s1.times.size(); ++k) {
        CHECK(s1.mean_n[k] == s3.mean_n[k]);  // bitwise
        CHECK(s1.se_parity[k] == s3.se_parity[k]);
    }
}

TEST_CASE("ensemble mean tracks the analytic decay within its own error bars") {
    SystemParams p;
    p.kerr = 0.0;
    p.eta = 0.0;
    p.gamma = 1.0;
    const int n = 15;
    const CVector psi0 = coherent_state(1.2, n);
    const EnsembleSummary s = ensemble(p, psi0, 2.0, 1e-3, 100, 4242, 200, 1);
    int checked = 0;
    for (size_t k = 0; k < s.times.size(); ++k) {
        if (s.times[k] < 0.2) continue;  // early times have near-zero spread
        const double expected = 1.44 * std::exp(-s.times[k]);
        // the fixed-step jump scheme carries an O(dt) bias on top of the
        // statistical spread; allow for both
        const double bias = 2.0 * 1e-3 * 1.44;
        CHECK(std::abs(s.mean_n[k] - expected) <= 3.0 * s.se_n[k] + bias);
        ++checked;
    }
    CHECK(checked > 5);
}
