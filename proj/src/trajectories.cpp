#include "kerrcat/trajectories.hpp"

#include <cmath>
#include <mutex>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

#include "kerrcat/fock.hpp"

namespace kerrcat {

uint64_t derive_seed(uint64_t master_seed, uint64_t index) {
    Rng g(master_seed ^ (0xD1B54A32D192ED03ull * (index + 1)));
    return g.next();
}

EffectiveHamiltonian effective_hamiltonian(const SystemParams& params, int cutoff,
                                           Parity suppress) {
    params.validate();
    EffectiveHamiltonian eff;
    eff.gamma = params.gamma;
    eff.eta = params.eta;
    eff.gamma_f = params.gamma_f;
    eff.matrix = hamiltonian(params, cutoff);
    const CMatrix a = annihilation(cutoff);
    const CMatrix a2 = a * a;
    eff.matrix -= 0.5 * I * params.gamma * (a.adjoint() * a);
    eff.matrix -= 0.5 * I * params.eta * (a2.adjoint() * a2);
    if (params.gamma_f > 0.0) {
        const CMatrix af = feedback_channel(suppress, params.gamma_f, cutoff).op;
        eff.matrix -= 0.5 * I * params.gamma_f * (af.adjoint() * af);
    }
    return eff;
}

TrajectorySimulator::TrajectorySimulator(const SystemParams& params, int cutoff,
                                         double dt, Parity suppress)
    : cutoff_(cutoff), dt_(dt) {
    if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
    const EffectiveHamiltonian eff = effective_hamiltonian(params, cutoff, suppress);
    propagator = (-I * dt * eff.matrix).exp();
    const CMatrix a = annihilation(cutoff);
    if (params.gamma > 0.0)
        channels_.push_back({a, params.gamma, ChannelKind::OnePhoton});
    if (params.eta > 0.0)
        channels_.push_back({a * a, params.eta, ChannelKind::TwoPhoton});
    if (params.gamma_f > 0.0)
        channels_.push_back({feedback_channel(suppress, params.gamma_f, cutoff).op,
                             params.gamma_f, ChannelKind::Feedback});
}

std::optional<ChannelKind> TrajectorySimulator::step(CVector& psi, Rng& rng) const {
    // Jump weights dt * rate * <psi|L^dag L|psi> = dt * rate * |L psi|^2.
    std::vector<CVector> jumped(channels_.size());
    std::vector<double> weight(channels_.size());
    double p_tot = 0.0;
    for (size_t k = 0; k < channels_.size(); ++k) {
        jumped[k] = channels_[k].op * psi;
        weight[k] = dt_ * channels_[k].rate * jumped[k].squaredNorm();
        p_tot += weight[k];
    }
    if (p_tot > 0.1)
        throw std::runtime_error(
            "trajectory step: total jump probability " + std::to_string(p_tot) +
            " exceeds 0.1; use dt <= " + std::to_string(dt_ * 0.1 / p_tot));

    // One draw partitions the channels, an independent draw gates the jump.
    const double u_channel = rng.uniform();
    const double u_gate = rng.uniform();
    if (u_gate < p_tot) {
        double edge = 0.0;
        size_t pick = channels_.size() - 1;
        for (size_t k = 0; k < channels_.size(); ++k) {
            edge += weight[k] / p_tot;
            if (u_channel < edge) {
                pick = k;
                break;
            }
        }
        psi = jumped[pick] / jumped[pick].norm();
        return channels_[pick].kind;
    }
    psi = propagator * psi;
    psi /= psi.norm();
    return std::nullopt;
}

TrajectoryRecord run_trajectory(const SystemParams& params, const CVector& psi0,
                                double horizon, double dt, uint64_t seed,
                                int record_every, bool keep_snapshots,
                                Parity suppress) {
    if (horizon <= 0.0) throw std::invalid_argument("horizon must be > 0");
    if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
    const int cutoff = static_cast<int>(psi0.size());
    const TrajectorySimulator sim(params, cutoff, dt, suppress);
    Rng rng(seed);

    const CVector number_diag = number_operator(cutoff).diagonal();
    const CVector parity_diag = parity_operator(cutoff).diagonal();

    TrajectoryRecord record;
    record.seed = seed;
    CVector psi = psi0 / psi0.norm();

    auto observe = [&](double t) {
        double n = 0.0, p = 0.0;
        for (int k = 0; k < cutoff; ++k) {
            const double pop = std::norm(psi(k));
            n += pop * number_diag(k).real();
            p += pop * parity_diag(k).real();
        }
        record.times.push_back(t);
        record.mean_n.push_back(n);
        record.mean_parity.push_back(p);
        if (keep_snapshots) record.snapshots.push_back(psi);
    };

    observe(0.0);
    const long total_steps = static_cast<long>(std::ceil(horizon / dt));
    for (long s = 1; s <= total_steps; ++s) {
        const auto jump = sim.step(psi, rng);
        const double t = s * dt;
        if (jump) record.jumps.push_back({t, *jump});
        if (s % record_every == 0 || s == total_steps) observe(t);
    }
    return record;
}

EnsembleSummary ensemble(const SystemParams& params, const CVector& psi0,
                         double horizon, double dt, int count,
                         uint64_t master_seed, int record_every, int workers,
                         Parity suppress) {
    if (count < 1) throw std::invalid_argument("ensemble: count must be >= 1");
    if (workers <= 0)
        workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);

    std::vector<TrajectoryRecord> records(count);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&](int begin, int end) {
        try {
            for (int i = begin; i < end; ++i)
                records[i] = run_trajectory(params, psi0, horizon, dt,
                                            derive_seed(master_seed, i),
                                            record_every, false, suppress);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0, count);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (count + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(count, begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    EnsembleSummary summary;
    summary.count = count;
    summary.times = records[0].times;
    const size_t nt = summary.times.size();
    summary.mean_n.assign(nt, 0.0);
    summary.se_n.assign(nt, 0.0);
    summary.mean_parity.assign(nt, 0.0);
    summary.se_parity.assign(nt, 0.0);

    for (size_t t = 0; t < nt; ++t) {
        double sn = 0.0, sn2 = 0.0, sp = 0.0, sp2 = 0.0;
        for (const auto& rec : records) {
            sn += rec.mean_n[t];
            sn2 += rec.mean_n[t] * rec.mean_n[t];
            sp += rec.mean_parity[t];
            sp2 += rec.mean_parity[t] * rec.mean_parity[t];
        }
        const double mn = sn / count;
        const double mp = sp / count;
        summary.mean_n[t] = mn;
        summary.mean_parity[t] = mp;
        if (count > 1) {
            const double var_n = std::max(0.0, (sn2 - count * mn * mn) / (count - 1));
            const double var_p = std::max(0.0, (sp2 - count * mp * mp) / (count - 1));
            summary.se_n[t] = std::sqrt(var_n / count);
            summary.se_parity[t] = std::sqrt(var_p / count);
        }
    }
    return summary;
}

}  // namespace kerrcat
