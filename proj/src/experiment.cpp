#include "kerrcat/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "kerrcat/fock.hpp"
#include "kerrcat/lindblad.hpp"
#include "kerrcat/steady.hpp"
#include "kerrcat/trajectories.hpp"

namespace kerrcat {

using nlohmann::json;

std::vector<double> TimeGrid::times() const {
    if (stop <= 0.0) throw ConfigError("time.stop must be > 0");
    if (points < 2) throw ConfigError("time.points must be >= 2");
    std::vector<double> t(points);
    for (int k = 0; k < points; ++k) t[k] = stop * k / (points - 1);
    return t;
}

GridSpec WignerWindow::grid() const {
    if (step <= 0.0) throw ConfigError("wigner.step must be > 0");
    if (re_max < re_min || im_max < im_min)
        throw ConfigError("wigner window bounds are inverted");
    GridSpec spec;
    spec.re_min = re_min;
    spec.re_max = re_max;
    spec.im_min = im_min;
    spec.im_max = im_max;
    spec.step = step;
    return spec;
}

namespace {

void reject_unknown(const json& obj, const char* where,
                    std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known)
            throw ConfigError(std::string("unknown key \"") + key + "\" in " + where);
    }
}

double require_number(const json& obj, const char* where, const char* key,
                      double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number())
        throw ConfigError(std::string(where) + "." + key + " must be a number");
    return obj[key].get<double>();
}

SystemParams parse_params(const json& obj) {
    reject_unknown(obj, "params", {"detuning", "kerr", "pump", "gamma", "eta", "gamma_f"});
    SystemParams p;
    p.detuning = require_number(obj, "params", "detuning", p.detuning);
    p.kerr = require_number(obj, "params", "kerr", p.kerr);
    p.gamma = require_number(obj, "params", "gamma", p.gamma);
    p.eta = require_number(obj, "params", "eta", p.eta);
    p.gamma_f = require_number(obj, "params", "gamma_f", p.gamma_f);
    if (obj.contains("pump")) {
        const json& g = obj["pump"];
        if (g.is_number())
            p.pump = g.get<double>();
        else if (g.is_array() && g.size() == 2 && g[0].is_number() && g[1].is_number())
            p.pump = Complex(g[0].get<double>(), g[1].get<double>());
        else
            throw ConfigError("params.pump must be a number or [re, im]");
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("params: ") + e.what());
    }
    return p;
}

std::vector<double> parse_number_list(const json& arr, const std::string& where) {
    if (!arr.is_array() || arr.empty())
        throw ConfigError(where + " must be a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& v : arr) {
        if (!v.is_number()) throw ConfigError(where + " must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

constexpr const char* kScenarios[] = {"steady",   "evolve", "trajectory", "ensemble",
                                      "feedback", "wigner", "sweep"};

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be an object");
    reject_unknown(root, "config",
                   {"name", "scenario", "params", "cutoff", "initial_state",
                    "initial_states", "time", "integrator", "trajectories", "seed",
                    "dt", "record_every", "tolerances", "feedback_rates", "wigner",
                    "sweep", "workers"});

    ExperimentConfig cfg;
    if (!root.contains("scenario") || !root["scenario"].is_string())
        throw ConfigError("scenario is required and must be a string");
    cfg.scenario = root["scenario"].get<std::string>();
    bool known = false;
    for (const char* s : kScenarios) known = known || cfg.scenario == s;
    if (!known) throw ConfigError("unknown scenario \"" + cfg.scenario + "\"");

    cfg.name = root.value("name", cfg.scenario);
    if (cfg.name.empty() || cfg.name.find('/') != std::string::npos)
        throw ConfigError("name must be a non-empty file prefix without '/'");

    if (root.contains("params")) {
        if (!root["params"].is_object()) throw ConfigError("params must be an object");
        cfg.params = parse_params(root["params"]);
    }

    if (root.contains("cutoff")) {
        const json& c = root["cutoff"];
        if (c.is_string() && c.get<std::string>() == "auto")
            cfg.cutoff = 0;
        else if (c.is_number_integer() && c.get<int>() >= 2)
            cfg.cutoff = c.get<int>();
        else
            throw ConfigError("cutoff must be \"auto\" or an integer >= 2");
    }

    if (root.contains("initial_state")) {
        if (!root["initial_state"].is_string())
            throw ConfigError("initial_state must be a string");
        cfg.initial_states.push_back(root["initial_state"].get<std::string>());
    }
    if (root.contains("initial_states")) {
        if (!root["initial_states"].is_array())
            throw ConfigError("initial_states must be an array of strings");
        for (const auto& s : root["initial_states"]) {
            if (!s.is_string())
                throw ConfigError("initial_states must be an array of strings");
            cfg.initial_states.push_back(s.get<std::string>());
        }
    }

    if (root.contains("time")) {
        const json& t = root["time"];
        if (!t.is_object()) throw ConfigError("time must be an object");
        reject_unknown(t, "time", {"stop", "points"});
        cfg.time.stop = require_number(t, "time", "stop", cfg.time.stop);
        if (t.contains("points")) {
            if (!t["points"].is_number_integer())
                throw ConfigError("time.points must be an integer");
            cfg.time.points = t["points"].get<int>();
        }
        cfg.time.times();  // validates
    }

    if (root.contains("integrator")) {
        if (!root["integrator"].is_string() ||
            (root["integrator"] != "adaptive" && root["integrator"] != "expm"))
            throw ConfigError("integrator must be \"adaptive\" or \"expm\"");
        cfg.integrator = root["integrator"].get<std::string>();
    }

    if (root.contains("trajectories")) {
        if (!root["trajectories"].is_number_integer() || root["trajectories"].get<int>() < 1)
            throw ConfigError("trajectories must be a positive integer");
        cfg.trajectories = root["trajectories"].get<int>();
    }
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer())
            throw ConfigError("seed must be a non-negative integer");
        cfg.seed = root["seed"].get<uint64_t>();
    }
    cfg.dt = require_number(root, "config", "dt", cfg.dt);
    if (cfg.dt <= 0.0) throw ConfigError("dt must be > 0");
    if (root.contains("record_every")) {
        if (!root["record_every"].is_number_integer() || root["record_every"].get<int>() < 1)
            throw ConfigError("record_every must be a positive integer");
        cfg.record_every = root["record_every"].get<int>();
    }

    if (root.contains("tolerances")) {
        const json& t = root["tolerances"];
        if (!t.is_object()) throw ConfigError("tolerances must be an object");
        reject_unknown(t, "tolerances", {"rtol", "atol", "series_tol"});
        cfg.rtol = require_number(t, "tolerances", "rtol", cfg.rtol);
        cfg.atol = require_number(t, "tolerances", "atol", cfg.atol);
        cfg.series_tol = require_number(t, "tolerances", "series_tol", cfg.series_tol);
        if (cfg.rtol <= 0 || cfg.atol <= 0 || cfg.series_tol <= 0)
            throw ConfigError("tolerances must be > 0");
    }

    if (root.contains("feedback_rates"))
        cfg.feedback_rates = parse_number_list(root["feedback_rates"], "feedback_rates");
    for (double r : cfg.feedback_rates)
        if (r < 0.0) throw ConfigError("feedback_rates must be >= 0");

    if (root.contains("wigner")) {
        const json& w = root["wigner"];
        if (!w.is_object()) throw ConfigError("wigner must be an object");
        reject_unknown(w, "wigner", {"re_min", "re_max", "im_min", "im_max", "step"});
        cfg.window.re_min = require_number(w, "wigner", "re_min", cfg.window.re_min);
        cfg.window.re_max = require_number(w, "wigner", "re_max", cfg.window.re_max);
        cfg.window.im_min = require_number(w, "wigner", "im_min", cfg.window.im_min);
        cfg.window.im_max = require_number(w, "wigner", "im_max", cfg.window.im_max);
        cfg.window.step = require_number(w, "wigner", "step", cfg.window.step);
        cfg.window.grid();  // validates
    }

    if (root.contains("sweep")) {
        const json& s = root["sweep"];
        if (!s.is_object()) throw ConfigError("sweep must be an object");
        reject_unknown(s, "sweep", {"detuning", "pump", "gamma", "kerr"});
        if (s.contains("detuning"))
            cfg.sweep_detuning = parse_number_list(s["detuning"], "sweep.detuning");
        if (s.contains("pump")) cfg.sweep_pump = parse_number_list(s["pump"], "sweep.pump");
        if (s.contains("gamma"))
            cfg.sweep_gamma = parse_number_list(s["gamma"], "sweep.gamma");
        if (s.contains("kerr")) cfg.sweep_kerr = parse_number_list(s["kerr"], "sweep.kerr");
    }

    if (root.contains("workers")) {
        if (!root["workers"].is_number_integer() || root["workers"].get<int>() < 0)
            throw ConfigError("workers must be a non-negative integer");
        cfg.workers = root["workers"].get<int>();
    }

    // scenario-specific requirements
    const bool needs_state = cfg.scenario == "evolve" || cfg.scenario == "trajectory" ||
                             cfg.scenario == "ensemble";
    if (needs_state && cfg.initial_states.empty())
        throw ConfigError("scenario \"" + cfg.scenario + "\" requires an initial state");
    if (needs_state && !root.contains("time"))
        throw ConfigError("scenario \"" + cfg.scenario + "\" requires a time grid");
    if (cfg.scenario == "feedback" && cfg.feedback_rates.empty())
        throw ConfigError("scenario \"feedback\" requires feedback_rates");
    if (cfg.scenario == "feedback" && cfg.params.gamma_f != 0.0)
        throw ConfigError("scenario \"feedback\": set rates in feedback_rates, not params.gamma_f");
    if ((cfg.scenario == "steady" || cfg.scenario == "sweep") && cfg.params.gamma_f != 0.0)
        throw ConfigError("scenario \"" + cfg.scenario +
                          "\" uses the closed-form steady state, which excludes gamma_f");
    if (cfg.scenario == "sweep" && cfg.sweep_detuning.empty() && cfg.sweep_pump.empty() &&
        cfg.sweep_gamma.empty() && cfg.sweep_kerr.empty())
        throw ConfigError("scenario \"sweep\" requires at least one sweep list");

    for (const std::string& s : cfg.initial_states) {
        try {
            build_state(s, 16);  // syntax check only
        } catch (const CutoffError&) {
            // a valid state that merely needs a larger space than the probe
        }
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse(text);
}

int ExperimentConfig::resolved_cutoff() const {
    if (cutoff > 0) return cutoff;
    // the auto heuristic must cover every sweep point and feedback rate
    int best = default_cutoff(params);
    SystemParams p = params;
    auto consider = [&best](const SystemParams& q) {
        best = std::max(best, default_cutoff(q));
    };
    for (double g : sweep_pump) {
        p.pump = g;
        consider(p);
    }
    for (double u : sweep_kerr) {
        p = params;
        p.kerr = u;
        consider(p);
        for (double g : sweep_pump) {
            p.pump = g;
            consider(p);
        }
    }
    return best;
}

CVector build_state(const std::string& spec, int cutoff) {
    const auto bad = [&spec]() {
        return ConfigError("bad initial state \"" + spec +
                           "\" (expected vacuum | fock:n | coherent:re,im | cat:+|-:re,im)");
    };
    auto parse_pair = [&](const std::string& s) {
        const size_t comma = s.find(',');
        if (comma == std::string::npos) throw bad();
        size_t used1 = 0, used2 = 0;
        double re, im;
        try {
            re = std::stod(s.substr(0, comma), &used1);
            im = std::stod(s.substr(comma + 1), &used2);
        } catch (const std::exception&) {
            throw bad();
        }
        if (used1 != comma || used2 != s.size() - comma - 1) throw bad();
        return Complex(re, im);
    };

    if (spec == "vacuum") {
        CVector v = CVector::Zero(cutoff);
        v(0) = 1.0;
        return v;
    }
    if (spec.rfind("fock:", 0) == 0) {
        int n;
        try {
            n = std::stoi(spec.substr(5));
        } catch (const std::exception&) {
            throw bad();
        }
        if (n < 0) throw bad();
        if (n >= cutoff)
            throw CutoffError("initial state " + spec + " does not fit in cutoff " +
                                  std::to_string(cutoff),
                              n + 10);
        CVector v = CVector::Zero(cutoff);
        v(n) = 1.0;
        return v;
    }
    if (spec.rfind("coherent:", 0) == 0) return coherent_state(parse_pair(spec.substr(9)), cutoff);
    if (spec.rfind("cat:+:", 0) == 0)
        return cat_state(parse_pair(spec.substr(6)), Parity::Even, cutoff);
    if (spec.rfind("cat:-:", 0) == 0)
        return cat_state(parse_pair(spec.substr(6)), Parity::Odd, cutoff);
    throw bad();
}

namespace {

int resolve_workers(const ExperimentConfig& cfg, const RunOptions& opt) {
    if (opt.workers > 0) return opt.workers;
    if (cfg.workers > 0) return cfg.workers;
    if (const char* env = std::getenv("KERRCAT_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return 1;
}

std::string format_cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// One CSV table: fixed columns, rows written in a deterministic order.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
        : path_(path), columns_(columns.size()), out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        for (size_t k = 0; k < columns.size(); ++k)
            out_ << (k ? "," : "") << columns[k];
        out_ << "\n";
    }

    void row(const std::vector<double>& values) {
        if (values.size() != columns_)
            throw std::logic_error("csv row width mismatch in " + path_.string());
        for (size_t k = 0; k < values.size(); ++k)
            out_ << (k ? "," : "") << format_cell(values[k]);
        out_ << "\n";
    }

    void raw_row(const std::string& line) { out_ << line << "\n"; }

  private:
    std::filesystem::path path_;
    size_t columns_;
    std::ofstream out_;
};

json params_json(const SystemParams& p) {
    return json{{"detuning", p.detuning},
                {"kerr", p.kerr},
                {"pump", {p.pump.real(), p.pump.imag()}},
                {"gamma", p.gamma},
                {"eta", p.eta},
                {"gamma_f", p.gamma_f}};
}

json config_echo(const ExperimentConfig& c) {
    json j{{"name", c.name},
           {"scenario", c.scenario},
           {"params", params_json(c.params)},
           {"cutoff", c.cutoff > 0 ? json(c.cutoff) : json("auto")},
           {"seed", c.seed},
           {"dt", c.dt},
           {"record_every", c.record_every},
           {"trajectories", c.trajectories},
           {"tolerances",
            {{"rtol", c.rtol}, {"atol", c.atol}, {"series_tol", c.series_tol}}}};
    if (!c.initial_states.empty()) j["initial_states"] = c.initial_states;
    j["integrator"] = c.integrator;
    j["time"] = {{"stop", c.time.stop}, {"points", c.time.points}};
    j["wigner"] = {{"re_min", c.window.re_min}, {"re_max", c.window.re_max},
                   {"im_min", c.window.im_min}, {"im_max", c.window.im_max},
                   {"step", c.window.step}};
    if (!c.feedback_rates.empty()) j["feedback_rates"] = c.feedback_rates;
    json sweep = json::object();
    if (!c.sweep_detuning.empty()) sweep["detuning"] = c.sweep_detuning;
    if (!c.sweep_pump.empty()) sweep["pump"] = c.sweep_pump;
    if (!c.sweep_gamma.empty()) sweep["gamma"] = c.sweep_gamma;
    if (!c.sweep_kerr.empty()) sweep["kerr"] = c.sweep_kerr;
    if (!sweep.empty()) j["sweep"] = sweep;
    return j;
}

constexpr const char* kVersion = "1.0.0";

struct Emitter {
    std::filesystem::path dir;
    std::string prefix;
    std::ostream& log;
    std::vector<std::string> artifacts;

    std::filesystem::path path(const std::string& suffix) {
        const std::string file = prefix + "_" + suffix;
        artifacts.push_back(file);
        log << "wrote " << (dir / file).string() << "\n";
        return dir / file;
    }
};

void write_wigner_csv(Emitter& em, const std::string& suffix, const WignerGrid& grid) {
    CsvWriter csv(em.path(suffix), {"re_beta", "im_beta", "wigner"});
    const GridSpec& s = grid.spec;
    for (int i = 0; i < s.re_points(); ++i)
        for (int j = 0; j < s.im_points(); ++j)
            csv.row({s.re_min + i * s.step, s.im_min + j * s.step, grid.values(i, j)});
}

/// Steady-state summary shared by the steady scenario and each sweep point.
struct SteadySummary {
    double p1, p2, residual, nbar, parity;
    double n1, n2, nbound, par1, par2, parbound;
    Complex alpha1, alpha2;
    double overlap1, overlap2;
    int sign1, sign2;
};

SteadySummary summarize_steady(const CMatrix& rho, int cutoff) {
    const SpectrumReport rep = spectral_decompose(rho);
    const CMatrix num = number_operator(cutoff);
    const CMatrix par = parity_operator(cutoff);
    const ObservableSplit ns = observable_split(rep, num);
    const ObservableSplit ps = observable_split(rep, par);
    const CatFit f1 = fit_cat(rep.states[0]);
    const CatFit f2 = fit_cat(rep.states[1]);
    SteadySummary s;
    s.p1 = rep.probabilities[0];
    s.p2 = rep.probabilities[1];
    s.residual = rep.residual;
    s.nbar = ns.total.real();
    s.parity = ps.total.real();
    s.n1 = ns.first.real();
    s.n2 = ns.second.real();
    s.nbound = ns.bound;
    s.par1 = ps.first.real();
    s.par2 = ps.second.real();
    s.parbound = ps.bound;
    s.alpha1 = f1.alpha;
    s.alpha2 = f2.alpha;
    s.overlap1 = f1.overlap;
    s.overlap2 = f2.overlap;
    s.sign1 = parity_sign(f1.parity);
    s.sign2 = parity_sign(f2.parity);
    return s;
}

void run_steady(const ExperimentConfig& cfg, int cutoff, Emitter& em, json& meta) {
    const SteadyStateResult ss = steady_density_matrix(cfg.params, cutoff, cfg.series_tol);
    const SteadySummary s = summarize_steady(ss.rho, cutoff);

    CsvWriter pops(em.path("populations.csv"), {"n", "population"});
    for (int n = 0; n < cutoff; ++n) pops.row({double(n), ss.rho(n, n).real()});

    CsvWriter sum(em.path("summary.csv"),
                  {"p1", "p2", "residual", "nbar", "parity", "nbar_1", "nbar_2",
                   "nbar_bound", "parity_1", "parity_2", "parity_bound", "alpha1_re",
                   "alpha1_im", "overlap1", "cat1_sign", "alpha2_re", "alpha2_im",
                   "overlap2", "cat2_sign"});
    sum.row({s.p1, s.p2, s.residual, s.nbar, s.parity, s.n1, s.n2, s.nbound, s.par1,
             s.par2, s.parbound, s.alpha1.real(), s.alpha1.imag(), s.overlap1,
             double(s.sign1), s.alpha2.real(), s.alpha2.imag(), s.overlap2,
             double(s.sign2)});

    meta["series_terms"] = ss.series_terms;
    meta["tail_mass"] = ss.tail_mass;
}

void run_evolve(const ExperimentConfig& cfg, int cutoff, Emitter& em, json& meta) {
    const LindbladModel model = build_model(cfg.params, cutoff);
    const CMatrix target = cfg.params.gamma_f == 0.0
                               ? steady_density_matrix(cfg.params, cutoff, cfg.series_tol).rho
                               : steady_state_null_vector(model);
    const std::vector<double> grid = cfg.time.times();

    // The exponential propagator is expensive to build but shared across all
    // initial states, so it is assembled here rather than once per curve.
    CMatrix prop;
    if (cfg.integrator == "expm") {
        const CMatrix l = CMatrix(liouvillian_matrix(model));
        prop = (l * (grid[1] - grid[0])).exp();
    }

    CsvWriter csv(em.path("evolve.csv"),
                  {"state_index", "time", "fidelity", "mean_n", "mean_parity"});
    const CMatrix num = number_operator(cutoff);
    const CMatrix par = parity_operator(cutoff);
    json diag = json::array();
    for (size_t si = 0; si < cfg.initial_states.size(); ++si) {
        const CVector psi0 = build_state(cfg.initial_states[si], cutoff);
        const CMatrix rho0 = psi0 * psi0.adjoint();
        std::vector<CMatrix> states;
        json entry{{"state", cfg.initial_states[si]}};
        if (cfg.integrator == "expm") {
            CVector v = Eigen::Map<const CVector>(rho0.data(), cutoff * cutoff);
            for (size_t k = 0; k < grid.size(); ++k) {
                if (k > 0) v = prop * v;
                CMatrix rho = Eigen::Map<const CMatrix>(v.data(), cutoff, cutoff);
                rho = 0.5 * (rho + rho.adjoint().eval());
                rho /= rho.trace().real();
                states.push_back(std::move(rho));
            }
            entry["steps"] = grid.size() - 1;
        } else {
            EvolutionResult ev = evolve(model, rho0, grid, cfg.rtol, cfg.atol);
            entry["steps"] = ev.steps;
            entry["rejected"] = ev.rejected;
            entry["repair_magnitude"] = ev.repair_magnitude;
            states = std::move(ev.states);
        }
        for (size_t k = 0; k < grid.size(); ++k)
            csv.row({double(si), grid[k], fidelity(states[k], target),
                     expectation(states[k], num).real(),
                     expectation(states[k], par).real()});
        diag.push_back(entry);
    }
    meta["integration"] = diag;
}

void run_trajectory_scenario(const ExperimentConfig& cfg, int cutoff, Emitter& em,
                             json& meta, uint64_t seed) {
    const CVector psi0 = build_state(cfg.initial_states[0], cutoff);
    const TrajectoryRecord rec = run_trajectory(cfg.params, psi0, cfg.time.stop, cfg.dt,
                                                seed, cfg.record_every);
    CsvWriter csv(em.path("trajectory.csv"), {"time", "mean_n", "mean_parity"});
    for (size_t k = 0; k < rec.times.size(); ++k)
        csv.row({rec.times[k], rec.mean_n[k], rec.mean_parity[k]});

    CsvWriter jumps(em.path("jumps.csv"), {"time", "channel"});
    for (const JumpEvent& j : rec.jumps)
        jumps.raw_row(format_cell(j.time) + "," + channel_label(j.channel));
    meta["jump_count"] = rec.jumps.size();
    meta["trajectory_seed"] = seed;
}

void run_ensemble_scenario(const ExperimentConfig& cfg, int cutoff, Emitter& em,
                           json& meta, uint64_t seed, int workers) {
    const CVector psi0 = build_state(cfg.initial_states[0], cutoff);
    const EnsembleSummary s =
        ensemble(cfg.params, psi0, cfg.time.stop, cfg.dt, cfg.trajectories, seed,
                 cfg.record_every, workers);
    CsvWriter csv(em.path("ensemble.csv"),
                  {"time", "mean_n", "se_n", "mean_parity", "se_parity"});
    for (size_t k = 0; k < s.times.size(); ++k)
        csv.row({s.times[k], s.mean_n[k], s.se_n[k], s.mean_parity[k], s.se_parity[k]});
    meta["trajectories"] = s.count;
    meta["master_seed"] = seed;
}

void run_feedback(const ExperimentConfig& cfg, int cutoff, Emitter& em, json& meta,
                  int workers) {
    CsvWriter csv(em.path("feedback.csv"),
                  {"gamma_f", "parity", "p1", "residual", "alpha_re", "alpha_im",
                   "cat_overlap", "fidelity_to_cat", "wigner_min"});
    const CMatrix par = parity_operator(cutoff);
    for (size_t k = 0; k < cfg.feedback_rates.size(); ++k) {
        SystemParams p = cfg.params;
        p.gamma_f = cfg.feedback_rates[k];
        const CMatrix rho = steady_state_null_vector(build_model(p, cutoff));
        const SpectrumReport rep = spectral_decompose(rho);
        const CatFit fit = fit_cat(rep.states[0]);
        const CVector cat = cat_state(fit.alpha, fit.parity, cutoff);
        const double fid = fidelity(rho, CMatrix(cat * cat.adjoint()));
        const WignerGrid w = wigner_numeric(rho, cfg.window.grid(), workers);
        write_wigner_csv(em, "wigner_" + std::to_string(k) + ".csv", w);
        csv.row({p.gamma_f, expectation(rho, par).real(), rep.probabilities[0],
                 rep.residual, fit.alpha.real(), fit.alpha.imag(), fit.overlap, fid,
                 w.min_value});
    }
    meta["rates"] = cfg.feedback_rates;
}

void run_wigner(const ExperimentConfig& cfg, int cutoff, Emitter& em, json& meta,
                int workers) {
    const CMatrix rho =
        cfg.params.gamma_f == 0.0
            ? steady_density_matrix(cfg.params, cutoff, cfg.series_tol).rho
            : steady_state_null_vector(build_model(cfg.params, cutoff));
    const WignerGrid w = wigner_numeric(rho, cfg.window.grid(), workers);
    write_wigner_csv(em, "wigner.csv", w);
    meta["wigner_min"] = w.min_value;
    meta["truncation_flag"] = w.truncation_flag;
}

void run_sweep(const ExperimentConfig& cfg, int cutoff, Emitter& em, json& meta,
               int workers) {
    auto axis = [](const std::vector<double>& list, double base) {
        return list.empty() ? std::vector<double>{base} : list;
    };
    const std::vector<double> ds = axis(cfg.sweep_detuning, cfg.params.detuning);
    const std::vector<double> gs = axis(cfg.sweep_pump, cfg.params.pump.real());
    const std::vector<double> cs = axis(cfg.sweep_gamma, cfg.params.gamma);
    const std::vector<double> us = axis(cfg.sweep_kerr, cfg.params.kerr);

    struct Point {
        SystemParams params;
        SteadySummary summary;
    };
    std::vector<Point> points;
    for (double d : ds)
        for (double g : gs)
            for (double c : cs)
                for (double u : us) {
                    SystemParams p = cfg.params;
                    p.detuning = d;
                    p.pump = g;
                    p.gamma = c;
                    p.kerr = u;
                    points.push_back({p, {}});
                }

    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<size_t> cursor{0};
    auto work = [&]() {
        try {
            for (size_t i = cursor.fetch_add(1); i < points.size();
                 i = cursor.fetch_add(1)) {
                const CMatrix rho =
                    steady_density_matrix(points[i].params, cutoff, cfg.series_tol).rho;
                points[i].summary = summarize_steady(rho, cutoff);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    // rows come out sorted by sweep coordinates because the cross product is
    // generated in order and the reduction is by index
    CsvWriter csv(em.path("sweep.csv"),
                  {"detuning", "pump", "gamma", "kerr", "p1", "p2", "residual", "nbar",
                   "parity", "alpha1_abs", "overlap1", "overlap2"});
    for (const Point& pt : points) {
        const SteadySummary& s = pt.summary;
        csv.row({pt.params.detuning, pt.params.pump.real(), pt.params.gamma,
                 pt.params.kerr, s.p1, s.p2, s.residual, s.nbar, s.parity,
                 std::abs(s.alpha1), s.overlap1, s.overlap2});
    }
    meta["points"] = points.size();
}

}  // namespace

int run_experiment(const ExperimentConfig& config, const RunOptions& options,
                   std::ostream& log) {
    ExperimentConfig cfg = config;
    if (options.seed_override) cfg.seed = *options.seed_override;
    if (options.cutoff_override) cfg.cutoff = *options.cutoff_override;
    const int cutoff = cfg.resolved_cutoff();
    const int workers = resolve_workers(cfg, options);

    std::filesystem::create_directories(options.output_dir);
    Emitter em{options.output_dir, cfg.name, log, {}};

    json meta;
    meta["version"] = kVersion;
    meta["config"] = config_echo(cfg);
    meta["cutoff"] = cutoff;
    meta["workers"] = workers;

    try {
        if (cfg.scenario == "steady")
            run_steady(cfg, cutoff, em, meta);
        else if (cfg.scenario == "evolve")
            run_evolve(cfg, cutoff, em, meta);
        else if (cfg.scenario == "trajectory")
            run_trajectory_scenario(cfg, cutoff, em, meta, cfg.seed);
        else if (cfg.scenario == "ensemble")
            run_ensemble_scenario(cfg, cutoff, em, meta, cfg.seed, workers);
        else if (cfg.scenario == "feedback")
            run_feedback(cfg, cutoff, em, meta, workers);
        else if (cfg.scenario == "wigner")
            run_wigner(cfg, cutoff, em, meta, workers);
        else if (cfg.scenario == "sweep")
            run_sweep(cfg, cutoff, em, meta, workers);
        else
            throw ConfigError("unknown scenario \"" + cfg.scenario + "\"");
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CutoffError& e) {
        log << "cutoff failure: " << e.what() << " (suggested cutoff "
            << e.required_cutoff() << ")\n";
        return kExitCutoff;
    } catch (const std::exception& e) {
        log << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    }

    meta["artifacts"] = em.artifacts;
    const std::filesystem::path meta_path =
        std::filesystem::path(options.output_dir) / (cfg.name + "_meta.json");
    std::ofstream out(meta_path);
    out << meta.dump(2) << "\n";
    log << "wrote " << meta_path.string() << "\n";
    return kExitOk;
}

int run_experiment_file(const std::string& path, const RunOptions& options,
                        std::ostream& log, std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::load(path);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    return run_experiment(cfg, options, log);
}

int validate_config_file(const std::string& path, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::load(path);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    const int cutoff = cfg.resolved_cutoff();
    out << "OK: scenario " << cfg.scenario << " (" << cfg.name << ")\n";
    out << "params: detuning=" << cfg.params.detuning << " kerr=" << cfg.params.kerr
        << " pump=(" << cfg.params.pump.real() << "," << cfg.params.pump.imag() << ")"
        << " gamma=" << cfg.params.gamma << " eta=" << cfg.params.eta
        << " gamma_f=" << cfg.params.gamma_f << "\n";
    out << "cutoff: " << cutoff << (cfg.cutoff > 0 ? "" : " (auto)") << "\n";

    // rough peak memory: the dominant allocation per scenario
    double bytes = 16.0 * cutoff * cutoff;  // one dense complex matrix
    const bool needs_null = cfg.scenario == "feedback" ||
                            (cfg.scenario == "evolve" && cfg.params.gamma_f != 0.0);
    if (needs_null) {
        const double nnz = 7.0 * cutoff * cutoff * cutoff;  // sparse Liouvillian + LU fill
        bytes = std::max(bytes, 24.0 * nnz);
    }
    if (cfg.scenario == "evolve") bytes = std::max(bytes, 16.0 * cutoff * cutoff * (cfg.time.points + 8.0));
    out << "estimated peak memory: " << format_cell(bytes / 1048576.0) << " MiB\n";
    return kExitOk;
}

}  // namespace kerrcat
