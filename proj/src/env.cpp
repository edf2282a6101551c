#include "afc/env.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "afc/errors.hpp"

namespace afc {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRampFraction = 0.2; ///< of T_act, action cross-fade window
} // namespace

void EpisodeConfig::validate() const {
    if (!(T_eps > 0.0)) throw ConfigError("episode: T_eps must be positive");
    if (n_actions < 1) throw ConfigError("episode: n_actions must be >= 1");
}

void Observation::validate() const {
    if (sensors_per_slice < 1 || n_slices < 1)
        throw ConfigError("observation: layout dimensions must be positive");
    if (values.size() !=
        static_cast<size_t>(sensors_per_slice) * static_cast<size_t>(n_slices))
        throw ConfigError("observation: length does not match its layout");
}

Observation partition_observation(const std::vector<double>& global_sensors,
                                  int marl_id, int n_marl) {
    if (n_marl < 1) throw InputError("partition: n_marl must be >= 1");
    if (marl_id < 0 || marl_id >= n_marl)
        throw InputError("partition: marl_id out of range");
    if (global_sensors.empty() || global_sensors.size() % static_cast<size_t>(n_marl) != 0)
        throw InputError("partition: sensor field does not split into n_marl slices");
    const size_t s = global_sensors.size() / static_cast<size_t>(n_marl);

    Observation out;
    out.sensors_per_slice = static_cast<int>(s);
    out.n_slices = 3;
    out.values.reserve(3 * s);
    const int left = (marl_id + n_marl - 1) % n_marl;
    const int right = (marl_id + 1) % n_marl;
    for (int slice : {left, marl_id, right}) {
        const auto begin = global_sensors.begin() + static_cast<long>(slice) * static_cast<long>(s);
        out.values.insert(out.values.end(), begin, begin + static_cast<long>(s));
    }
    return out;
}

// --- oscillator lattice --------------------------------------------------

void OscillatorLatticeConfig::validate() const {
    if (n_osc < 1) throw ConfigError("oscillator: n_osc must be >= 1");
    if (!(sigma > 0.0))
        throw ConfigError("oscillator: sigma must be positive (limit cycle exists)");
    if (!(dt_int > 0.0)) throw ConfigError("oscillator: dt_int must be positive");
    if (noise_std < 0.0) throw ConfigError("oscillator: noise_std must be >= 0");
    if (!std::isfinite(omega) || !std::isfinite(kappa) || !std::isfinite(b))
        throw ConfigError("oscillator: parameters must be finite");
}

std::vector<std::complex<double>> oscillator_step(
    const std::vector<std::complex<double>>& state, const std::vector<double>& actions,
    const OscillatorLatticeConfig& cfg, double dt) {
    const size_t n = state.size();
    if (n == 0 || actions.size() != n)
        throw InputError("oscillator: state and actions must align and be non-empty");
    if (!(dt > 0.0) || dt > cfg.dt_int * (1.0 + 1e-12))
        throw InputError("oscillator: dt must lie in (0, dt_int]");
    for (size_t k = 0; k < n; ++k)
        if (!std::isfinite(state[k].real()) || !std::isfinite(state[k].imag()) ||
            !std::isfinite(actions[k]))
            throw InputError("oscillator: non-finite state or action");

    const std::complex<double> lin(cfg.sigma, cfg.omega);
    auto deriv = [&](const std::vector<std::complex<double>>& A) {
        std::vector<std::complex<double>> d(n);
        for (size_t k = 0; k < n; ++k) {
            const std::complex<double>& a = A[k];
            const std::complex<double>& ap = A[(k + 1) % n];
            const std::complex<double>& am = A[(k + n - 1) % n];
            d[k] = lin * a - std::norm(a) * a + cfg.kappa * (ap + am - 2.0 * a) +
                   cfg.b * actions[k];
        }
        return d;
    };

    const std::vector<std::complex<double>> k1 = deriv(state);
    std::vector<std::complex<double>> tmp(n);
    for (size_t k = 0; k < n; ++k) tmp[k] = state[k] + 0.5 * dt * k1[k];
    const std::vector<std::complex<double>> k2 = deriv(tmp);
    for (size_t k = 0; k < n; ++k) tmp[k] = state[k] + 0.5 * dt * k2[k];
    const std::vector<std::complex<double>> k3 = deriv(tmp);
    for (size_t k = 0; k < n; ++k) tmp[k] = state[k] + dt * k3[k];
    const std::vector<std::complex<double>> k4 = deriv(tmp);

    std::vector<std::complex<double>> out(n);
    for (size_t k = 0; k < n; ++k)
        out[k] = state[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    return out;
}

OscillatorEnv::OscillatorEnv(OscillatorLatticeConfig cfg, EpisodeConfig episode,
                             double action_bound)
    : cfg_(cfg), episode_(episode), action_bound_(action_bound),
      state_(static_cast<size_t>(cfg.n_osc), {0.0, 0.0}),
      prev_action_(static_cast<size_t>(cfg.n_osc), 0.0),
      lift_(static_cast<size_t>(cfg.n_osc)) {
    cfg_.validate();
    episode_.validate();
    if (!(action_bound_ > 0.0))
        throw ConfigError("oscillator env: action bound must be positive");
}

void OscillatorEnv::set_state(const std::vector<std::complex<double>>& s) {
    if (s.size() != state_.size())
        throw InputError("oscillator env: state size mismatch");
    state_ = s;
}

std::vector<Observation> OscillatorEnv::observations() const {
    std::vector<double> global;
    global.reserve(2 * state_.size());
    for (const std::complex<double>& a : state_) {
        global.push_back(a.real());
        global.push_back(a.imag());
    }
    std::vector<Observation> obs;
    obs.reserve(state_.size());
    for (int k = 0; k < cfg_.n_osc; ++k)
        obs.push_back(partition_observation(global, k, cfg_.n_osc));
    return obs;
}

std::vector<Observation> OscillatorEnv::reset(uint64_t seed) {
    Rng rng(derive_seed({seed, 0x05c1u}));
    const double r0 = std::sqrt(cfg_.sigma);
    for (std::complex<double>& a : state_) {
        const double amp = std::max(0.0, r0 * (1.0 + cfg_.noise_std * rng.normal()));
        const double phase = cfg_.noise_std * rng.normal();
        a = std::polar(amp, phase);
    }
    std::fill(prev_action_.begin(), prev_action_.end(), 0.0);
    for (RunningLiftMean& m : lift_) m.reset();
    time_ = 0.0;
    actions_taken_ = 0;
    started_ = true;
    return observations();
}

StepResult OscillatorEnv::step_action(const std::vector<double>& actions) {
    if (!started_) throw LifecycleError("oscillator env: reset before stepping");
    if (done()) throw LifecycleError("oscillator env: episode is over; reset first");
    if (actions.size() != static_cast<size_t>(cfg_.n_osc))
        throw InputError("oscillator env: one action per pseudo-environment");
    for (double a : actions)
        if (!std::isfinite(a) || std::abs(a) > action_bound_)
            throw ActionRangeError("oscillator env: action outside the bound");

    const double T_act = episode_.T_act();
    const int n_sub = std::max(1, static_cast<int>(std::ceil(T_act / cfg_.dt_int)));
    const double dt = T_act / n_sub;

    StepResult res;
    res.records.assign(static_cast<size_t>(cfg_.n_osc), {});
    std::vector<double> eff(actions.size());
    for (int m = 0; m < n_sub; ++m) {
        // The new action cross-fades in over the first part of the window;
        // evaluated at the substep midpoint.
        const double frac =
            std::min(1.0, (m + 0.5) * dt / (kRampFraction * T_act));
        for (size_t k = 0; k < actions.size(); ++k)
            eff[k] = prev_action_[k] + frac * (actions[k] - prev_action_[k]);
        state_ = oscillator_step(state_, eff, cfg_, dt);
        time_ += dt;
        for (int k = 0; k < cfg_.n_osc; ++k) {
            const std::complex<double>& a = state_[static_cast<size_t>(k)];
            res.records[static_cast<size_t>(k)].push_back(
                {time_, a.real(), std::norm(a)});
            lift_[static_cast<size_t>(k)].add(a.real());
        }
    }
    prev_action_ = actions;
    ++actions_taken_;
    res.obs = observations();
    res.done = done();
    return res;
}

double OscillatorEnv::lift_mean(int marl_id) const {
    if (marl_id < 0 || marl_id >= cfg_.n_osc)
        throw InputError("oscillator env: marl_id out of range");
    return lift_[static_cast<size_t>(marl_id)].mean();
}

// --- cylinder flow -------------------------------------------------------

std::vector<std::pair<double, double>> cylinder_probe_layout(const Body& body) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(90);
    for (double rr : {0.6, 0.85, 1.25}) {
        const double r = rr * body.D;
        for (int m = 0; m < 24; ++m) {
            const double th = 2.0 * kPi * m / 24.0;
            pts.emplace_back(body.xc + r * std::cos(th), body.yc + r * std::sin(th));
        }
    }
    for (double xr : {1.5, 2.5}) {
        const double x = body.xc + xr * body.D;
        for (int m = -4; m <= 4; ++m)
            pts.emplace_back(x, body.yc + 0.5 * m * body.D);
    }
    return pts;
}

void CylinderEnvConfig::validate() const {
    grid.validate();
    solver.validate();
    body.validate();
    episode.validate();
    if (n_marl != 1)
        throw ConfigError(
            "cylinder env: a 2D domain has no spanwise slices; n_marl must be 1");
    if (perturb < 0.0) throw ConfigError("cylinder env: perturb must be >= 0");
    if (baseline_prefix.empty())
        throw ConfigError("cylinder env: baseline_prefix is required");
}

CylinderEnv::CylinderEnv(CylinderEnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const std::string snap = cfg_.baseline_prefix + ".dat";
    const std::string stats = cfg_.baseline_prefix + ".stats";
    if (!std::filesystem::exists(snap) || !std::filesystem::exists(stats))
        throw ConfigError("cylinder env: no baseline state at " + cfg_.baseline_prefix +
                          "; run the `baseline` command first");
    baseline_ = read_baseline_stats(stats);
    solver_ = std::make_unique<Solver2d>(cfg_.grid, cfg_.solver, cfg_.body);
    probes_ = cylinder_probe_layout(cfg_.body);
    (void)solver_->sample_probes(probes_); // fail fast on a bad layout
}

int CylinderEnv::obs_size() const { return 3 * static_cast<int>(probes_.size()); }

std::vector<Observation> CylinderEnv::observations() {
    return {partition_observation(solver_->sample_probes(probes_), 0, 1)};
}

std::vector<Observation> CylinderEnv::reset(uint64_t seed) {
    solver_->restore_snapshot(cfg_.baseline_prefix + ".dat");
    solver_->set_jet(0.0);

    if (cfg_.perturb > 0.0) {
        // Solenoidal noise from a random streamfunction at cell corners;
        // faces touching the boundary keep their boundary values.
        const int nx = static_cast<int>(cfg_.grid.nx), ny = static_cast<int>(cfg_.grid.ny);
        const double dx = cfg_.grid.dx(), dy = cfg_.grid.dy();
        const double amp = cfg_.perturb * cfg_.solver.U_inf * std::min(dx, dy);
        Rng rng(derive_seed({seed, 0xf10u}));
        ScalarField psi(nx + 1, ny + 1);
        for (int j = 1; j < ny; ++j)
            for (int i = 1; i < nx; ++i) psi(i, j) = amp * rng.normal();
        FlowField& f = solver_->field();
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i)
                f.u(i, j) += (psi(i, j + 1) - psi(i, j)) / dy;
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                f.v(i, j) -= (psi(i + 1, j) - psi(i, j)) / dx;
    }
    // One priming step couples the start perturbation into the projected
    // pressure, so episode-start observations already reflect the seed.
    solver_->step(solver_->stable_dt());

    lift_.reset();
    episode_t0_ = solver_->field().time;
    prev_action_ = 0.0;
    actions_taken_ = 0;
    started_ = true;
    return observations();
}

StepResult CylinderEnv::step_action(const std::vector<double>& actions) {
    if (!started_) throw LifecycleError("cylinder env: reset before stepping");
    if (done()) throw LifecycleError("cylinder env: episode is over; reset first");
    if (actions.size() != 1)
        throw InputError("cylinder env: exactly one action per step");
    const double a = actions[0];
    if (!std::isfinite(a) || std::abs(a) > action_bound())
        throw ActionRangeError("cylinder env: jet amplitude outside the bound");

    const double T_act = cfg_.episode.T_act();
    const double t_start = episode_t0_ + actions_taken_ * T_act;
    const double t_end = episode_t0_ + (actions_taken_ + 1) * T_act;

    StepResult res;
    res.records.assign(1, {});
    while (solver_->field().time < t_end - 1e-12) {
        const double elapsed = solver_->field().time - t_start;
        const double frac = std::min(1.0, std::max(0.0, elapsed) / (kRampFraction * T_act));
        solver_->set_jet(prev_action_ + frac * (a - prev_action_));
        const double dt = snapped_dt(solver_->stable_dt(), t_end - solver_->field().time);
        solver_->step(dt);
        const auto [C_l, C_d] = solver_->last_forces();
        res.records[0].push_back({solver_->field().time, C_l, C_d});
        lift_.add(C_l);
    }
    prev_action_ = a;
    ++actions_taken_;
    res.obs = observations();
    res.done = done();
    return res;
}

double CylinderEnv::lift_mean(int marl_id) const {
    if (marl_id != 0) throw InputError("cylinder env: marl_id out of range");
    return lift_.mean();
}

} // namespace afc
