#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "afc/reward.hpp"
#include "afc/rng.hpp"
#include "afc/solver2d.hpp"

namespace afc {

/// Episode timing: n_actions policy decisions spread over T_eps
/// convective units, each holding for T_act = T_eps / n_actions.
struct EpisodeConfig {
    double T_eps = 10.52;
    int n_actions = 120;

    double T_act() const { return T_eps / static_cast<double>(n_actions); }
    void validate() const;
};

/// Flat sensor vector together with its (sensors-per-slice, slices)
/// layout; total length is always the product of the two.
struct Observation {
    std::vector<double> values;
    int sensors_per_slice = 0;
    int n_slices = 0;

    void validate() const;
};

/// Local view of one pseudo-environment inside a physical simulation:
/// its observation, action slot, and force contribution.
struct PseudoEnvView {
    int marl_id = 0;
    Observation obs;
    double action = 0.0;
    double C_l = 0.0;
    double C_d = 0.0;
};

/// Slice `marl_id` of a sensor field split into n_marl equal segments,
/// concatenated with its periodic neighbors in (left, center, right)
/// order. With n_marl = 1 the center slice repeats three times.
Observation partition_observation(const std::vector<double>& global_sensors,
                                  int marl_id, int n_marl);

/// What one step_action call hands back: per-pseudo-environment
/// observations and force records at substep resolution.
struct StepResult {
    std::vector<Observation> obs;
    std::vector<std::vector<ForceSample>> records;
    bool done = false;
};

/// Reset/step environment with n_marl pseudo-environments sharing one
/// physical state. Instances are single-threaded; run several instances
/// for parallel rollouts.
class Environment {
public:
    virtual ~Environment() = default;

    virtual int n_marl() const = 0;
    virtual int obs_size() const = 0;       ///< flat length per pseudo-env
    virtual double action_bound() const = 0;
    virtual const EpisodeConfig& episode() const = 0;

    /// Start a new episode; the seed controls the start perturbation.
    virtual std::vector<Observation> reset(uint64_t seed) = 0;

    /// Apply one action per pseudo-environment and advance by T_act.
    virtual StepResult step_action(const std::vector<double>& actions) = 0;

    virtual bool done() const = 0;

    /// Running per-pseudo-environment lift average over this episode.
    virtual double lift_mean(int marl_id) const = 0;
};

// --- oscillator lattice --------------------------------------------------

/// Ring of coupled Stuart-Landau oscillators: a translation-invariant
/// stand-in for spanwise-homogeneous shedding, cheap enough to exercise
/// full multi-agent training. Per oscillator, C_l = Re A, C_d = |A|^2.
struct OscillatorLatticeConfig {
    int n_osc = 3;          ///< lattice size (= n_MARL)
    double sigma = 0.1;     ///< linear growth rate; limit cycle radius sqrt(sigma)
    double omega = 1.0;     ///< natural frequency
    double kappa = 0.05;    ///< nearest-neighbor coupling
    double b = 0.2;         ///< actuation gain
    double noise_std = 0.05; ///< episode-start perturbation scale
    double dt_int = 0.01;   ///< integration step cap

    void validate() const;
};

/// One explicit (RK4) step of the lattice dynamics
///   dA_k/dt = (sigma + i omega) A_k - |A_k|^2 A_k
///             + kappa (A_{k+1} + A_{k-1} - 2 A_k) + b a_k
/// with periodic k. dt must not exceed cfg.dt_int.
std::vector<std::complex<double>> oscillator_step(
    const std::vector<std::complex<double>>& state, const std::vector<double>& actions,
    const OscillatorLatticeConfig& cfg, double dt);

class OscillatorEnv : public Environment {
public:
    OscillatorEnv(OscillatorLatticeConfig cfg, EpisodeConfig episode,
                  double action_bound = 1.0);

    int n_marl() const override { return cfg_.n_osc; }
    int obs_size() const override { return 6; } ///< (Re, Im) x 3 slices
    double action_bound() const override { return action_bound_; }
    const EpisodeConfig& episode() const override { return episode_; }

    std::vector<Observation> reset(uint64_t seed) override;
    StepResult step_action(const std::vector<double>& actions) override;
    bool done() const override { return actions_taken_ >= episode_.n_actions; }
    double lift_mean(int marl_id) const override;

    const std::vector<std::complex<double>>& state() const { return state_; }
    void set_state(const std::vector<std::complex<double>>& s);

private:
    std::vector<Observation> observations() const;

    OscillatorLatticeConfig cfg_;
    EpisodeConfig episode_;
    double action_bound_;
    std::vector<std::complex<double>> state_;
    std::vector<double> prev_action_;
    std::vector<RunningLiftMean> lift_;
    double time_ = 0.0;
    int actions_taken_ = 0;
    bool started_ = false;
};

// --- cylinder flow -------------------------------------------------------

/// Pressure-sensor layout around the cylinder: three rings of 24 probes
/// at radii {0.6, 0.85, 1.25} D plus an 18-probe wake rake, 90 in all.
std::vector<std::pair<double, double>> cylinder_probe_layout(const Body& body);

struct CylinderEnvConfig {
    Grid grid{640, 512, 32.0, 25.6};
    SolverConfig solver;
    Body body{9.6, 12.8, 1.0, 0.0, {}};
    EpisodeConfig episode;
    std::string baseline_prefix;  ///< reads <prefix>.dat and <prefix>.stats
    double perturb = 1e-3;        ///< episode-start velocity noise amplitude
    int n_marl = 1;               ///< a 2D domain has no spanwise slices

    void validate() const;
};

/// The jet-actuated cylinder wake wrapped as an Environment. Episodes
/// start from a stored statistically-converged unactuated snapshot plus
/// a seed-controlled solenoidal perturbation; actions ramp linearly over
/// the first 20% of each action window to avoid pressure impulses.
class CylinderEnv : public Environment {
public:
    explicit CylinderEnv(CylinderEnvConfig cfg);

    int n_marl() const override { return 1; }
    int obs_size() const override;
    double action_bound() const override { return cfg_.body.jets.max_speed; }
    const EpisodeConfig& episode() const override { return cfg_.episode; }

    std::vector<Observation> reset(uint64_t seed) override;
    StepResult step_action(const std::vector<double>& actions) override;
    bool done() const override { return actions_taken_ >= cfg_.episode.n_actions; }
    double lift_mean(int marl_id) const override;

    /// Unactuated reference statistics from the baseline sidecar file.
    const BaselineStats& baseline() const { return baseline_; }
    const Solver2d& solver() const { return *solver_; }

private:
    std::vector<Observation> observations();

    CylinderEnvConfig cfg_;
    std::unique_ptr<Solver2d> solver_;
    std::vector<std::pair<double, double>> probes_;
    BaselineStats baseline_;
    RunningLiftMean lift_;
    double episode_t0_ = 0.0;
    double prev_action_ = 0.0;
    int actions_taken_ = 0;
    bool started_ = false;
};

} // namespace afc
