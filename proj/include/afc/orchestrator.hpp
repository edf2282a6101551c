#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "afc/agent.hpp"
#include "afc/analysis.hpp"
#include "afc/channel.hpp"
#include "afc/env.hpp"

namespace afc {

enum class RunMode { inprocess, socket };
enum class EnvKind { oscillator, cylinder };

/// Complete description of a training or evaluation run: the worker farm
/// shape, episode timing, environment physics, reward weights and PPO
/// hyperparameters, parsed from one key = value file plus command-line
/// overrides.
struct RunConfig {
    int n_cfd = 1;                    ///< parallel simulations
    int n_marl = 1;                   ///< pseudo-environments per simulation
    EpisodeConfig episode;
    int n_training_steps = 0;
    uint64_t seed = 0;
    RunMode mode = RunMode::inprocess;
    EnvKind env_kind = EnvKind::oscillator;
    double action_bound = 0.3;        ///< |U_jet| cap, mirrored into env and policy
    RewardConfig reward;              ///< baselines are filled in at runtime
    AgentConfig ppo;                  ///< obs/act dims are derived, not configured
    OscillatorLatticeConfig oscillator; ///< n_osc always follows n_marl
    CylinderEnvConfig cylinder;
    std::string out_dir = "run";
    double reward_window = 5.0;       ///< trailing window for the learning curve
    double eval_duration = 60.0;
    double eval_transient = 15.0;     ///< cut before evaluation statistics
    double baseline_duration = 150.0; ///< unactuated settling run length
    double baseline_window = 100.0;   ///< averaging window of the baseline stats
    uint16_t port = 0;                ///< socket mode; 0 picks an ephemeral port

    void validate() const;
};

/// Parse a key = value config file ('#' comments, blank lines ignored).
/// `overrides` holds additional "key=value" strings applied afterwards.
/// Unknown keys raise ConfigError.
RunConfig parse_run_config(const std::string& path,
                           const std::vector<std::string>& overrides = {});

/// Same grammar, from an in-memory string.
RunConfig parse_run_config_text(const std::string& text,
                                const std::vector<std::string>& overrides = {});

/// Instantiate the environment a worker simulates. The oscillator lattice
/// size and the jet speed cap follow n_marl and action_bound.
std::unique_ptr<Environment> make_env(const RunConfig& cfg);

/// Blocking worker: simulates one environment and serves the wire
/// protocol until shutdown. Runs against an in-process or socket channel
/// alike; cfd_id tags every outgoing frame.
void worker_loop(Channel& ch, const RunConfig& cfg, uint32_t cfd_id);

/// One synchronized episode across every worker, flattened in
/// (cfd_id, marl_id) lexicographic order.
struct EpisodeRollout {
    std::vector<Trajectory> trajectories;
    std::vector<std::vector<double>> local_rewards; ///< per slot, per action step
    std::vector<double> final_window_local; ///< trailing reward-window means

    size_t slots() const { return trajectories.size(); }
};

/// Evaluation outcome: force statistics past the transient cut plus the
/// episode-mean rewards actually granted along the way.
struct EvalResult {
    AeroSummary summary;
    double mean_reward = 0.0;       ///< blended reward, mean over steps and slots
    double mean_local_reward = 0.0;
    double strouhal = 0.0;          ///< zero-crossing estimate; 0 if indeterminate
};

/// Coordinator owning the policy, the worker farm and the training loop.
/// Workers run as threads for both modes; in socket mode they connect
/// back over TCP loopback so the full framing path is exercised.
class Orchestrator {
public:
    explicit Orchestrator(RunConfig cfg);
    ~Orchestrator();
    Orchestrator(const Orchestrator&) = delete;
    Orchestrator& operator=(const Orchestrator&) = delete;

    const RunConfig& config() const { return cfg_; }
    Agent& agent() { return *agent_; }

    /// Roll out one episode with the current policy snapshot. Worker
    /// seeds derive from (master seed, training_step, cfd_id); action
    /// sampling order is fixed, so results depend only on those and the
    /// policy state.
    EpisodeRollout run_episode(int training_step);

    /// Full loop: rollout, learning-curve row per slot, normalizer
    /// refreeze, PPO update, checkpoint per step. A non-finite update
    /// halts training and keeps the last good checkpoint.
    void train();

    /// Deterministic-policy run of eval_duration convective units in a
    /// fresh environment; writes forces.csv and actions.csv into
    /// out_dir. An empty checkpoint path keeps current weights;
    /// zero_actions forces U_jet = 0 (unactuated reference).
    EvalResult evaluate(const std::string& checkpoint_path, bool zero_actions = false);

private:
    void start_workers();
    void stop_workers();
    std::vector<double> recv_state_round(int t, Rng& action_rng, EpisodeRollout& out);

    RunConfig cfg_;
    int obs_size_ = 0;
    std::unique_ptr<Agent> agent_;
    std::unique_ptr<TcpListener> listener_;
    std::vector<std::unique_ptr<Channel>> chans_; ///< indexed by cfd_id
    std::vector<std::thread> workers_;
};

/// Unactuated settling run of the configured cylinder: a brief
/// antisymmetric jet pulse trips vortex shedding, the flow then develops
/// for baseline_duration units. Writes <prefix>.dat, <prefix>.stats and
/// <prefix>_forces.csv; prints the resulting statistics. For the
/// oscillator kind the baselines are analytic and nothing is written.
void run_baseline(const RunConfig& cfg);

/// Reward weights with environment-specific baseline levels filled in:
/// sidecar statistics for the cylinder, the limit-cycle mean for the
/// oscillator lattice.
RewardConfig resolve_reward(const RunConfig& cfg, const Environment& env);

} // namespace afc
