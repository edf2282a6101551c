#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afc/mlp.hpp"
#include "afc/rng.hpp"

namespace afc {

struct AgentConfig {
    int obs_dim = 0;
    int act_dim = 1;
    int hidden = 512;
    double action_bound = 0.3;  ///< actions live in [-bound, bound]
    double lr = 3e-4;
    double clip = 0.2;
    int epochs = 10;
    int minibatch = 30;
    double gamma = 0.99;
    double lam = 0.95;          ///< advantage-estimation decay
    double entropy_coef = 1e-3;
    double value_coef = 0.5;
    double grad_clip = 0.5;     ///< global gradient-norm bound per network
    double init_action_std = 0.2; ///< initial policy std as fraction of bound

    void validate() const;
};

/// Per-component running mean/variance of observations (Welford). The
/// mapping used by normalize() is the explicitly frozen snapshot, so an
/// episode collected between freezes sees one consistent scaling.
class ObsNormalizer {
public:
    explicit ObsNormalizer(int dim);

    void observe(const std::vector<double>& obs);
    void freeze();
    std::vector<double> normalize(const std::vector<double>& obs) const;

    int dim() const { return dim_; }
    long count() const { return count_; }

    // Serialized state (running accumulators plus the frozen snapshot).
    std::vector<double> state() const;
    void restore(const std::vector<double>& state);

private:
    int dim_;
    long count_ = 0;
    std::vector<double> mean_, m2_;
    std::vector<double> frozen_mean_, frozen_std_;
};

/// One stochastic policy query: squashed action, the pre-squash draw the
/// update needs to recompute its likelihood, and the value estimate.
struct ActionSample {
    std::vector<double> obs_norm;
    std::vector<double> action;
    std::vector<double> raw;
    double log_prob = 0.0;
    double value = 0.0;
};

/// One worker-slot episode of experience, in collection order.
struct Trajectory {
    std::vector<std::vector<double>> obs;  ///< normalized observations
    std::vector<std::vector<double>> raw;  ///< pre-squash actions
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<double> dones;             ///< 1.0 where the episode ended
    double bootstrap_value = 0.0;          ///< V(s_T) when truncated

    size_t size() const { return rewards.size(); }
};

struct GaeResult {
    std::vector<double> advantages, returns;
};

/// Generalized advantage estimation over one trajectory; values carries
/// T entries, the bootstrap enters through (1 - done) at the last step.
GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values, const std::vector<double>& dones,
                      double bootstrap_value, double gamma, double lam);

/// PPO clipped objective for one sample (to be maximized).
double clipped_surrogate(double ratio, double advantage, double clip);

/// Flattened minibatch for the loss evaluation.
struct PpoBatch {
    int obs_dim = 0, act_dim = 0;
    std::vector<double> obs;          ///< n x obs_dim, normalized
    std::vector<double> raw;          ///< n x act_dim
    std::vector<double> old_log_prob; ///< n
    std::vector<double> advantage;    ///< n, already normalized
    std::vector<double> value_target; ///< n

    size_t size() const { return old_log_prob.size(); }
};

struct UpdateStats {
    double loss = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    double grad_norm = 0.0;
    bool skipped = false; ///< non-finite gradients; parameters untouched
};

/// Proximal-policy-optimization actor-critic with a squashed-Gaussian
/// policy: a = bound * tanh(raw), raw ~ N(mu(obs), exp(log_std)) with a
/// state-independent log_std, and the matching change-of-variables term
/// in the likelihood. Updates run Adam with bias correction and a global
/// gradient-norm clip per network.
class Agent {
public:
    Agent(AgentConfig cfg, uint64_t seed);

    const AgentConfig& config() const { return cfg_; }

    ActionSample act(const std::vector<double>& obs, Rng& rng);
    std::vector<double> act_mean(const std::vector<double>& obs);
    double value(const std::vector<double>& obs);

    /// One PPO update over the trajectories (advantage estimation,
    /// advantage normalization, shuffled minibatch epochs).
    UpdateStats update(const std::vector<Trajectory>& trajectories);

    /// Total loss on one batch; fills the actor/critic/log-std gradient
    /// buffers (used by update() and by gradient-verification tests).
    double loss_and_grads(const PpoBatch& batch, UpdateStats* stats = nullptr);

    ObsNormalizer& normalizer() { return normalizer_; }
    const ObsNormalizer& normalizer() const { return normalizer_; }

    Mlp& actor() { return actor_; }
    Mlp& critic() { return critic_; }
    std::vector<double>& log_std() { return log_std_; }
    std::vector<double>& log_std_grads() { return log_std_grads_; }

    /// Versioned little-endian binary checkpoint (networks, log_std,
    /// optimizer-free; includes the observation normalizer).
    void save(const std::string& path) const;
    void load(const std::string& path);

private:
    struct Adam {
        double lr;
        long t = 0;
        std::vector<double> m, v;
        Adam(size_t n, double lr_) : lr(lr_), m(n, 0.0), v(n, 0.0) {}
        void step(std::vector<double>& p, const std::vector<double>& g);
    };

    double sigma(int d) const;
    double log_prob_raw(const std::vector<double>& mu, const double* raw) const;

    AgentConfig cfg_;
    Mlp actor_, critic_;
    std::vector<double> log_std_, log_std_grads_;
    ObsNormalizer normalizer_;
    Adam adam_actor_, adam_log_std_, adam_critic_;
    Rng shuffle_rng_;
    MlpCache scratch_;
};

} // namespace afc
