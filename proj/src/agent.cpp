#include "afc/agent.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "afc/errors.hpp"

namespace afc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLogStdMin = -5.0, kLogStdMax = 2.0;

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// log(1 - tanh(r)^2), stable for large |r|.
double log_one_minus_tanh_sq(double r) {
    return 2.0 * (std::log(2.0) - r - softplus(-2.0 * r));
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// --- little-endian binary IO --------------------------------------------

void put_u64(std::ostream& out, uint64_t v) {
    std::array<char, 8> b;
    for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
    out.write(b.data(), 8);
}

void put_f64(std::ostream& out, double x) { put_u64(out, std::bit_cast<uint64_t>(x)); }

uint64_t get_u64(std::istream& in, const std::string& path) {
    std::array<unsigned char, 8> b;
    if (!in.read(reinterpret_cast<char*>(b.data()), 8))
        throw IoError(path + ": truncated checkpoint");
    uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<uint64_t>(b[k]) << (8 * k);
    return v;
}

double get_f64(std::istream& in, const std::string& path) {
    return std::bit_cast<double>(get_u64(in, path));
}

constexpr char kMagic[8] = {'A', 'F', 'C', 'P', 'P', 'O', 'C', 'K'};
constexpr uint64_t kCkptVersion = 1;

} // namespace

void AgentConfig::validate() const {
    if (obs_dim < 1 || act_dim < 1 || hidden < 1)
        throw ConfigError("agent: obs_dim, act_dim, and hidden must be positive");
    if (!(action_bound > 0.0)) throw ConfigError("agent: action_bound must be positive");
    if (!(lr > 0.0)) throw ConfigError("agent: learning rate must be positive");
    if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("agent: clip must lie in (0, 1)");
    if (epochs < 1 || minibatch < 1)
        throw ConfigError("agent: epochs and minibatch must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0) || !(lam >= 0.0 && lam <= 1.0))
        throw ConfigError("agent: gamma in (0, 1], lambda in [0, 1]");
    if (entropy_coef < 0.0 || value_coef < 0.0 || grad_clip <= 0.0)
        throw ConfigError("agent: coefficients must be non-negative, grad_clip positive");
    if (!(init_action_std > 0.0 && init_action_std < 5.0))
        throw ConfigError("agent: init_action_std must lie in (0, 5)");
}

// --- ObsNormalizer -------------------------------------------------------

ObsNormalizer::ObsNormalizer(int dim)
    : dim_(dim), mean_(dim, 0.0), m2_(dim, 0.0), frozen_mean_(dim, 0.0),
      frozen_std_(dim, 1.0) {
    if (dim < 1) throw ConfigError("normalizer: dimension must be positive");
}

void ObsNormalizer::observe(const std::vector<double>& obs) {
    if (static_cast<int>(obs.size()) != dim_)
        throw InputError("normalizer: observation size mismatch");
    ++count_;
    for (int d = 0; d < dim_; ++d) {
        const double delta = obs[d] - mean_[d];
        mean_[d] += delta / static_cast<double>(count_);
        m2_[d] += delta * (obs[d] - mean_[d]);
    }
}

void ObsNormalizer::freeze() {
    if (count_ == 0) return; // keep the identity mapping
    for (int d = 0; d < dim_; ++d) {
        frozen_mean_[d] = mean_[d];
        frozen_std_[d] = std::sqrt(m2_[d] / static_cast<double>(count_) + 1e-8);
    }
}

std::vector<double> ObsNormalizer::normalize(const std::vector<double>& obs) const {
    if (static_cast<int>(obs.size()) != dim_)
        throw InputError("normalizer: observation size mismatch");
    std::vector<double> out(obs.size());
    for (int d = 0; d < dim_; ++d)
        out[d] = std::clamp((obs[d] - frozen_mean_[d]) / frozen_std_[d], -10.0, 10.0);
    return out;
}

std::vector<double> ObsNormalizer::state() const {
    std::vector<double> s;
    s.reserve(1 + 4 * static_cast<size_t>(dim_));
    s.push_back(static_cast<double>(count_));
    s.insert(s.end(), mean_.begin(), mean_.end());
    s.insert(s.end(), m2_.begin(), m2_.end());
    s.insert(s.end(), frozen_mean_.begin(), frozen_mean_.end());
    s.insert(s.end(), frozen_std_.begin(), frozen_std_.end());
    return s;
}

void ObsNormalizer::restore(const std::vector<double>& s) {
    const size_t n = static_cast<size_t>(dim_);
    if (s.size() != 1 + 4 * n) throw IoError("normalizer: bad serialized state size");
    count_ = static_cast<long>(s[0]);
    std::copy_n(s.begin() + 1, n, mean_.begin());
    std::copy_n(s.begin() + 1 + n, n, m2_.begin());
    std::copy_n(s.begin() + 1 + 2 * n, n, frozen_mean_.begin());
    std::copy_n(s.begin() + 1 + 3 * n, n, frozen_std_.begin());
}

// --- advantage estimation -----------------------------------------------

GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values, const std::vector<double>& dones,
                      double bootstrap_value, double gamma, double lam) {
    const size_t T = rewards.size();
    if (values.size() != T || dones.size() != T)
        throw InputError("advantage estimation: rewards, values, dones must align");
    GaeResult out;
    out.advantages.assign(T, 0.0);
    out.returns.assign(T, 0.0);
    double acc = 0.0;
    for (size_t t = T; t-- > 0;) {
        const double nonterm = 1.0 - dones[t];
        const double next_v = (t + 1 < T) ? values[t + 1] : bootstrap_value;
        const double delta = rewards[t] + gamma * next_v * nonterm - values[t];
        acc = delta + gamma * lam * nonterm * acc;
        out.advantages[t] = acc;
        out.returns[t] = acc + values[t];
    }
    return out;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
    return std::min(ratio * advantage, clipped);
}

// --- Agent ---------------------------------------------------------------

void Agent::Adam::step(std::vector<double>& p, const std::vector<double>& g) {
    ++t;
    const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t));
    for (size_t k = 0; k < p.size(); ++k) {
        m[k] = 0.9 * m[k] + 0.1 * g[k];
        v[k] = 0.999 * v[k] + 0.001 * g[k] * g[k];
        p[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + 1e-8);
    }
}

Agent::Agent(AgentConfig cfg, uint64_t seed)
    : cfg_(cfg), actor_(cfg.obs_dim, cfg.hidden, cfg.act_dim),
      critic_(cfg.obs_dim, cfg.hidden, 1),
      log_std_(static_cast<size_t>(cfg.act_dim), std::log(cfg.init_action_std)),
      log_std_grads_(static_cast<size_t>(cfg.act_dim), 0.0), normalizer_(cfg.obs_dim),
      adam_actor_(actor_.params().size(), cfg.lr),
      adam_log_std_(log_std_.size(), cfg.lr),
      adam_critic_(critic_.params().size(), cfg.lr),
      shuffle_rng_(derive_seed({seed, 3})) {
    cfg_.validate();
    Rng init_actor(derive_seed({seed, 1}));
    Rng init_critic(derive_seed({seed, 2}));
    actor_.init(init_actor, 0.01);
    critic_.init(init_critic, 1.0);
}

double Agent::sigma(int d) const {
    return std::exp(std::clamp(log_std_[static_cast<size_t>(d)], kLogStdMin, kLogStdMax));
}

double Agent::log_prob_raw(const std::vector<double>& mu, const double* raw) const {
    double lp = 0.0;
    for (int d = 0; d < cfg_.act_dim; ++d) {
        const double lc = std::clamp(log_std_[d], kLogStdMin, kLogStdMax);
        const double s = std::exp(lc);
        const double z = (raw[d] - mu[d]) / s;
        lp += -0.5 * z * z - lc - 0.5 * kLog2Pi;
        lp -= std::log(cfg_.action_bound) + log_one_minus_tanh_sq(raw[d]);
    }
    return lp;
}

ActionSample Agent::act(const std::vector<double>& obs, Rng& rng) {
    ActionSample out;
    out.obs_norm = normalizer_.normalize(obs);
    actor_.forward(out.obs_norm.data(), scratch_);
    out.raw.resize(cfg_.act_dim);
    out.action.resize(cfg_.act_dim);
    for (int d = 0; d < cfg_.act_dim; ++d) {
        out.raw[d] = scratch_.y[d] + sigma(d) * rng.normal();
        out.action[d] = cfg_.action_bound * std::tanh(out.raw[d]);
    }
    out.log_prob = log_prob_raw(scratch_.y, out.raw.data());
    critic_.forward(out.obs_norm.data(), scratch_);
    out.value = scratch_.y[0];
    return out;
}

std::vector<double> Agent::act_mean(const std::vector<double>& obs) {
    const std::vector<double> norm = normalizer_.normalize(obs);
    actor_.forward(norm.data(), scratch_);
    std::vector<double> a(cfg_.act_dim);
    for (int d = 0; d < cfg_.act_dim; ++d)
        a[d] = cfg_.action_bound * std::tanh(scratch_.y[d]);
    return a;
}

double Agent::value(const std::vector<double>& obs) {
    const std::vector<double> norm = normalizer_.normalize(obs);
    critic_.forward(norm.data(), scratch_);
    return scratch_.y[0];
}

double Agent::loss_and_grads(const PpoBatch& batch, UpdateStats* stats) {
    const size_t n = batch.size();
    if (n == 0) throw InputError("ppo: empty batch");
    if (batch.obs_dim != cfg_.obs_dim || batch.act_dim != cfg_.act_dim ||
        batch.obs.size() != n * static_cast<size_t>(cfg_.obs_dim) ||
        batch.raw.size() != n * static_cast<size_t>(cfg_.act_dim) ||
        batch.advantage.size() != n || batch.value_target.size() != n)
        throw InputError("ppo: inconsistent batch shapes");

    actor_.zero_grads();
    critic_.zero_grads();
    std::fill(log_std_grads_.begin(), log_std_grads_.end(), 0.0);

    const double inv_n = 1.0 / static_cast<double>(n);
    double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0, kl = 0.0;
    double clipped_count = 0.0;
    std::vector<double> dmu(cfg_.act_dim);
    MlpCache cache;

    for (size_t s = 0; s < n; ++s) {
        const double* obs = batch.obs.data() + s * static_cast<size_t>(cfg_.obs_dim);
        const double* raw = batch.raw.data() + s * static_cast<size_t>(cfg_.act_dim);
        const double A = batch.advantage[s];

        actor_.forward(obs, cache);
        const std::vector<double>& mu = cache.y;
        const double lp = log_prob_raw(mu, raw);
        const double ratio = std::exp(lp - batch.old_log_prob[s]);
        const double unclipped = ratio * A;
        const double clipped =
            std::clamp(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip) * A;
        const double surr = std::min(unclipped, clipped);
        policy_loss -= surr * inv_n;
        kl += (batch.old_log_prob[s] - lp) * inv_n;
        if (unclipped > clipped) clipped_count += 1.0;

        // d(loss)/d(log pi) for the clipped objective.
        const double w = (unclipped <= clipped) ? unclipped : 0.0;
        for (int d = 0; d < cfg_.act_dim; ++d) {
            const double lc = std::clamp(log_std_[d], kLogStdMin, kLogStdMax);
            const double sd = std::exp(lc);
            const double z = (raw[d] - mu[d]) / sd;
            dmu[d] = -w * inv_n * (z / sd);
            const bool open = log_std_[d] > kLogStdMin && log_std_[d] < kLogStdMax;
            if (open) {
                log_std_grads_[d] += -w * inv_n * (z * z - 1.0);
                log_std_grads_[d] += -cfg_.entropy_coef * inv_n;
            }
            entropy += (lc + 0.5 * (kLog2Pi + 1.0)) * inv_n;
        }
        actor_.backward(cache, dmu.data());

        critic_.forward(obs, cache);
        const double verr = cache.y[0] - batch.value_target[s];
        value_loss += 0.5 * verr * verr * inv_n;
        const double dv = cfg_.value_coef * verr * inv_n;
        critic_.backward(cache, &dv);
    }

    if (stats != nullptr) {
        stats->policy_loss = policy_loss;
        stats->value_loss = value_loss;
        stats->entropy = entropy;
        stats->approx_kl = kl;
        stats->clip_fraction = clipped_count * inv_n;
    }
    const double loss =
        policy_loss + cfg_.value_coef * value_loss - cfg_.entropy_coef * entropy;
    if (stats != nullptr) stats->loss = loss;
    return loss;
}

UpdateStats Agent::update(const std::vector<Trajectory>& trajectories) {
    PpoBatch full;
    full.obs_dim = cfg_.obs_dim;
    full.act_dim = cfg_.act_dim;
    for (const Trajectory& tr : trajectories) {
        const size_t T = tr.size();
        if (tr.obs.size() != T || tr.raw.size() != T || tr.log_probs.size() != T ||
            tr.values.size() != T || tr.dones.size() != T)
            throw InputError("ppo: trajectory arrays must align");
        const GaeResult gae = compute_gae(tr.rewards, tr.values, tr.dones,
                                          tr.bootstrap_value, cfg_.gamma, cfg_.lam);
        for (size_t t = 0; t < T; ++t) {
            if (static_cast<int>(tr.obs[t].size()) != cfg_.obs_dim ||
                static_cast<int>(tr.raw[t].size()) != cfg_.act_dim)
                throw InputError("ppo: trajectory entry dimension mismatch");
            full.obs.insert(full.obs.end(), tr.obs[t].begin(), tr.obs[t].end());
            full.raw.insert(full.raw.end(), tr.raw[t].begin(), tr.raw[t].end());
            full.old_log_prob.push_back(tr.log_probs[t]);
            full.advantage.push_back(gae.advantages[t]);
            full.value_target.push_back(gae.returns[t]);
        }
    }
    const size_t n = full.size();
    if (n == 0) throw InputError("ppo: no experience to update from");

    double amean = 0.0;
    for (double a : full.advantage) amean += a;
    amean /= static_cast<double>(n);
    double avar = 0.0;
    for (double a : full.advantage) avar += (a - amean) * (a - amean);
    const double astd = std::sqrt(avar / static_cast<double>(n));
    for (double& a : full.advantage) a = (a - amean) / (astd + 1e-8);

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    UpdateStats total;
    int evals = 0;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        for (size_t k = n; k > 1; --k)
            std::swap(order[k - 1], order[shuffle_rng_.uniform_u64(k)]);
        for (size_t start = 0; start < n; start += static_cast<size_t>(cfg_.minibatch)) {
            const size_t stop = std::min(n, start + static_cast<size_t>(cfg_.minibatch));
            PpoBatch mb;
            mb.obs_dim = cfg_.obs_dim;
            mb.act_dim = cfg_.act_dim;
            for (size_t k = start; k < stop; ++k) {
                const size_t s = order[k];
                const double* o = full.obs.data() + s * static_cast<size_t>(cfg_.obs_dim);
                const double* r = full.raw.data() + s * static_cast<size_t>(cfg_.act_dim);
                mb.obs.insert(mb.obs.end(), o, o + cfg_.obs_dim);
                mb.raw.insert(mb.raw.end(), r, r + cfg_.act_dim);
                mb.old_log_prob.push_back(full.old_log_prob[s]);
                mb.advantage.push_back(full.advantage[s]);
                mb.value_target.push_back(full.value_target[s]);
            }

            UpdateStats st;
            const double loss = loss_and_grads(mb, &st);
            if (!std::isfinite(loss) || !all_finite(actor_.grads()) ||
                !all_finite(critic_.grads()) || !all_finite(log_std_grads_)) {
                total.skipped = true;
                return total; // parameters left untouched by this batch
            }

            double gn2 = 0.0;
            for (double g : actor_.grads()) gn2 += g * g;
            for (double g : log_std_grads_) gn2 += g * g;
            const double gn = std::sqrt(gn2);
            if (gn > cfg_.grad_clip) {
                const double sc = cfg_.grad_clip / gn;
                for (double& g : actor_.grads()) g *= sc;
                for (double& g : log_std_grads_) g *= sc;
            }
            double cn2 = 0.0;
            for (double g : critic_.grads()) cn2 += g * g;
            const double cn = std::sqrt(cn2);
            if (cn > cfg_.grad_clip) {
                const double sc = cfg_.grad_clip / cn;
                for (double& g : critic_.grads()) g *= sc;
            }

            adam_actor_.step(actor_.params(), actor_.grads());
            adam_log_std_.step(log_std_, log_std_grads_);
            adam_critic_.step(critic_.params(), critic_.grads());

            total.loss += st.loss;
            total.policy_loss += st.policy_loss;
            total.value_loss += st.value_loss;
            total.entropy += st.entropy;
            total.approx_kl += st.approx_kl;
            total.clip_fraction += st.clip_fraction;
            total.grad_norm += gn;
            ++evals;
        }
    }
    if (evals > 0) {
        const double inv = 1.0 / evals;
        total.loss *= inv;
        total.policy_loss *= inv;
        total.value_loss *= inv;
        total.entropy *= inv;
        total.approx_kl *= inv;
        total.clip_fraction *= inv;
        total.grad_norm *= inv;
    }
    return total;
}

void Agent::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kMagic, 8);
    put_u64(out, kCkptVersion);
    put_u64(out, static_cast<uint64_t>(cfg_.obs_dim));
    put_u64(out, static_cast<uint64_t>(cfg_.act_dim));
    put_u64(out, static_cast<uint64_t>(cfg_.hidden));
    put_f64(out, cfg_.action_bound);

    auto put_block = [&](const std::vector<double>& v) {
        put_u64(out, v.size());
        for (double x : v) put_f64(out, x);
    };
    put_block(actor_.params());
    put_block(log_std_);
    put_block(critic_.params());
    put_block(normalizer_.state());
    if (!out) throw IoError("failed writing " + path);
}

void Agent::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError(path + ": not an agent checkpoint");
    if (get_u64(in, path) != kCkptVersion)
        throw IoError(path + ": unsupported checkpoint version");
    if (get_u64(in, path) != static_cast<uint64_t>(cfg_.obs_dim) ||
        get_u64(in, path) != static_cast<uint64_t>(cfg_.act_dim) ||
        get_u64(in, path) != static_cast<uint64_t>(cfg_.hidden))
        throw IoError(path + ": checkpoint shape does not match the agent");
    (void)get_f64(in, path); // action bound is advisory

    auto get_block = [&](size_t expected) {
        if (get_u64(in, path) != expected)
            throw IoError(path + ": checkpoint block size mismatch");
        std::vector<double> v(expected);
        for (double& x : v) x = get_f64(in, path);
        return v;
    };
    actor_.params() = get_block(actor_.params().size());
    log_std_ = get_block(log_std_.size());
    critic_.params() = get_block(critic_.params().size());
    std::vector<double> norm =
        get_block(1 + 4 * static_cast<size_t>(cfg_.obs_dim));
    normalizer_.restore(norm);
}

} // namespace afc
