#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "afc/agent.hpp"
#include "afc/errors.hpp"

using namespace afc;

namespace {

AgentConfig tiny_config(int obs, int act, int hidden) {
    AgentConfig cfg;
    cfg.obs_dim = obs;
    cfg.act_dim = act;
    cfg.hidden = hidden;
    return cfg;
}

/// A synthetic but well-conditioned PPO batch for gradient checks.
PpoBatch make_batch(Agent& agent, size_t n, uint64_t seed) {
    const AgentConfig& cfg = agent.config();
    PpoBatch b;
    b.obs_dim = cfg.obs_dim;
    b.act_dim = cfg.act_dim;
    Rng rng(seed);
    for (size_t s = 0; s < n; ++s) {
        std::vector<double> obs(cfg.obs_dim);
        for (double& x : obs) x = rng.normal();
        const ActionSample a = agent.act(obs, rng);
        b.obs.insert(b.obs.end(), a.obs_norm.begin(), a.obs_norm.end());
        b.raw.insert(b.raw.end(), a.raw.begin(), a.raw.end());
        // Shift the stored likelihood so ratios fall on both sides of 1,
        // with one sample pushed beyond the clip band.
        double shift = (s % 2 == 0) ? 0.08 : -0.08;
        if (s == 0) shift = 0.4;
        b.old_log_prob.push_back(a.log_prob + shift);
        b.advantage.push_back(rng.normal());
        b.value_target.push_back(rng.normal());
    }
    return b;
}

} // namespace

TEST_CASE("mlp forward and backward match a scalar recomputation") {
    Mlp net(2, 2, 1);
    // Layout: W1(2x2), b1(2), W2(2x2), b2(2), W3(1x2), b3(1).
    std::vector<double> p = {0.1, -0.2, 0.3, 0.4, 0.05, -0.05,
                             0.2, -0.1, 0.0, 0.3,  0.1,  0.2,
                             0.5, -0.4, 0.25};
    REQUIRE(net.params().size() == p.size());
    net.params() = p;

    const double x0 = 1.0, x1 = 2.0;
    const double z10 = p[0] * x0 + p[1] * x1 + p[4];
    const double z11 = p[2] * x0 + p[3] * x1 + p[5];
    const double a10 = std::tanh(z10), a11 = std::tanh(z11);
    const double z20 = p[6] * a10 + p[7] * a11 + p[10];
    const double z21 = p[8] * a10 + p[9] * a11 + p[11];
    const double a20 = std::tanh(z20), a21 = std::tanh(z21);
    const double y = p[12] * a20 + p[13] * a21 + p[14];

    MlpCache cache;
    const double x[2] = {x0, x1};
    net.forward(x, cache);
    CHECK(cache.y[0] == doctest::Approx(y).epsilon(1e-12));

    net.zero_grads();
    const double dy = 1.0;
    double dx[2];
    net.backward(cache, &dy, dx);

    const double da20 = p[12], da21 = p[13];
    const double dz20 = da20 * (1.0 - a20 * a20);
    const double dz21 = da21 * (1.0 - a21 * a21);
    const double da10 = dz20 * p[6] + dz21 * p[8];
    const double da11 = dz20 * p[7] + dz21 * p[9];
    const double dz10 = da10 * (1.0 - a10 * a10);
    const double dz11 = da11 * (1.0 - a11 * a11);

    const std::vector<double> expected = {
        dz10 * x0, dz10 * x1, dz11 * x0, dz11 * x1, dz10, dz11,
        dz20 * a10, dz20 * a11, dz21 * a10, dz21 * a11, dz20, dz21,
        a20, a21, 1.0};
    for (size_t k = 0; k < expected.size(); ++k) {
        CAPTURE(k);
        CHECK(net.grads()[k] == doctest::Approx(expected[k]).epsilon(1e-12));
    }
    CHECK(dx[0] == doctest::Approx(dz10 * p[0] + dz11 * p[2]).epsilon(1e-12));
    CHECK(dx[1] == doctest::Approx(dz10 * p[1] + dz11 * p[3]).epsilon(1e-12));
}

TEST_CASE("analytic gradients agree with finite differences") {
    Agent agent(tiny_config(3, 2, 8), 11);
    const PpoBatch batch = make_batch(agent, 6, 99);

    agent.loss_and_grads(batch);
    const std::vector<double> ga = agent.actor().grads();
    const std::vector<double> gl = agent.log_std_grads();
    const std::vector<double> gc = agent.critic().grads();

    const double h = 1e-5;
    auto fd_check = [&](std::vector<double>& params, const std::vector<double>& analytic) {
        for (size_t k = 0; k < params.size(); ++k) {
            const double save = params[k];
            params[k] = save + h;
            const double lp = agent.loss_and_grads(batch);
            params[k] = save - h;
            const double lm = agent.loss_and_grads(batch);
            params[k] = save;
            const double fd = (lp - lm) / (2.0 * h);
            const double scale = std::max({std::abs(fd), std::abs(analytic[k]), 1e-6});
            CAPTURE(k);
            CHECK(std::abs(fd - analytic[k]) / scale <= 1e-4);
        }
    };
    fd_check(agent.actor().params(), ga);
    fd_check(agent.log_std(), gl);
    fd_check(agent.critic().params(), gc);
}

TEST_CASE("zero advantages leave the policy untouched") {
    AgentConfig cfg = tiny_config(4, 1, 16);
    cfg.entropy_coef = 0.0;
    Agent agent(cfg, 5);

    Trajectory tr;
    Rng rng(7);
    for (int t = 0; t < 40; ++t) {
        std::vector<double> obs(4);
        for (double& x : obs) x = rng.normal();
        const ActionSample a = agent.act(obs, rng);
        tr.obs.push_back(a.obs_norm);
        tr.raw.push_back(a.raw);
        tr.log_probs.push_back(a.log_prob);
        tr.rewards.push_back(0.0);
        tr.values.push_back(0.0); // exactly consistent: every delta is zero
        tr.dones.push_back(t == 39 ? 1.0 : 0.0);
    }

    const std::vector<double> actor_before = agent.actor().params();
    const std::vector<double> log_std_before = agent.log_std();
    const UpdateStats st = agent.update({tr});
    CHECK_FALSE(st.skipped);
    CHECK(agent.actor().params() == actor_before);
    CHECK(agent.log_std() == log_std_before);
}

TEST_CASE("the clipped objective is the pessimistic branch") {
    CHECK(clipped_surrogate(1.5, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(clipped_surrogate(0.5, 1.0, 0.2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(clipped_surrogate(1.1, 1.0, 0.2) == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(clipped_surrogate(1.5, -1.0, 0.2) == doctest::Approx(-1.5).epsilon(1e-15));
    CHECK(clipped_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-15));
    CHECK(clipped_surrogate(1.0, 2.0, 0.2) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("squashed-gaussian density: normalized, and sampling matches it") {
    Agent agent(tiny_config(2, 1, 8), 21);
    const std::vector<double> obs = {0.4, -1.2};
    const double bound = agent.config().action_bound;

    // Mean and std straight from the policy head.
    MlpCache cache;
    agent.actor().forward(obs.data(), cache); // normalizer starts as identity
    const double mu = cache.y[0];
    const double sd = std::exp(agent.log_std()[0]);

    auto density = [&](double a) {
        const double r = std::atanh(a / bound);
        const double z = (r - mu) / sd;
        const double gauss =
            std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * 3.14159265358979324));
        return gauss / (bound * (1.0 - std::tanh(r) * std::tanh(r)));
    };

    const int M = 40000;
    const double da = 2.0 * bound / (M + 1);
    double mass = 0.0, mean_q = 0.0, second_q = 0.0;
    for (int k = 1; k <= M; ++k) {
        const double a = -bound + k * da;
        const double p = density(a);
        mass += p * da;
        mean_q += a * p * da;
        second_q += a * a * p * da;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-5));

    // Monte-Carlo moments from the actual sampler, with the density value
    // reported by act() cross-checked against the quadrature density.
    Rng rng(1234);
    const int N = 200000;
    double m1 = 0.0, m2 = 0.0, v1 = 0.0;
    std::vector<double> sample_a(N);
    for (int k = 0; k < N; ++k) {
        const ActionSample s = agent.act(obs, rng);
        sample_a[k] = s.action[0];
        m1 += s.action[0];
        m2 += s.action[0] * s.action[0];
        if (k < 50) { // spot-check the reported likelihood
            CHECK(std::exp(s.log_prob) ==
                  doctest::Approx(density(s.action[0])).epsilon(1e-9));
        }
    }
    m1 /= N;
    m2 /= N;
    double v2 = 0.0;
    for (int k = 0; k < N; ++k) {
        v1 += (sample_a[k] - m1) * (sample_a[k] - m1);
        const double sq = sample_a[k] * sample_a[k];
        v2 += (sq - m2) * (sq - m2);
    }
    const double se1 = std::sqrt(v1 / N / N);
    const double se2 = std::sqrt(v2 / N / N);
    CHECK(std::abs(m1 - mean_q) < 3.0 * se1);
    CHECK(std::abs(m2 - second_q) < 3.0 * se2);
}

TEST_CASE("advantage estimation matches hand-worked fixtures") {
    SUBCASE("terminal episode") {
        const GaeResult g = compute_gae({1.0, 1.0}, {0.5, 0.4}, {0.0, 1.0}, 0.3, 0.5, 0.5);
        CHECK(g.advantages[0] == doctest::Approx(0.85).epsilon(1e-12));
        CHECK(g.advantages[1] == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(g.returns[0] == doctest::Approx(1.35).epsilon(1e-12));
        CHECK(g.returns[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("truncated episode bootstraps the tail value") {
        const GaeResult g = compute_gae({1.0, 1.0}, {0.5, 0.4}, {0.0, 0.0}, 0.3, 0.5, 0.5);
        CHECK(g.advantages[1] == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(g.advantages[0] == doctest::Approx(0.8875).epsilon(1e-12));
        CHECK(g.returns[0] == doctest::Approx(1.3875).epsilon(1e-12));
    }
    SUBCASE("misaligned inputs are rejected") {
        CHECK_THROWS_AS((void)compute_gae({1.0}, {0.5, 0.4}, {1.0}, 0.0, 0.9, 0.9),
                        InputError);
    }
}

TEST_CASE("the agent solves a continuous bandit") {
    AgentConfig cfg = tiny_config(1, 1, 32);
    cfg.action_bound = 1.0;
    cfg.lr = 1e-3;
    cfg.minibatch = 32;
    Agent agent(cfg, 42);
    Rng rng(43);

    const std::vector<double> obs = {0.0};
    int solved_at = -1;
    for (int upd = 0; upd < 200; ++upd) {
        Trajectory tr;
        for (int k = 0; k < 64; ++k) {
            const ActionSample a = agent.act(obs, rng);
            const double r = -(a.action[0] - 0.3) * (a.action[0] - 0.3);
            tr.obs.push_back(a.obs_norm);
            tr.raw.push_back(a.raw);
            tr.log_probs.push_back(a.log_prob);
            tr.rewards.push_back(r);
            tr.values.push_back(a.value);
            tr.dones.push_back(1.0); // every pull is its own episode
        }
        const UpdateStats st = agent.update({tr});
        REQUIRE_FALSE(st.skipped);
        if (std::abs(agent.act_mean(obs)[0] - 0.3) < 0.05) {
            solved_at = upd;
            break;
        }
    }
    INFO("solved at update ", solved_at, " mean ", agent.act_mean(obs)[0]);
    CHECK(solved_at >= 0);
    CHECK(std::abs(agent.act_mean(obs)[0] - 0.3) < 0.05);
}

TEST_CASE("checkpoints round-trip exactly and reject foreign files") {
    AgentConfig cfg = tiny_config(5, 2, 12);
    Agent a(cfg, 77);
    // Move parameters and normalizer off their initial state.
    Rng rng(78);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> obs(5);
        for (double& x : obs) x = rng.normal(2.0, 3.0);
        a.normalizer().observe(obs);
    }
    a.normalizer().freeze();
    {
        Trajectory tr;
        for (int t = 0; t < 16; ++t) {
            std::vector<double> obs(5);
            for (double& x : obs) x = rng.normal();
            const ActionSample s = a.act(obs, rng);
            tr.obs.push_back(s.obs_norm);
            tr.raw.push_back(s.raw);
            tr.log_probs.push_back(s.log_prob);
            tr.rewards.push_back(rng.normal());
            tr.values.push_back(s.value);
            tr.dones.push_back(t == 15 ? 1.0 : 0.0);
        }
        (void)a.update({tr});
    }

    const std::string path = "agent_ckpt_test.bin";
    a.save(path);
    Agent b(cfg, 999); // different seed: different initial parameters
    b.load(path);
    CHECK(b.actor().params() == a.actor().params());
    CHECK(b.critic().params() == a.critic().params());
    CHECK(b.log_std() == a.log_std());
    CHECK(b.normalizer().state() == a.normalizer().state());

    std::vector<double> obs = {0.1, -0.2, 0.3, 0.4, 2.0};
    CHECK(b.act_mean(obs) == a.act_mean(obs));

    Agent wrong(tiny_config(4, 2, 12), 1);
    CHECK_THROWS_AS(wrong.load(path), IoError);

    std::ofstream junk("agent_junk.bin", std::ios::binary);
    junk << "definitely not a checkpoint";
    junk.close();
    CHECK_THROWS_AS(b.load("agent_junk.bin"), IoError);

    std::ofstream trunc("agent_trunc.bin", std::ios::binary);
    std::ifstream src(path, std::ios::binary);
    std::vector<char> head(64);
    src.read(head.data(), 64);
    trunc.write(head.data(), src.gcount());
    trunc.close();
    CHECK_THROWS_AS(b.load("agent_trunc.bin"), IoError);

    CHECK_THROWS_AS(b.load("agent_no_such_file.bin"), IoError);
    std::remove(path.c_str());
    std::remove("agent_junk.bin");
    std::remove("agent_trunc.bin");
}

TEST_CASE("observation scaling freezes explicitly and clips outliers") {
    ObsNormalizer norm(2);
    norm.observe({1.0, 10.0});
    norm.observe({3.0, 30.0});
    norm.observe({5.0, 50.0});
    CHECK(norm.count() == 3);

    // Before any freeze the mapping is the identity.
    CHECK(norm.normalize({2.0, 3.0}) == std::vector<double>{2.0, 3.0});

    norm.freeze();
    const double sd0 = std::sqrt(8.0 / 3.0 + 1e-8);
    const double sd1 = std::sqrt(800.0 / 3.0 + 1e-8);
    auto n1 = norm.normalize({3.0, 30.0});
    CHECK(n1[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(n1[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    auto n2 = norm.normalize({5.0, 50.0});
    CHECK(n2[0] == doctest::Approx(2.0 / sd0).epsilon(1e-12));
    CHECK(n2[1] == doctest::Approx(20.0 / sd1).epsilon(1e-12));
    CHECK(norm.normalize({1e6, 30.0})[0] == 10.0);  // clipped
    CHECK(norm.normalize({-1e6, 30.0})[0] == -10.0);

    // New samples only take effect at the next freeze.
    const auto frozen = norm.normalize({4.0, 40.0});
    norm.observe({100.0, 100.0});
    CHECK(norm.normalize({4.0, 40.0}) == frozen);
    norm.freeze();
    CHECK(norm.normalize({4.0, 40.0}) != frozen);

    CHECK_THROWS_AS(norm.observe({1.0}), InputError);
    CHECK_THROWS_AS((void)norm.normalize({1.0, 2.0, 3.0}), InputError);
}

TEST_CASE("a non-finite batch aborts the update and keeps the parameters") {
    Agent agent(tiny_config(3, 1, 8), 3);
    Rng rng(4);
    Trajectory tr;
    for (int t = 0; t < 10; ++t) {
        std::vector<double> obs(3);
        for (double& x : obs) x = rng.normal();
        const ActionSample s = agent.act(obs, rng);
        tr.obs.push_back(s.obs_norm);
        tr.raw.push_back(s.raw);
        tr.log_probs.push_back(s.log_prob);
        tr.rewards.push_back(t == 5 ? std::nan("") : 0.1);
        tr.values.push_back(s.value);
        tr.dones.push_back(t == 9 ? 1.0 : 0.0);
    }
    const std::vector<double> actor_before = agent.actor().params();
    const std::vector<double> critic_before = agent.critic().params();
    const UpdateStats st = agent.update({tr});
    CHECK(st.skipped);
    CHECK(agent.actor().params() == actor_before);
    CHECK(agent.critic().params() == critic_before);
}

TEST_CASE("updates are reproducible for equal seeds") {
    auto run = [](uint64_t seed) {
        Agent agent(tiny_config(3, 1, 8), seed);
        Rng rng(100);
        Trajectory tr;
        for (int t = 0; t < 20; ++t) {
            std::vector<double> obs(3);
            for (double& x : obs) x = rng.normal();
            const ActionSample s = agent.act(obs, rng);
            tr.obs.push_back(s.obs_norm);
            tr.raw.push_back(s.raw);
            tr.log_probs.push_back(s.log_prob);
            tr.rewards.push_back(std::sin(0.3 * t));
            tr.values.push_back(s.value);
            tr.dones.push_back(t == 19 ? 1.0 : 0.0);
        }
        (void)agent.update({tr});
        return agent.actor().params();
    };
    CHECK(run(12345) == run(12345));
    CHECK(run(12345) != run(54321));
}

TEST_CASE("agent configuration validation") {
    CHECK_THROWS_AS(Agent(tiny_config(0, 1, 8), 1), ConfigError);
    AgentConfig bad = tiny_config(2, 1, 8);
    bad.clip = 1.5;
    CHECK_THROWS_AS(Agent(bad, 1), ConfigError);
    bad = tiny_config(2, 1, 8);
    bad.lr = 0.0;
    CHECK_THROWS_AS(Agent(bad, 1), ConfigError);

    Agent ok(tiny_config(2, 1, 8), 1);
    Rng rng(1);
    CHECK_THROWS_AS((void)ok.act({1.0, 2.0, 3.0}, rng), InputError);
    CHECK_THROWS_AS((void)ok.update({}), InputError);
}
