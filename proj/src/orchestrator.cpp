#include "afc/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "afc/errors.hpp"
#include "afc/rng.hpp"

namespace afc {

namespace fs = std::filesystem;

namespace {

// 64-bit seeds ride in two exactly-representable 32-bit halves.
double seed_hi(uint64_t s) { return static_cast<double>(s >> 32); }
double seed_lo(uint64_t s) { return static_cast<double>(s & 0xffffffffULL); }

uint64_t join_seed(double hi, double lo) {
    if (!(hi >= 0.0 && hi < 4294967296.0) || !(lo >= 0.0 && lo < 4294967296.0) ||
        hi != std::floor(hi) || lo != std::floor(lo))
        throw ProtocolError("hello: malformed seed halves");
    return (static_cast<uint64_t>(hi) << 32) | static_cast<uint64_t>(lo);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

} // namespace

// --- configuration -------------------------------------------------------

void RunConfig::validate() const {
    if (n_cfd < 1) throw ConfigError("run: n_cfd must be at least 1");
    if (n_marl < 1) throw ConfigError("run: n_marl must be at least 1");
    if (n_training_steps < 0) throw ConfigError("run: n_training_steps must be >= 0");
    episode.validate();
    reward.validate();
    if (!(action_bound > 0.0)) throw ConfigError("run: action_bound must be positive");
    if (!(reward_window > 0.0)) throw ConfigError("run: reward_window must be positive");
    if (!(eval_transient >= 0.0) || !(eval_duration > eval_transient))
        throw ConfigError("run: eval_duration must exceed eval_transient >= 0");
    if (!(baseline_window > 0.0) || !(baseline_duration >= baseline_window))
        throw ConfigError("run: baseline_duration must cover baseline_window > 0");
    if (out_dir.empty()) throw ConfigError("run: out_dir must not be empty");
    if (env_kind == EnvKind::oscillator) {
        auto oc = oscillator;
        oc.n_osc = n_marl;
        oc.validate();
    } else {
        if (n_marl != 1)
            throw ConfigError("run: a 2D cylinder has no spanwise slices; n_marl must be 1");
        auto cc = cylinder;
        cc.episode = episode;
        cc.body.jets.max_speed = action_bound;
        cc.grid.validate();
        cc.body.validate();
        cc.solver.validate();
    }
}

namespace {

long to_long(const std::string& key, const std::string& val) {
    try {
        size_t pos = 0;
        const long v = std::stol(val, &pos);
        if (pos != val.size()) throw std::invalid_argument(val);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": not an integer: '" + val + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& val) {
    try {
        size_t pos = 0;
        const uint64_t v = std::stoull(val, &pos);
        if (pos != val.size()) throw std::invalid_argument(val);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": not an unsigned integer: '" + val + "'");
    }
}

double to_f(const std::string& key, const std::string& val) {
    try {
        size_t pos = 0;
        const double v = std::stod(val, &pos);
        if (pos != val.size()) throw std::invalid_argument(val);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": not a number: '" + val + "'");
    }
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& config_keys() {
    auto f = [](double RunConfig::*m) {
        return Setter([m](RunConfig& c, const std::string& k, const std::string& v) {
            c.*m = to_f(k, v);
        });
    };
    auto i = [](int RunConfig::*m) {
        return Setter([m](RunConfig& c, const std::string& k, const std::string& v) {
            c.*m = static_cast<int>(to_long(k, v));
        });
    };
    static const std::map<std::string, Setter> keys = {
        {"n_cfd", i(&RunConfig::n_cfd)},
        {"n_marl", i(&RunConfig::n_marl)},
        {"n_training_steps", i(&RunConfig::n_training_steps)},
        {"seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.seed = to_u64(k, v);
         }},
        {"mode",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "inprocess" || v == "in-process") c.mode = RunMode::inprocess;
             else if (v == "socket") c.mode = RunMode::socket;
             else throw ConfigError(k + ": expected 'inprocess' or 'socket', got '" + v + "'");
         }},
        {"env",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "oscillator") c.env_kind = EnvKind::oscillator;
             else if (v == "cylinder") c.env_kind = EnvKind::cylinder;
             else throw ConfigError(k + ": expected 'oscillator' or 'cylinder', got '" + v + "'");
         }},
        {"action_bound", f(&RunConfig::action_bound)},
        {"out_dir",
         [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
        {"port",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             const uint64_t p = to_u64(k, v);
             if (p > 65535) throw ConfigError(k + ": out of range: '" + v + "'");
             c.port = static_cast<uint16_t>(p);
         }},
        {"reward_window", f(&RunConfig::reward_window)},
        {"episode.T_eps",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.episode.T_eps = to_f(k, v);
         }},
        {"episode.n_actions",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.episode.n_actions = static_cast<int>(to_long(k, v));
         }},
        {"reward.alpha",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.reward.alpha = to_f(k, v);
         }},
        {"reward.beta",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.reward.beta = to_f(k, v);
         }},
        {"reward.gamma",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.reward.gamma = to_f(k, v);
         }},
        {"ppo.hidden",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.hidden = static_cast<int>(to_long(k, v));
         }},
        {"ppo.lr",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.lr = to_f(k, v);
         }},
        {"ppo.clip",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.clip = to_f(k, v);
         }},
        {"ppo.epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.epochs = static_cast<int>(to_long(k, v));
         }},
        {"ppo.minibatch",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.minibatch = static_cast<int>(to_long(k, v));
         }},
        {"ppo.gamma",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.gamma = to_f(k, v);
         }},
        {"ppo.lam",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.lam = to_f(k, v);
         }},
        {"ppo.entropy_coef",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.entropy_coef = to_f(k, v);
         }},
        {"ppo.value_coef",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.value_coef = to_f(k, v);
         }},
        {"ppo.grad_clip",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.grad_clip = to_f(k, v);
         }},
        {"ppo.init_action_std",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ppo.init_action_std = to_f(k, v);
         }},
        {"oscillator.sigma",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.oscillator.sigma = to_f(k, v);
         }},
        {"oscillator.omega",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.oscillator.omega = to_f(k, v);
         }},
        {"oscillator.kappa",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.oscillator.kappa = to_f(k, v);
         }},
        {"oscillator.b",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.oscillator.b = to_f(k, v);
         }},
        {"oscillator.noise_std",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.oscillator.noise_std = to_f(k, v);
         }},
        {"oscillator.dt_int",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.oscillator.dt_int = to_f(k, v);
         }},
        {"cylinder.nx",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.grid.nx = static_cast<size_t>(to_long(k, v));
         }},
        {"cylinder.ny",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.grid.ny = static_cast<size_t>(to_long(k, v));
         }},
        {"cylinder.Lx",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.grid.Lx = to_f(k, v);
         }},
        {"cylinder.Ly",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.grid.Ly = to_f(k, v);
         }},
        {"cylinder.xc",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.body.xc = to_f(k, v);
         }},
        {"cylinder.yc",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.body.yc = to_f(k, v);
         }},
        {"cylinder.D",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.body.D = to_f(k, v);
         }},
        {"cylinder.Re",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.solver.Re = to_f(k, v);
         }},
        {"cylinder.cfl",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.solver.cfl = to_f(k, v);
         }},
        {"cylinder.perturb",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.cylinder.perturb = to_f(k, v);
         }},
        {"cylinder.baseline_prefix",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.cylinder.baseline_prefix = v;
         }},
        {"eval.duration", f(&RunConfig::eval_duration)},
        {"eval.transient", f(&RunConfig::eval_transient)},
        {"baseline.duration", f(&RunConfig::baseline_duration)},
        {"baseline.window", f(&RunConfig::baseline_window)},
    };
    return keys;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& val,
              const std::string& where) {
    const auto& keys = config_keys();
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    it->second(cfg, key, val);
}

} // namespace

RunConfig parse_run_config_text(const std::string& text,
                                const std::vector<std::string>& overrides) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        apply_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                 "config line " + std::to_string(lineno));
    }
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override: expected key=value, got '" + ov + "'");
        apply_kv(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)), "override");
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_run_config(const std::string& path,
                           const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in.good()) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config_text(buf.str(), overrides);
}

// --- environment plumbing ------------------------------------------------

std::unique_ptr<Environment> make_env(const RunConfig& cfg) {
    if (cfg.env_kind == EnvKind::oscillator) {
        auto oc = cfg.oscillator;
        oc.n_osc = cfg.n_marl;
        return std::make_unique<OscillatorEnv>(oc, cfg.episode, cfg.action_bound);
    }
    auto cc = cfg.cylinder;
    cc.episode = cfg.episode;
    cc.n_marl = cfg.n_marl;
    cc.body.jets.max_speed = cfg.action_bound;
    return std::make_unique<CylinderEnv>(cc);
}

RewardConfig resolve_reward(const RunConfig& cfg, const Environment& env) {
    RewardConfig r = cfg.reward;
    if (cfg.env_kind == EnvKind::cylinder) {
        const auto& b = dynamic_cast<const CylinderEnv&>(env).baseline();
        r.C_d_baseline = b.C_d_baseline;
        r.C_l_baseline = b.C_l_baseline;
    } else {
        // unactuated lattice sits on the limit cycle: <|A|^2> = sigma, <Re A> = 0
        r.C_d_baseline = cfg.oscillator.sigma;
        r.C_l_baseline = 0.0;
    }
    return r;
}

// --- worker --------------------------------------------------------------

void worker_loop(Channel& ch, const RunConfig& cfg, uint32_t cfd_id) {
    const auto env = make_env(cfg);
    const int nm = env->n_marl();
    const RewardConfig rcfg = resolve_reward(cfg, *env);

    ch.send({MsgType::hello, cfd_id, 0, 0,
             {static_cast<double>(kProtocolVersion), static_cast<double>(env->obs_size()),
              1.0}});

    std::vector<double> actions(nm, 0.0);
    std::vector<double> prev_blend(nm, 0.0), prev_local(nm, 0.0);
    int step = -1;    // action step the coordinator owes us; -1 = idle
    int pending = 0;  // actions collected for the current step

    const auto send_states = [&](const std::vector<Observation>& obs, int t) {
        for (int k = 0; k < nm; ++k) {
            WireMessage s{MsgType::state, cfd_id, static_cast<uint32_t>(k),
                          static_cast<uint32_t>(t), {}};
            s.payload.reserve(2 + obs[k].values.size());
            s.payload.push_back(prev_blend[k]);
            s.payload.push_back(prev_local[k]);
            s.payload.insert(s.payload.end(), obs[k].values.begin(), obs[k].values.end());
            ch.send(s);
        }
    };

    while (true) {
        const WireMessage m = ch.recv();
        switch (m.type) {
        case MsgType::shutdown:
            return;

        case MsgType::hello: {
            if (m.payload.size() != 3)
                throw ProtocolError("worker: episode hello needs [version, seed_hi, seed_lo]");
            if (m.payload[0] != static_cast<double>(kProtocolVersion))
                throw ProtocolError("worker: protocol version mismatch");
            const uint64_t seed = join_seed(m.payload[1], m.payload[2]);
            const auto obs = env->reset(seed);
            std::fill(prev_blend.begin(), prev_blend.end(), 0.0);
            std::fill(prev_local.begin(), prev_local.end(), 0.0);
            step = 0;
            pending = 0;
            send_states(obs, 0);
            break;
        }

        case MsgType::action: {
            if (step < 0) throw ProtocolError("worker: action frame outside an episode");
            if (m.cfd_id != cfd_id || static_cast<int>(m.step) != step ||
                static_cast<int>(m.marl_id) != pending)
                throw ProtocolError(
                    "worker: out-of-order action frame (cfd " + std::to_string(m.cfd_id) +
                    ", marl " + std::to_string(m.marl_id) + ", step " +
                    std::to_string(m.step) + "); expected (" + std::to_string(cfd_id) +
                    ", " + std::to_string(pending) + ", " + std::to_string(step) + ")");
            if (m.payload.size() != 1)
                throw ProtocolError("worker: action payload must hold exactly one value");
            actions[pending++] = m.payload[0];
            if (pending < nm) break;
            pending = 0;

            const StepResult sr = env->step_action(actions);
            std::vector<double> locals(nm);
            for (int k = 0; k < nm; ++k) {
                double cl = 0.0, cd = 0.0;
                for (const ForceSample& f : sr.records[k]) {
                    cl += f.C_l;
                    cd += f.C_d;
                }
                const double n = static_cast<double>(sr.records[k].size());
                locals[k] = local_reward(cd / n, cl / n, env->lift_mean(k), rcfg);
            }
            prev_blend = global_rewards(locals, rcfg.gamma);
            prev_local = locals;
            ++step;
            send_states(sr.obs, step);
            if (sr.done) {
                ch.send({MsgType::episode_end, cfd_id, 0, static_cast<uint32_t>(step), {}});
                step = -1;
            }
            break;
        }

        default:
            throw ProtocolError("worker: unexpected frame type " +
                                std::to_string(static_cast<unsigned>(m.type)));
        }
    }
}

// --- coordinator ---------------------------------------------------------

Orchestrator::Orchestrator(RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    obs_size_ = cfg_.env_kind == EnvKind::oscillator
                    ? 6
                    : 3 * static_cast<int>(cylinder_probe_layout(cfg_.cylinder.body).size());
    AgentConfig pc = cfg_.ppo;
    pc.obs_dim = obs_size_;
    pc.act_dim = 1;
    pc.action_bound = cfg_.action_bound;
    agent_ = std::make_unique<Agent>(pc, derive_seed({cfg_.seed, 0xa9e7ULL}));
    start_workers();
}

Orchestrator::~Orchestrator() { stop_workers(); }

void Orchestrator::start_workers() {
    const int nw = cfg_.n_cfd;
    std::vector<std::unique_ptr<Channel>> raw;
    if (cfg_.mode == RunMode::inprocess) {
        for (int w = 0; w < nw; ++w) {
            auto [coord, work] = make_inprocess_pair();
            raw.push_back(std::move(coord));
            workers_.emplace_back(
                [this, w, ch = std::shared_ptr<Channel>(std::move(work))] {
                    try {
                        worker_loop(*ch, cfg_, static_cast<uint32_t>(w));
                    } catch (const std::exception& e) {
                        std::fprintf(stderr, "[worker %d] %s\n", w, e.what());
                    }
                    ch->close();
                });
        }
    } else {
        listener_ = std::make_unique<TcpListener>(cfg_.port);
        const uint16_t port = listener_->port();
        for (int w = 0; w < nw; ++w) {
            workers_.emplace_back([this, w, port] {
                std::shared_ptr<Channel> ch;
                try {
                    ch = tcp_connect(port);
                    worker_loop(*ch, cfg_, static_cast<uint32_t>(w));
                } catch (const std::exception& e) {
                    std::fprintf(stderr, "[worker %d] %s\n", w, e.what());
                }
                if (ch) ch->close();
            });
        }
        for (int w = 0; w < nw; ++w) raw.push_back(listener_->accept());
    }

    // The announcement identifies each channel and pins the tensor shapes.
    chans_.clear();
    chans_.resize(nw);
    for (auto& ch : raw) {
        const WireMessage m = ch->recv();
        if (m.type != MsgType::hello || m.payload.size() != 3)
            throw ProtocolError("coordinator: expected a hello announcement");
        if (m.payload[0] != static_cast<double>(kProtocolVersion))
            throw ProtocolError("coordinator: protocol version mismatch");
        if (m.payload[1] != static_cast<double>(obs_size_) || m.payload[2] != 1.0)
            throw ProtocolError("coordinator: worker reports observation size " +
                                std::to_string(m.payload[1]) + ", expected " +
                                std::to_string(obs_size_));
        if (m.cfd_id >= static_cast<uint32_t>(nw) || chans_[m.cfd_id])
            throw ProtocolError("coordinator: duplicate or out-of-range worker id " +
                                std::to_string(m.cfd_id));
        chans_[m.cfd_id] = std::move(ch);
    }
}

void Orchestrator::stop_workers() {
    for (auto& ch : chans_) {
        if (!ch) continue;
        try {
            ch->send({MsgType::shutdown, 0, 0, 0, {}});
        } catch (const Error&) {
            // worker already gone
        }
        ch->close();
    }
    for (auto& t : workers_)
        if (t.joinable()) t.join();
    workers_.clear();
    chans_.clear();
    listener_.reset();
}

EpisodeRollout Orchestrator::run_episode(int training_step) {
    const int nw = cfg_.n_cfd, nm = cfg_.n_marl, T = cfg_.episode.n_actions;
    EpisodeRollout out;
    out.trajectories.assign(static_cast<size_t>(nw) * nm, {});
    out.local_rewards.assign(static_cast<size_t>(nw) * nm, {});

    // One sampling stream per episode, consumed in (cfd, marl, step) order.
    Rng arng(derive_seed({cfg_.seed, static_cast<uint64_t>(training_step), 0xac710ULL}));

    for (int w = 0; w < nw; ++w) {
        const uint64_t ws =
            derive_seed({cfg_.seed, static_cast<uint64_t>(training_step),
                         static_cast<uint64_t>(w)});
        chans_[w]->send({MsgType::hello, static_cast<uint32_t>(w), 0,
                         static_cast<uint32_t>(training_step),
                         {static_cast<double>(kProtocolVersion), seed_hi(ws), seed_lo(ws)}});
    }

    const auto worker_failed = [](int w, int t, const Error& e) -> IoError {
        return IoError("episode aborted: worker " + std::to_string(w) +
                       " failed at action step " + std::to_string(t) +
                       " (last completed step " + std::to_string(t - 1) +
                       "): " + e.what());
    };

    for (int t = 0; t <= T; ++t) {
        for (int w = 0; w < nw; ++w) {
            std::vector<double> acts(nm, 0.0);
            for (int k = 0; k < nm; ++k) {
                WireMessage m;
                try {
                    m = chans_[w]->recv();
                } catch (const IoError& e) {
                    throw worker_failed(w, t, e);
                } catch (const FramingError& e) {
                    throw worker_failed(w, t, e);
                }
                if (m.type != MsgType::state || m.cfd_id != static_cast<uint32_t>(w) ||
                    m.marl_id != static_cast<uint32_t>(k) ||
                    m.step != static_cast<uint32_t>(t))
                    throw ProtocolError(
                        "coordinator: expected state (" + std::to_string(w) + ", " +
                        std::to_string(k) + ", " + std::to_string(t) + "), got type " +
                        std::to_string(static_cast<unsigned>(m.type)) + " (" +
                        std::to_string(m.cfd_id) + ", " + std::to_string(m.marl_id) +
                        ", " + std::to_string(m.step) + ")");
                if (m.payload.size() != static_cast<size_t>(2 + obs_size_))
                    throw ProtocolError("coordinator: state payload of " +
                                        std::to_string(m.payload.size()) +
                                        " values, expected " +
                                        std::to_string(2 + obs_size_));

                const size_t slot = static_cast<size_t>(w) * nm + k;
                if (t > 0) {
                    out.trajectories[slot].rewards.push_back(m.payload[0]);
                    out.local_rewards[slot].push_back(m.payload[1]);
                }
                const std::vector<double> obs(m.payload.begin() + 2, m.payload.end());
                agent_->normalizer().observe(obs);
                if (t < T) {
                    ActionSample s = agent_->act(obs, arng);
                    Trajectory& tr = out.trajectories[slot];
                    tr.obs.push_back(std::move(s.obs_norm));
                    tr.raw.push_back(std::move(s.raw));
                    tr.log_probs.push_back(s.log_prob);
                    tr.values.push_back(s.value);
                    tr.dones.push_back(0.0); // fixed-horizon truncation, not termination
                    acts[k] = s.action[0];
                } else {
                    out.trajectories[slot].bootstrap_value = agent_->value(obs);
                }
            }
            if (t < T) {
                try {
                    for (int k = 0; k < nm; ++k)
                        chans_[w]->send({MsgType::action, static_cast<uint32_t>(w),
                                         static_cast<uint32_t>(k),
                                         static_cast<uint32_t>(t), {acts[k]}});
                } catch (const IoError& e) {
                    throw worker_failed(w, t, e);
                }
            }
        }
    }

    for (int w = 0; w < nw; ++w) {
        WireMessage m;
        try {
            m = chans_[w]->recv();
        } catch (const IoError& e) {
            throw worker_failed(w, T, e);
        }
        if (m.type != MsgType::episode_end)
            throw ProtocolError("coordinator: expected episode_end from worker " +
                                std::to_string(w));
    }

    const int n_win = std::clamp(
        static_cast<int>(std::llround(cfg_.reward_window / cfg_.episode.T_act())), 1, T);
    out.final_window_local.resize(out.slots());
    for (size_t s = 0; s < out.slots(); ++s) {
        const auto& lr = out.local_rewards[s];
        double acc = 0.0;
        for (size_t i = lr.size() - n_win; i < lr.size(); ++i) acc += lr[i];
        out.final_window_local[s] = acc / n_win;
    }
    return out;
}

void Orchestrator::train() {
    fs::create_directories(cfg_.out_dir);
    const fs::path dir(cfg_.out_dir);
    std::ofstream curve(dir / "reward_curve.csv", std::ios::trunc);
    if (!curve.good()) throw IoError("cannot write " + (dir / "reward_curve.csv").string());
    curve << "step,cfd_id,marl_id,mean_local_reward\n";
    curve.flush();

    std::ofstream log(dir / "train_log.csv", std::ios::trunc);
    if (!log.good()) throw IoError("cannot write " + (dir / "train_log.csv").string());
    log << "step,loss,policy_loss,value_loss,entropy,approx_kl,clip_fraction,"
           "grad_norm,mean_reward\n";
    log.flush();

    agent_->save((dir / "policy_0.ckpt").string());

    for (int s = 0; s < cfg_.n_training_steps; ++s) {
        const EpisodeRollout ro = run_episode(s);
        for (int w = 0; w < cfg_.n_cfd; ++w)
            for (int k = 0; k < cfg_.n_marl; ++k)
                curve << s << ',' << w << ',' << k << ','
                      << fmt17(ro.final_window_local[static_cast<size_t>(w) * cfg_.n_marl + k])
                      << '\n';
        curve.flush();

        // Next episode normalizes with statistics up to and including this one.
        agent_->normalizer().freeze();
        const UpdateStats st = agent_->update(ro.trajectories);
        if (st.skipped) {
            std::printf("[train] step %d: non-finite update, halting; last good "
                        "checkpoint is policy_%d.ckpt\n",
                        s, s);
            break;
        }
        agent_->save((dir / ("policy_" + std::to_string(s + 1) + ".ckpt")).string());

        double blended = 0.0;
        for (const auto& tr : ro.trajectories) blended += mean_of(tr.rewards);
        blended /= static_cast<double>(ro.slots());
        log << s << ',' << fmt17(st.loss) << ',' << fmt17(st.policy_loss) << ','
            << fmt17(st.value_loss) << ',' << fmt17(st.entropy) << ','
            << fmt17(st.approx_kl) << ',' << fmt17(st.clip_fraction) << ','
            << fmt17(st.grad_norm) << ',' << fmt17(blended) << '\n';
        log.flush();
        std::printf("[train] step %d  reward %.5f  loss %.4f  kl %.4f  clip %.2f  "
                    "entropy %.3f\n",
                    s, blended, st.loss, st.approx_kl, st.clip_fraction, st.entropy);
        std::fflush(stdout);
    }
    agent_->save((dir / "policy_final.ckpt").string());
}

EvalResult Orchestrator::evaluate(const std::string& checkpoint_path, bool zero_actions) {
    if (!checkpoint_path.empty()) agent_->load(checkpoint_path);

    RunConfig ec = cfg_;
    const double T_act = cfg_.episode.T_act();
    const int n = std::max(1, static_cast<int>(std::ceil(cfg_.eval_duration / T_act - 1e-9)));
    ec.episode.n_actions = n;
    ec.episode.T_eps = n * T_act;
    const auto env = make_env(ec);
    const RewardConfig rcfg = resolve_reward(ec, *env);
    const int nm = env->n_marl();

    auto obs = env->reset(derive_seed({cfg_.seed, 0xeba1ULL}));

    fs::create_directories(cfg_.out_dir);
    Table forces;
    forces.columns = {"t", "C_l", "C_d"};
    forces.data.resize(3);
    Table acts;
    acts.columns = {"t", "marl_id", "U_jet"};
    acts.data.resize(3);

    TimeSeries lift, drag;
    double t_off = -1.0;
    double sum_blend = 0.0, sum_local = 0.0;

    for (int t = 0; t < n; ++t) {
        std::vector<double> a(nm, 0.0);
        if (!zero_actions)
            for (int k = 0; k < nm; ++k) a[k] = agent_->act_mean(obs[k].values)[0];
        for (int k = 0; k < nm; ++k) {
            acts.data[0].push_back(t * T_act);
            acts.data[1].push_back(static_cast<double>(k));
            acts.data[2].push_back(a[k]);
        }

        const StepResult sr = env->step_action(a);
        if (t_off < 0.0) t_off = sr.records[0].front().t;
        const size_t ns = sr.records[0].size();
        std::vector<double> locals(nm, 0.0);
        std::vector<double> mcl(nm, 0.0), mcd(nm, 0.0);
        for (int k = 0; k < nm; ++k) {
            for (const ForceSample& f : sr.records[k]) {
                mcl[k] += f.C_l;
                mcd[k] += f.C_d;
            }
            mcl[k] /= static_cast<double>(sr.records[k].size());
            mcd[k] /= static_cast<double>(sr.records[k].size());
            locals[k] = local_reward(mcd[k], mcl[k], env->lift_mean(k), rcfg);
        }
        const auto blended = global_rewards(locals, rcfg.gamma);
        sum_blend += mean_of(blended);
        sum_local += mean_of(locals);

        for (size_t i = 0; i < ns; ++i) {
            double cl = 0.0, cd = 0.0;
            for (int k = 0; k < nm; ++k) {
                cl += sr.records[k][i].C_l;
                cd += sr.records[k][i].C_d;
            }
            cl /= nm;
            cd /= nm;
            const double tr = sr.records[0][i].t - t_off;
            forces.data[0].push_back(tr);
            forces.data[1].push_back(cl);
            forces.data[2].push_back(cd);
            lift.t.push_back(tr);
            lift.values.push_back(cl);
            drag.t.push_back(tr);
            drag.values.push_back(cd);
        }
        obs = sr.obs;
    }

    write_table((fs::path(cfg_.out_dir) / "forces.csv").string(), forces);
    write_table((fs::path(cfg_.out_dir) / "actions.csv").string(), acts);

    EvalResult r;
    const double window = std::min(cfg_.eval_duration - cfg_.eval_transient,
                                   lift.t.back() - lift.t.front());
    r.summary = aero_summary(lift, drag, window);
    r.mean_reward = sum_blend / n;
    r.mean_local_reward = sum_local / n;
    try {
        r.strouhal = zero_crossing_frequency(lift, lift.t.back() - window, lift.t.back());
    } catch (const InputError&) {
        r.strouhal = 0.0; // suppressed shedding has no crossings to count
    }
    return r;
}

// --- baseline ------------------------------------------------------------

void run_baseline(const RunConfig& cfg) {
    if (cfg.env_kind == EnvKind::oscillator) {
        std::printf("oscillator baselines are analytic (C_d = sigma = %g, C_l = 0); "
                    "nothing to write\n",
                    cfg.oscillator.sigma);
        return;
    }
    auto cc = cfg.cylinder;
    cc.body.jets.max_speed = cfg.action_bound;
    if (cc.baseline_prefix.empty())
        throw ConfigError("baseline: cylinder.baseline_prefix must be set");
    const fs::path prefix(cc.baseline_prefix);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());

    Solver2d solver(cc.grid, cc.solver, cc.body);
    const double t_end = cfg.baseline_duration;
    const double rec_start = t_end - cfg.baseline_window;
    const double kick = std::min(0.2, cc.body.jets.max_speed);

    std::vector<ForceSample> rec;
    ForceSample before_window{-1.0, 0.0, 0.0}; ///< last sample ahead of the window
    double next_report = 0.0;
    while (solver.field().time < t_end - 1e-12) {
        const double t = solver.field().time;
        // a brief antisymmetric pulse trips the vortex street, then hands off
        solver.set_jet(t > 2.0 && t < 8.0 ? kick * std::sin(1.2 * t) : 0.0);
        solver.step(snapped_dt(solver.stable_dt(), t_end - t));
        const auto [cl, cd] = solver.last_forces();
        if (solver.field().time >= rec_start) {
            // bracket the window start so the stats can clip at it exactly
            if (rec.empty() && before_window.t >= 0.0) rec.push_back(before_window);
            rec.push_back({solver.field().time, cl, cd});
        } else {
            before_window = {solver.field().time, cl, cd};
        }
        if (solver.field().time >= next_report) {
            std::printf("[baseline] t=%.1f  C_l=%+.4f  C_d=%.4f\n", solver.field().time,
                        cl, cd);
            std::fflush(stdout);
            next_report += 10.0;
        }
    }

    const BaselineStats stats = estimate_baseline(rec, cfg.baseline_window);
    solver.save_snapshot(cc.baseline_prefix + ".dat");
    write_baseline_stats(cc.baseline_prefix + ".stats", stats,
                         cc.baseline_prefix + ".dat");

    Table forces;
    forces.columns = {"t", "C_l", "C_d"};
    forces.data.resize(3);
    for (const ForceSample& f : rec) {
        forces.data[0].push_back(f.t);
        forces.data[1].push_back(f.C_l);
        forces.data[2].push_back(f.C_d);
    }
    write_table(cc.baseline_prefix + "_forces.csv", forces);

    TimeSeries lift;
    lift.t = forces.data[0];
    lift.values = forces.data[1];
    double st_zc = 0.0;
    try {
        st_zc = zero_crossing_frequency(lift, rec_start, lift.t.back());
    } catch (const InputError&) {
        // shedding not developed; leave zero
    }
    std::printf("[baseline] done: C_d=%.4f C_l=%.4f C_l_rms=%.4f St=%.4f window=%.0f\n",
                stats.C_d_baseline, stats.C_l_baseline, stats.C_l_rms, st_zc,
                stats.window);
}

} // namespace afc
