#include "afc/reward.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "afc/errors.hpp"

namespace afc {

void RewardConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw ConfigError("reward: alpha must be finite and >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta))
        throw ConfigError("reward: beta must be finite and >= 0");
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ConfigError("reward: gamma must lie in [0, 1]");
    if (!std::isfinite(C_d_baseline) || !std::isfinite(C_l_baseline))
        throw ConfigError("reward: baseline coefficients must be finite");
}

double local_reward(double C_d, double C_l, double C_l_avg, const RewardConfig& cfg) {
    return (cfg.C_d_baseline - C_d) - cfg.alpha * std::abs(C_l - C_l_avg) +
           cfg.beta * (C_l - cfg.C_l_baseline);
}

double global_reward(const std::vector<double>& local_rewards, size_t i, double gamma) {
    if (local_rewards.empty())
        throw InputError("global_reward: empty reward vector");
    if (i >= local_rewards.size())
        throw InputError("global_reward: index out of range");
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ConfigError("global_reward: gamma must lie in [0, 1]");
    double sum = 0.0;
    for (double r : local_rewards) sum += r;
    const double n = static_cast<double>(local_rewards.size());
    return gamma * local_rewards[i] + (1.0 - gamma) / n * sum;
}

std::vector<double> global_rewards(const std::vector<double>& local_rewards, double gamma) {
    std::vector<double> out(local_rewards.size());
    for (size_t i = 0; i < local_rewards.size(); ++i)
        out[i] = global_reward(local_rewards, i, gamma);
    return out;
}

BaselineStats estimate_baseline(const std::vector<ForceSample>& record, double window) {
    if (record.size() < 2)
        throw InputError("estimate_baseline: need at least two force samples");
    if (!(window > 0.0))
        throw InputError("estimate_baseline: window must be positive");

    const double t_end = record.back().t;
    const double t_start = t_end - window;
    if (t_start < record.front().t)
        throw InputError("estimate_baseline: window longer than the record");

    // Trapezoidal time averages over [t_end - window, t_end].
    double span = 0.0, int_cd = 0.0, int_cl = 0.0, int_cl2 = 0.0;
    for (size_t k = 1; k < record.size(); ++k) {
        const ForceSample& a = record[k - 1];
        const ForceSample& b = record[k];
        if (!(b.t > a.t))
            throw InputError("estimate_baseline: time samples must be strictly increasing");
        if (b.t <= t_start) continue;

        ForceSample lo = a;
        if (a.t < t_start) {
            // Clip the first partially covered interval at the window edge.
            const double s = (t_start - a.t) / (b.t - a.t);
            lo.t = t_start;
            lo.C_l = a.C_l + s * (b.C_l - a.C_l);
            lo.C_d = a.C_d + s * (b.C_d - a.C_d);
        }
        const double dt = b.t - lo.t;
        span += dt;
        int_cd += 0.5 * dt * (lo.C_d + b.C_d);
        int_cl += 0.5 * dt * (lo.C_l + b.C_l);
        int_cl2 += 0.5 * dt * (lo.C_l * lo.C_l + b.C_l * b.C_l);
    }

    BaselineStats stats;
    stats.window = span;
    stats.C_d_baseline = int_cd / span;
    stats.C_l_baseline = int_cl / span;
    const double var = int_cl2 / span - stats.C_l_baseline * stats.C_l_baseline;
    stats.C_l_rms = std::sqrt(std::max(var, 0.0));
    return stats;
}

void write_baseline_stats(const std::string& path, const BaselineStats& stats,
                          const std::string& snapshot_file) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.precision(17);
    out << "C_d_baseline = " << stats.C_d_baseline << "\n";
    out << "C_l_baseline = " << stats.C_l_baseline << "\n";
    out << "C_l_rms = " << stats.C_l_rms << "\n";
    out << "window = " << stats.window << "\n";
    if (!snapshot_file.empty()) out << "snapshot = " << snapshot_file << "\n";
    if (!out) throw IoError("failed writing " + path);
}

BaselineStats read_baseline_stats(const std::string& path, std::string* snapshot_file) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    BaselineStats stats;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key, eq;
        if (!(ss >> key >> eq) || eq != "=") continue;
        if (key == "snapshot") {
            std::string v;
            ss >> v;
            if (snapshot_file) *snapshot_file = v;
            continue;
        }
        double v = 0.0;
        if (!(ss >> v)) throw IoError("bad value for " + key + " in " + path);
        if (key == "C_d_baseline") stats.C_d_baseline = v;
        else if (key == "C_l_baseline") stats.C_l_baseline = v;
        else if (key == "C_l_rms") stats.C_l_rms = v;
        else if (key == "window") stats.window = v;
    }
    return stats;
}

} // namespace afc
