#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace afc {

/// Weights and baseline coefficients of the shaped reward.
struct RewardConfig {
    double alpha = 0.3;           ///< lift-fluctuation penalty weight
    double beta = 0.5;            ///< lift-increase weight
    double gamma = 0.8;           ///< local/global blend weight
    double C_d_baseline = 0.0;    ///< baseline mean drag coefficient
    double C_l_baseline = 0.0;    ///< baseline mean lift coefficient

    void validate() const;
};

/// Incremental mean of the lift coefficient over one episode.
class RunningLiftMean {
public:
    void add(double C_l) {
        ++count_;
        mean_ += (C_l - mean_) / static_cast<double>(count_);
    }
    void reset() {
        count_ = 0;
        mean_ = 0.0;
    }
    size_t count() const { return count_; }
    double mean() const { return mean_; }

private:
    size_t count_ = 0;
    double mean_ = 0.0;
};

/// Local reward of one pseudo-environment:
///   (C_d_b - C_d) - alpha |C_l - C_l_avg| + beta (C_l - C_l_b)
double local_reward(double C_d, double C_l, double C_l_avg, const RewardConfig& cfg);

/// Blend of local and mean reward across pseudo-environments:
///   R_i = gamma r_i + (1 - gamma)/n * sum_j r_j
double global_reward(const std::vector<double>& local_rewards, size_t i, double gamma);

/// All blended rewards at once.
std::vector<double> global_rewards(const std::vector<double>& local_rewards, double gamma);

/// Windowed force statistics of the unactuated flow.
struct BaselineStats {
    double C_d_baseline = 0.0;
    double C_l_baseline = 0.0;
    double C_l_rms = 0.0;
    double window = 0.0; ///< averaging window length, convective units
};

/// One force sample of the (t, C_l, C_d) record.
struct ForceSample {
    double t = 0.0;
    double C_l = 0.0;
    double C_d = 0.0;
};

/// Mean C_d, mean C_l and the rms of C_l fluctuations over the final
/// `window` time units of the record. Time-weighted (trapezoidal).
/// The caller is responsible for excluding the start-up transient.
BaselineStats estimate_baseline(const std::vector<ForceSample>& record, double window);

/// Sidecar stats file I/O (key = value lines).
void write_baseline_stats(const std::string& path, const BaselineStats& stats,
                          const std::string& snapshot_file = "");
BaselineStats read_baseline_stats(const std::string& path, std::string* snapshot_file = nullptr);

} // namespace afc
