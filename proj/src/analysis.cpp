#include "afc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "afc/errors.hpp"
#include "afc/reward.hpp"

namespace afc {

namespace {
constexpr double kPi = 3.14159265358979323846;

double interp_at(const TimeSeries& s, size_t k, double t) {
    // Linear interpolation inside interval [t_k, t_{k+1}].
    const double s0 = s.t[k], s1 = s.t[k + 1];
    const double f = (t - s0) / (s1 - s0);
    return s.values[k] + f * (s.values[k + 1] - s.values[k]);
}

/// Copy of the samples covering [a, b], with interpolated endpoints.
TimeSeries window_slice(const TimeSeries& s, double a, double b) {
    s.validate();
    if (!(b > a)) throw InputError("window_stats: empty window");
    if (a < s.t.front() - 1e-12 || b > s.t.back() + 1e-12)
        throw InputError("window_stats: window outside the sampled range");
    a = std::max(a, s.t.front());
    b = std::min(b, s.t.back());

    TimeSeries out;
    const size_t n = s.size();
    size_t k = 0;
    while (k + 1 < n && s.t[k + 1] <= a) ++k;
    out.t.push_back(a);
    out.values.push_back(interp_at(s, k, a));
    for (size_t j = k + 1; j < n && s.t[j] < b; ++j) {
        if (s.t[j] > a) {
            out.t.push_back(s.t[j]);
            out.values.push_back(s.values[j]);
        }
    }
    size_t m = n - 2;
    while (m > 0 && s.t[m] >= b) --m;
    out.t.push_back(b);
    out.values.push_back(interp_at(s, m, b));
    return out;
}

double trapezoid(const TimeSeries& s) {
    double acc = 0.0;
    for (size_t k = 1; k < s.size(); ++k)
        acc += 0.5 * (s.t[k] - s.t[k - 1]) * (s.values[k] + s.values[k - 1]);
    return acc;
}

size_t floor_pow2(size_t n) {
    size_t p = 1;
    while (2 * p <= n) p *= 2;
    return p;
}
} // namespace

void TimeSeries::validate() const {
    if (t.size() != values.size())
        throw InputError("time series: timestamp/value length mismatch");
    if (t.size() < 2) throw InputError("time series: need at least two samples");
    for (size_t k = 1; k < t.size(); ++k)
        if (!(t[k] > t[k - 1]))
            throw InputError("time series: timestamps must be strictly increasing");
}

WindowStats window_stats(const TimeSeries& series, double t_start, double t_end) {
    const TimeSeries w = window_slice(series, t_start, t_end);
    const double span = w.t.back() - w.t.front();
    WindowStats out;
    out.mean = trapezoid(w) / span;

    TimeSeries sq = w;
    for (double& v : sq.values) {
        const double d = v - out.mean;
        v = d * d;
    }
    out.rms = std::sqrt(std::max(trapezoid(sq) / span, 0.0));
    return out;
}

AeroSummary aero_summary(const TimeSeries& lift, const TimeSeries& drag, double window) {
    lift.validate();
    drag.validate();
    if (lift.t != drag.t)
        throw InputError("aero_summary: lift and drag timestamps are misaligned");
    const double t_end = lift.t.back();
    const auto ls = window_stats(lift, t_end - window, t_end);
    const auto ds = window_stats(drag, t_end - window, t_end);
    AeroSummary s;
    s.C_l_mean = ls.mean;
    s.C_d_mean = ds.mean;
    s.C_l_rms = ls.rms;
    if (ds.mean == 0.0) throw InputError("aero_summary: zero mean drag");
    s.E = ls.mean / ds.mean;
    return s;
}

AeroDeltas deltas(const AeroSummary& controlled, const AeroSummary& baseline) {
    auto pct = [](double c, double b) {
        if (b == 0.0) throw InputError("deltas: zero baseline value");
        return 100.0 * (c - b) / b;
    };
    AeroDeltas d;
    d.dC_l = pct(controlled.C_l_mean, baseline.C_l_mean);
    d.dC_d = pct(controlled.C_d_mean, baseline.C_d_mean);
    d.dC_l_rms = pct(controlled.C_l_rms, baseline.C_l_rms);
    d.dE = pct(controlled.E, baseline.E);
    return d;
}

void fft(std::vector<std::complex<double>>& x) {
    const size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw InputError("fft: length must be a power of two");
    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const auto u = x[i + j];
                const auto v = x[i + j + len / 2] * w;
                x[i + j] = u + v;
                x[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

TimeSeries resample_uniform(const TimeSeries& series) {
    series.validate();
    std::vector<double> diffs(series.size() - 1);
    for (size_t k = 0; k + 1 < series.size(); ++k) diffs[k] = series.t[k + 1] - series.t[k];
    std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
    const double dt = diffs[diffs.size() / 2];

    const double t0 = series.t.front();
    const double span = series.t.back() - t0;
    const size_t n = static_cast<size_t>(std::floor(span / dt)) + 1;

    TimeSeries out;
    out.t.resize(n);
    out.values.resize(n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {
        const double t = std::min(t0 + static_cast<double>(i) * dt, series.t.back());
        while (k + 2 < series.size() && series.t[k + 1] <= t) ++k;
        out.t[i] = t;
        out.values[i] = interp_at(series, k, t);
    }
    return out;
}

size_t welch_segment_length(size_t n_samples) {
    // About 8 segments at 50% overlap: n >= 4.5 L.
    const size_t raw = static_cast<size_t>(static_cast<double>(n_samples) / 4.5);
    return floor_pow2(std::max<size_t>(raw, 2));
}

Psd compute_psd(const TimeSeries& series, size_t segment_length, double overlap) {
    series.validate();
    if (!(overlap >= 0.0 && overlap < 1.0))
        throw InputError("compute_psd: overlap must lie in [0, 1)");
    const size_t n = series.size();
    const double dt = series.t[1] - series.t[0];
    for (size_t k = 1; k < n; ++k) {
        const double d = series.t[k] - series.t[k - 1];
        if (std::abs(d - dt) > 1e-6 * dt)
            throw InputError("compute_psd: series is not uniformly sampled; resample first");
    }
    if (segment_length > n)
        throw InputError("compute_psd: series shorter than one segment");
    const size_t L = floor_pow2(std::max<size_t>(segment_length, 2));
    const size_t hop = std::max<size_t>(
        1, static_cast<size_t>(std::lround(static_cast<double>(L) * (1.0 - overlap))));

    std::vector<double> w(L);
    double U = 0.0;
    for (size_t j = 0; j < L; ++j) {
        w[j] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(j) / static_cast<double>(L)));
        U += w[j] * w[j];
    }

    const size_t nb = L / 2 + 1;
    Psd psd;
    psd.segment_length = L;
    psd.df = 1.0 / (static_cast<double>(L) * dt);
    psd.St.resize(nb);
    psd.power.assign(nb, 0.0);
    for (size_t k = 0; k < nb; ++k) psd.St[k] = static_cast<double>(k) * psd.df;

    std::vector<std::complex<double>> buf(L);
    size_t K = 0;
    for (size_t s = 0; s + L <= n; s += hop, ++K) {
        for (size_t j = 0; j < L; ++j) buf[j] = series.values[s + j] * w[j];
        fft(buf);
        for (size_t k = 0; k < nb; ++k) psd.power[k] += std::norm(buf[k]);
    }
    psd.segments = K;

    const double fs = 1.0 / dt;
    const double scale = 1.0 / (static_cast<double>(K) * fs * U);
    for (size_t k = 0; k < nb; ++k) {
        psd.power[k] *= scale;
        if (k != 0 && k != L / 2) psd.power[k] *= 2.0; // one-sided
    }
    return psd;
}

StPeak dominant_strouhal(const Psd& psd, bool exclude_dc) {
    if (psd.power.empty()) throw InputError("dominant_strouhal: empty spectrum");
    const size_t start = (exclude_dc && psd.power.size() > 1) ? 1 : 0;

    size_t peak = start;
    for (size_t k = start; k < psd.power.size(); ++k)
        if (psd.power[k] > psd.power[peak]) peak = k;

    std::vector<double> sorted(psd.power.begin() + static_cast<long>(start), psd.power.end());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];

    StPeak out;
    out.St = psd.St[peak];
    out.St_refined = out.St;
    if (peak > start && peak + 1 < psd.power.size()) {
        const double a = psd.power[peak - 1], b = psd.power[peak], c = psd.power[peak + 1];
        const double denom = a - 2.0 * b + c;
        if (denom < 0.0) {
            const double delta = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
            out.St_refined = out.St + delta * psd.df;
        }
    }
    if (median > 0.0)
        out.prominence = psd.power[peak] / median;
    else
        out.prominence = psd.power[peak] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return out;
}

StPeak peak_strouhal(const TimeSeries& series, double t_start, double t_end) {
    TimeSeries win = window_slice(series, t_start, t_end);
    TimeSeries uni = resample_uniform(win);
    double mean = 0.0;
    for (double v : uni.values) mean += v / static_cast<double>(uni.size());
    for (double& v : uni.values) v -= mean;
    // Single maximal segment for the finest frequency resolution.
    const Psd psd = compute_psd(uni, uni.size(), 0.0);
    return dominant_strouhal(psd, true);
}

const std::vector<double>& Table::column(const std::string& name) const {
    for (size_t c = 0; c < columns.size(); ++c)
        if (columns[c] == name) return data[c];
    throw InputError("table: no column named " + name);
}

void write_table(const std::string& path, const Table& table) {
    if (table.columns.size() != table.data.size())
        throw InputError("table: header/data column count mismatch");
    const size_t rows = table.data.empty() ? 0 : table.data.front().size();
    for (const auto& col : table.data)
        if (col.size() != rows) throw InputError("table: ragged columns");

    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (size_t c = 0; c < table.columns.size(); ++c)
        out << (c ? "," : "") << table.columns[c];
    out << "\n";
    char buf[40];
    for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < table.data.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", table.data[c][r]);
            out << (c ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Table table;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": missing header line");
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.columns.push_back(cell);
    table.data.resize(table.columns.size());

    size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream rs(line);
        size_t c = 0;
        while (std::getline(rs, cell, ',')) {
            if (c >= table.columns.size())
                throw IoError(path + ": too many fields on line " + std::to_string(row));
            try {
                table.data[c].push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError(path + ": bad number on line " + std::to_string(row));
            }
            ++c;
        }
        if (c != table.columns.size())
            throw IoError(path + ": too few fields on line " + std::to_string(row));
    }
    return table;
}

TimeSeries table_series(const Table& table, const std::string& t_col,
                        const std::string& v_col) {
    TimeSeries s;
    s.t = table.column(t_col);
    s.values = table.column(v_col);
    s.validate();
    return s;
}

double zero_crossing_frequency(const TimeSeries& series, double t_start, double t_end) {
    series.validate();
    const WindowStats ws = window_stats(series, t_start, t_end);
    double first = 0.0, last = 0.0;
    size_t count = 0;
    for (size_t i = 1; i < series.size(); ++i) {
        if (series.t[i - 1] < t_start || series.t[i] > t_end) continue;
        const double a = series.values[i - 1] - ws.mean;
        const double b = series.values[i] - ws.mean;
        if (a < 0.0 && b >= 0.0) {
            const double tc =
                series.t[i - 1] + (series.t[i] - series.t[i - 1]) * (-a) / (b - a);
            if (count == 0) first = tc;
            last = tc;
            ++count;
        }
    }
    if (count < 3)
        throw InputError("zero_crossing_frequency: fewer than three upward crossings");
    return static_cast<double>(count - 1) / (last - first);
}

void analyze_run(const std::string& run_dir, double window) {
    namespace fs = std::filesystem;
    const fs::path dir(run_dir);
    const fs::path forces = dir / "forces.csv";
    if (!fs::exists(forces)) throw IoError("no forces.csv in " + run_dir);

    const Table ft = read_table(forces.string());
    const TimeSeries lift = table_series(ft, "t", "C_l");
    const TimeSeries drag = table_series(ft, "t", "C_d");

    const double span = lift.t.back() - lift.t.front();
    const double w = window > 0.0 ? window : 0.5 * span;
    if (w > span) throw InputError("analyze: window longer than the force record");

    const AeroSummary sum = aero_summary(lift, drag, w);
    const StPeak lift_peak = peak_strouhal(lift, lift.t.back() - w, lift.t.back());

    nlohmann::json js;
    js["window"] = w;
    js["summary"] = {{"C_l_mean", sum.C_l_mean},
                     {"C_d_mean", sum.C_d_mean},
                     {"C_l_rms", sum.C_l_rms},
                     {"E", sum.E}};
    js["lift_peak"] = {{"St", lift_peak.St_refined}, {"prominence", lift_peak.prominence}};

    const fs::path base = dir / "baseline_stats.txt";
    if (fs::exists(base)) {
        const BaselineStats bs = read_baseline_stats(base.string());
        if (bs.C_d_baseline != 0.0) {
            AeroSummary b;
            b.C_l_mean = bs.C_l_baseline;
            b.C_d_mean = bs.C_d_baseline;
            b.C_l_rms = bs.C_l_rms;
            b.E = bs.C_l_baseline / bs.C_d_baseline;
            js["baseline"] = {{"C_l_mean", b.C_l_mean},
                              {"C_d_mean", b.C_d_mean},
                              {"C_l_rms", b.C_l_rms},
                              {"E", b.E}};
            if (b.C_l_mean != 0.0 && b.C_l_rms != 0.0 && b.E != 0.0) {
                const AeroDeltas d = deltas(sum, b);
                js["deltas_pct"] = {{"C_l", d.dC_l},
                                    {"C_d", d.dC_d},
                                    {"C_l_rms", d.dC_l_rms},
                                    {"E", d.dE}};
            }
        }
    }

    // Lift spectrum over the analysis window with Welch defaults.
    {
        TimeSeries win = window_slice(lift, lift.t.back() - w, lift.t.back());
        TimeSeries uni = resample_uniform(win);
        double mean = 0.0;
        for (double v : uni.values) mean += v / static_cast<double>(uni.size());
        for (double& v : uni.values) v -= mean;
        const Psd psd = compute_psd(uni, welch_segment_length(uni.size()));
        Table pt;
        pt.columns = {"St", "power"};
        pt.data = {psd.St, psd.power};
        write_table((dir / "psd.csv").string(), pt);
    }

    const fs::path actions = dir / "actions.csv";
    if (fs::exists(actions)) {
        const Table at = read_table(actions.string());
        const auto& t = at.column("t");
        const auto& ids = at.column("marl_id");
        const auto& u = at.column("U_jet");
        std::map<long, TimeSeries> per_agent;
        for (size_t r = 0; r < t.size(); ++r) {
            auto& s = per_agent[static_cast<long>(ids[r])];
            s.t.push_back(t[r]);
            s.values.push_back(u[r]);
        }
        nlohmann::json peaks = nlohmann::json::array();
        for (const auto& [id, s] : per_agent) {
            if (s.size() < 16) continue;
            const StPeak p = peak_strouhal(s, s.t.front(), s.t.back());
            peaks.push_back({{"marl_id", id},
                             {"St", p.St_refined},
                             {"prominence", p.prominence}});
        }
        js["action_peaks"] = peaks;
    }

    std::ofstream out(dir / "summary.json");
    if (!out) throw IoError("cannot write summary.json in " + run_dir);
    out << js.dump(2) << "\n";
}

} // namespace afc
