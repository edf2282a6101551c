#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace afc {

/// Sampled signal with strictly increasing timestamps (convective units).
struct TimeSeries {
    std::vector<double> t;
    std::vector<double> values;

    void validate() const;
    size_t size() const { return t.size(); }
};

/// Windowed force statistics: means, lift-fluctuation rms and the
/// efficiency E = mean lift / mean drag.
struct AeroSummary {
    double C_l_mean = 0.0;
    double C_d_mean = 0.0;
    double C_l_rms = 0.0;
    double E = 0.0;
};

/// Percentage changes of a controlled summary against a baseline one.
struct AeroDeltas {
    double dC_l = 0.0;
    double dC_d = 0.0;
    double dC_l_rms = 0.0;
    double dE = 0.0;
};

struct WindowStats {
    double mean = 0.0;
    double rms = 0.0; ///< fluctuation rms about the mean
};

/// One-sided Welch power spectral density. Frequencies are in inverse
/// convective time, i.e. Strouhal numbers when lengths are scaled by
/// the reference length and velocities by U_inf.
struct Psd {
    std::vector<double> St;
    std::vector<double> power;
    double df = 0.0;
    size_t segment_length = 0;
    size_t segments = 0;
};

/// Spectral peak: bin value, sub-bin refinement and peak/median ratio.
struct StPeak {
    double St = 0.0;          ///< centre of the argmax bin
    double St_refined = 0.0;  ///< parabolic vertex through the peak bin
    double prominence = 0.0;  ///< peak power / median power
};

/// Time-weighted (trapezoidal) mean and rms over [t_start, t_end].
/// Window edges falling between samples are clipped by interpolation.
WindowStats window_stats(const TimeSeries& series, double t_start, double t_end);

/// Statistics of aligned lift/drag records over their final `window`
/// time units.
AeroSummary aero_summary(const TimeSeries& lift, const TimeSeries& drag, double window);

/// Percentage deltas 100 (x_c - x_b) / x_b per summary field.
AeroDeltas deltas(const AeroSummary& controlled, const AeroSummary& baseline);

/// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& x);

/// Linear resampling onto a uniform grid at the median sampling rate.
TimeSeries resample_uniform(const TimeSeries& series);

/// Welch-averaged one-sided PSD with a Hann window. The series must be
/// uniformly sampled; segment_length is rounded down to a power of two.
/// overlap is the segment overlap fraction in [0, 1).
Psd compute_psd(const TimeSeries& series, size_t segment_length, double overlap = 0.5);

/// Segment length giving about 8 segments at 50% overlap.
size_t welch_segment_length(size_t n_samples);

/// Peak of a PSD with sub-bin parabolic refinement.
StPeak dominant_strouhal(const Psd& psd, bool exclude_dc = true);

/// Dominant frequency of a (possibly irregular) record over
/// [t_start, t_end]: resample, single maximal segment, refined peak.
StPeak peak_strouhal(const TimeSeries& series, double t_start, double t_end);

/// Fundamental frequency from upward mean-crossings over [t_start,
/// t_end]: (crossings - 1) / (last - first crossing time), with linear
/// interpolation at each crossing. Immune to spectral leakage on short
/// records; requires at least three crossings (throws InputError).
double zero_crossing_frequency(const TimeSeries& series, double t_start, double t_end);

/// Numeric CSV table, one vector per named column.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;

    const std::vector<double>& column(const std::string& name) const;
};

/// Values are emitted with 17 significant digits so a write/read pair
/// reproduces doubles exactly.
void write_table(const std::string& path, const Table& table);
Table read_table(const std::string& path);

/// Extract two columns of a table as a time series.
TimeSeries table_series(const Table& table, const std::string& t_col,
                        const std::string& v_col);

/// Post-process one run directory (forces.csv, optionally actions.csv
/// and baseline_stats.txt): writes summary.json and psd.csv into it.
/// `window` selects the final averaging window; 0 means half the record.
void analyze_run(const std::string& run_dir, double window = 0.0);

} // namespace afc
