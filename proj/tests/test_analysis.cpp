#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "afc/analysis.hpp"
#include "afc/errors.hpp"
#include "afc/reward.hpp"
#include "afc/rng.hpp"

using namespace afc;

namespace {
constexpr double kPi = 3.14159265358979323846;

TimeSeries make_uniform(double t0, double dt, size_t n, auto f) {
    TimeSeries s;
    for (size_t k = 0; k < n; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        s.t.push_back(t);
        s.values.push_back(f(t));
    }
    return s;
}
} // namespace

TEST_CASE("window stats of a constant signal") {
    auto s = make_uniform(0.0, 0.1, 101, [](double) { return 0.7642; });
    const auto w = window_stats(s, 2.0, 9.0);
    CHECK(w.mean == doctest::Approx(0.7642).epsilon(1e-14));
    CHECK(w.rms == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
}

TEST_CASE("window stats of a sinusoid over whole periods") {
    auto s = make_uniform(0.0, 1e-3, 40001, [](double t) { return std::sin(2.0 * kPi * t); });
    const auto w = window_stats(s, 5.0, 35.0); // 30 periods
    CHECK(w.mean == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
    CHECK(w.rms == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("window stats agree between uniform and jittered sampling") {
    auto f = [](double t) { return 0.4 + 0.8 * std::sin(2.0 * kPi * 0.25 * t); };
    auto uni = make_uniform(0.0, 0.01, 4001, f);
    TimeSeries irr;
    double t = 0.0;
    while (t <= 40.0) {
        irr.t.push_back(t);
        irr.values.push_back(f(t));
        t += 0.01 * (1.0 + 0.3 * std::sin(3.7 * t));
    }
    const auto wu = window_stats(uni, 4.0, 36.0);
    const auto wi = window_stats(irr, 4.0, 36.0);
    CHECK(wu.mean == doctest::Approx(wi.mean).scale(1.0).epsilon(1e-4));
    CHECK(wu.rms == doctest::Approx(wi.rms).scale(1.0).epsilon(1e-4));
}

TEST_CASE("window stats are invariant under time shift and scale with values") {
    auto f = [](double t) { return 1.1 + 0.5 * std::sin(t); };
    auto s = make_uniform(0.0, 0.02, 2001, f);
    auto shifted = s;
    for (double& ti : shifted.t) ti += 123.456;
    const auto w0 = window_stats(s, 3.0, 37.0);
    const auto w1 = window_stats(shifted, 126.456, 160.456);
    CHECK(w1.mean == doctest::Approx(w0.mean).epsilon(1e-12));
    CHECK(w1.rms == doctest::Approx(w0.rms).epsilon(1e-12));

    auto scaled = s;
    for (double& v : scaled.values) v *= -2.5;
    const auto ws = window_stats(scaled, 3.0, 37.0);
    CHECK(ws.mean == doctest::Approx(-2.5 * w0.mean).epsilon(1e-12));
    CHECK(ws.rms == doctest::Approx(2.5 * w0.rms).epsilon(1e-12));
}

TEST_CASE("window stats reject bad windows") {
    auto s = make_uniform(0.0, 0.1, 11, [](double t) { return t; });
    CHECK_THROWS_AS(window_stats(s, 0.5, 0.5), InputError);
    CHECK_THROWS_AS(window_stats(s, 0.8, 0.2), InputError);
    CHECK_THROWS_AS(window_stats(s, -1.0, 0.5), InputError);
    CHECK_THROWS_AS(window_stats(s, 0.5, 2.0), InputError);
}

TEST_CASE("aero summary reproduces printed efficiency values") {
    auto lift1 = make_uniform(0.0, 0.1, 201, [](double) { return 0.7642; });
    auto drag1 = make_uniform(0.0, 0.1, 201, [](double) { return 0.2095; });
    const auto s1 = aero_summary(lift1, drag1, 10.0);
    CHECK(std::abs(s1.E - 3.648) < 5e-4);
    CHECK(std::abs(s1.E * s1.C_d_mean - s1.C_l_mean) < 1e-12);

    auto lift2 = make_uniform(0.0, 0.1, 201, [](double) { return 1.3685; });
    auto drag2 = make_uniform(0.0, 0.1, 201, [](double) { return 0.0739; });
    const auto s2 = aero_summary(lift2, drag2, 10.0);
    CHECK(std::abs(s2.E - 18.52) < 5e-3);

    auto zero = make_uniform(0.0, 0.1, 201, [](double) { return 0.0; });
    const auto s3 = aero_summary(zero, drag1, 10.0);
    CHECK(s3.E == 0.0);
}

TEST_CASE("aero summary rejects misaligned series") {
    auto lift = make_uniform(0.0, 0.1, 101, [](double) { return 1.0; });
    auto drag = make_uniform(0.05, 0.1, 101, [](double) { return 1.0; });
    CHECK_THROWS_AS(aero_summary(lift, drag, 5.0), InputError);
}

TEST_CASE("percentage deltas reproduce the published comparison") {
    AeroSummary base{0.7642, 0.2095, 0.0334, 0.7642 / 0.2095};
    AeroSummary ctrl{1.3685, 0.0739, 0.0205, 1.3685 / 0.0739};
    const auto d = deltas(ctrl, base);
    CHECK(std::abs(d.dC_l - 79.0) < 1.0);
    CHECK(std::abs(d.dC_d - (-65.0)) < 1.0);
    CHECK(std::abs(d.dC_l_rms - (-39.0)) < 1.0);
    CHECK(std::abs(d.dE - 408.0) < 1.0);
}

TEST_CASE("deltas of identical summaries vanish") {
    AeroSummary s{1.1, 0.4, 0.02, 2.75};
    const auto d = deltas(s, s);
    CHECK(d.dC_l == 0.0);
    CHECK(d.dC_d == 0.0);
    CHECK(d.dC_l_rms == 0.0);
    CHECK(d.dE == 0.0);
}

TEST_CASE("doubling both force records doubles everything but E") {
    auto lift = make_uniform(0.0, 0.01, 3001, [](double t) { return 0.3 + 0.1 * std::sin(2.0 * kPi * 0.2 * t); });
    auto drag = make_uniform(0.0, 0.01, 3001, [](double t) { return 1.2 + 0.05 * std::sin(4.0 * kPi * 0.2 * t); });
    auto lift2 = lift, drag2 = drag;
    for (double& v : lift2.values) v *= 2.0;
    for (double& v : drag2.values) v *= 2.0;
    const auto b = aero_summary(lift, drag, 25.0);
    const auto c = aero_summary(lift2, drag2, 25.0);
    const auto d = deltas(c, b);
    CHECK(d.dC_l == doctest::Approx(100.0).epsilon(1e-10));
    CHECK(d.dC_d == doctest::Approx(100.0).epsilon(1e-10));
    CHECK(d.dC_l_rms == doctest::Approx(100.0).epsilon(1e-10));
    CHECK(d.dE == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
}

TEST_CASE("deltas reject a zero baseline") {
    AeroSummary base{0.0, 0.2, 0.03, 0.0};
    AeroSummary ctrl{1.0, 0.1, 0.02, 10.0};
    CHECK_THROWS_AS(deltas(ctrl, base), InputError);
}

TEST_CASE("fft matches a naive dft") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const size_t n = 64;
    std::vector<std::complex<double>> x(n), ref(n);
    for (auto& v : x) v = {dist(gen), dist(gen)};
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * kPi * static_cast<double>(k * j) / static_cast<double>(n);
            acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        ref[k] = acc;
    }
    fft(x);
    for (size_t k = 0; k < n; ++k) CHECK(std::abs(x[k] - ref[k]) < 1e-9);
}

TEST_CASE("fft rejects non power-of-two lengths") {
    std::vector<std::complex<double>> x(12, 0.0);
    CHECK_THROWS_AS(fft(x), InputError);
}

TEST_CASE("resampling reproduces a linear signal exactly") {
    TimeSeries irr;
    double t = 0.0;
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    while (t < 10.0) {
        irr.t.push_back(t);
        irr.values.push_back(3.0 - 0.7 * t);
        t += 0.02 * jitter(gen);
    }
    const auto uni = resample_uniform(irr);
    for (size_t k = 1; k < uni.size(); ++k)
        CHECK(uni.t[k] - uni.t[k - 1] == doctest::Approx(uni.t[1] - uni.t[0]).epsilon(1e-9));
    for (size_t k = 0; k < uni.size(); ++k)
        CHECK(uni.values[k] == doctest::Approx(3.0 - 0.7 * uni.t[k]).epsilon(1e-12));
}

TEST_CASE("psd of a pure tone peaks at its frequency") {
    const double f0 = 0.90, dt = 0.05;
    auto s = make_uniform(0.0, dt, 1024, [&](double t) { return std::sin(2.0 * kPi * f0 * t); });

    // Welch defaults: peak within one bin width.
    const auto psd = compute_psd(s, welch_segment_length(s.size()));
    const auto peak = dominant_strouhal(psd);
    CHECK(std::abs(peak.St - f0) <= psd.df);
    CHECK(peak.prominence > 100.0);

    // Single maximal segment plus refinement: much tighter.
    const auto fine = dominant_strouhal(compute_psd(s, s.size(), 0.0));
    CHECK(std::abs(fine.St_refined - f0) < 0.005);
}

TEST_CASE("psd of a constant signal concentrates at the dc bin") {
    auto s = make_uniform(0.0, 0.1, 512, [](double) { return 2.5; });
    const auto psd = compute_psd(s, 128);
    const auto peak = dominant_strouhal(psd, false);
    CHECK(peak.St == 0.0);
    // The window spreads dc into the adjacent bin only; the rest is empty.
    for (size_t k = 2; k < psd.power.size(); ++k)
        CHECK(psd.power[k] < 1e-20 * psd.power[0]);
}

TEST_CASE("psd satisfies parseval within one percent") {
    std::mt19937_64 gen(12);
    std::normal_distribution<double> noise(0.0, 1.7);
    auto s = make_uniform(0.0, 0.02, 16384, [&](double) { return noise(gen); });
    double mean = 0.0, var = 0.0;
    for (double v : s.values) mean += v / static_cast<double>(s.size());
    for (double v : s.values) var += (v - mean) * (v - mean) / static_cast<double>(s.size());

    const auto psd = compute_psd(s, welch_segment_length(s.size()));
    double total = 0.0;
    for (double p : psd.power) total += p * psd.df;
    CHECK(total == doctest::Approx(var).epsilon(0.01));
}

TEST_CASE("psd power scales with the square of the signal") {
    auto s = make_uniform(0.0, 0.05, 1024, [](double t) { return std::sin(2.0 * kPi * 0.4 * t); });
    auto s3 = s;
    for (double& v : s3.values) v *= 3.0;
    const auto p1 = compute_psd(s, 256);
    const auto p9 = compute_psd(s3, 256);
    double pmax = 0.0;
    for (double p : p1.power) pmax = std::max(pmax, 9.0 * p);
    for (size_t k = 0; k < p1.power.size(); ++k)
        CHECK(std::abs(p9.power[k] - 9.0 * p1.power[k]) < 1e-9 * pmax);
    CHECK(dominant_strouhal(p9).St == dominant_strouhal(p1).St);
}

TEST_CASE("psd rejects irregular input and oversized segments") {
    TimeSeries irr;
    irr.t = {0.0, 0.1, 0.3, 0.35, 0.6};
    irr.values = {1.0, 2.0, 3.0, 4.0, 5.0};
    CHECK_THROWS_AS(compute_psd(irr, 4), InputError);
    auto s = make_uniform(0.0, 0.1, 64, [](double t) { return t; });
    CHECK_THROWS_AS(compute_psd(s, 128), InputError);
}

TEST_CASE("white noise has no dominant tone") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 gen(100 + seed);
        std::normal_distribution<double> noise;
        auto s = make_uniform(0.0, 0.1, 4096, [&](double) { return noise(gen); });
        const auto peak = dominant_strouhal(compute_psd(s, welch_segment_length(s.size())));
        CHECK(peak.prominence < 10.0);
    }
}

TEST_CASE("the stronger of two tones wins") {
    auto s = make_uniform(0.0, 0.05, 2048, [](double t) {
        return 2.0 * std::sin(2.0 * kPi * 0.3 * t) + 1.0 * std::sin(2.0 * kPi * 1.1 * t);
    });
    const auto peak = dominant_strouhal(compute_psd(s, 512));
    CHECK(std::abs(peak.St - 0.3) < 0.02);
}

TEST_CASE("peak_strouhal finds the tone of an irregular record") {
    TimeSeries irr;
    double t = 20.0;
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    while (t < 120.0) {
        irr.t.push_back(t);
        irr.values.push_back(0.02 + 0.3 * std::sin(2.0 * kPi * 0.166 * t));
        t += 0.05 * jitter(gen);
    }
    const auto peak = peak_strouhal(irr, irr.t.front(), irr.t.back());
    CHECK(std::abs(peak.St_refined - 0.166) < 0.005);
    CHECK(peak.prominence > 50.0);
}

TEST_CASE("welch segment length is a power of two near n over 4.5") {
    for (size_t n : {64u, 1000u, 4096u, 10000u, 65536u}) {
        const size_t L = welch_segment_length(n);
        CHECK((L & (L - 1)) == 0);
        CHECK(L <= n / 4);
        CHECK(L * 16 >= n);
    }
}

TEST_CASE("csv tables roundtrip doubles exactly") {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> expo(-300, 300);
    Table t;
    t.columns = {"t", "C_l", "C_d"};
    t.data.resize(3);
    for (int r = 0; r < 200; ++r) {
        t.data[0].push_back(static_cast<double>(r) * 0.05);
        t.data[1].push_back(mant(gen) * std::pow(10.0, expo(gen)));
        t.data[2].push_back(mant(gen));
    }
    const char* path = "analysis_roundtrip.csv";
    write_table(path, t);
    const Table r = read_table(path);
    REQUIRE(r.columns == t.columns);
    for (size_t c = 0; c < 3; ++c)
        for (size_t i = 0; i < t.data[c].size(); ++i)
            CHECK(r.data[c][i] == t.data[c][i]);
    std::filesystem::remove(path);
}

TEST_CASE("csv reader rejects malformed files") {
    const char* path = "analysis_bad.csv";
    {
        std::ofstream out(path);
        out << "t,x\n1.0,2.0\n3.0\n";
    }
    CHECK_THROWS_AS(read_table(path), IoError);
    {
        std::ofstream out(path);
        out << "t,x\n1.0,abc\n";
    }
    CHECK_THROWS_AS(read_table(path), IoError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_table("no_such_file.csv"), IoError);
}

TEST_CASE("analyze_run writes summary.json and psd.csv") {
    namespace fs = std::filesystem;
    const fs::path dir = "analysis_run_dir";
    fs::create_directories(dir);

    Table forces;
    forces.columns = {"t", "C_l", "C_d"};
    forces.data.resize(3);
    for (double t = 0.0; t <= 100.0; t += 0.05) {
        forces.data[0].push_back(t);
        forces.data[1].push_back(0.02 + 0.3 * std::sin(2.0 * kPi * 0.166 * t));
        forces.data[2].push_back(1.33 + 0.03 * std::sin(4.0 * kPi * 0.166 * t));
    }
    write_table((dir / "forces.csv").string(), forces);

    BaselineStats bs;
    bs.C_d_baseline = 1.33;
    bs.C_l_baseline = 0.02;
    bs.C_l_rms = 0.3 / std::sqrt(2.0);
    bs.window = 50.0;
    write_baseline_stats((dir / "baseline_stats.txt").string(), bs);

    Table actions;
    actions.columns = {"t", "marl_id", "U_jet"};
    actions.data.resize(3);
    for (double t = 0.0; t <= 100.0; t += 0.25) {
        actions.data[0].push_back(t);
        actions.data[1].push_back(0.0);
        actions.data[2].push_back(0.1 * std::sin(2.0 * kPi * 0.2 * t));
    }
    write_table((dir / "actions.csv").string(), actions);

    analyze_run(dir.string(), 50.0);

    std::ifstream in(dir / "summary.json");
    REQUIRE(in.good());
    nlohmann::json js;
    in >> js;
    CHECK(js["window"].get<double>() == doctest::Approx(50.0));
    CHECK(js["summary"]["C_d_mean"].get<double>() == doctest::Approx(1.33).epsilon(1e-3));
    CHECK(std::abs(js["lift_peak"]["St"].get<double>() - 0.166) < 0.005);
    CHECK(js.contains("deltas_pct"));
    REQUIRE(js["action_peaks"].size() == 1);
    CHECK(std::abs(js["action_peaks"][0]["St"].get<double>() - 0.2) < 0.01);

    const Table psd = read_table((dir / "psd.csv").string());
    CHECK(psd.columns == std::vector<std::string>{"St", "power"});
    CHECK(psd.data[0].size() > 10);
    fs::remove_all(dir);
}

TEST_CASE("zero-crossing frequency recovers the fundamental of noisy records") {
    TimeSeries s;
    Rng rng(314);
    const double f = 0.17;
    double t = 0.0;
    while (t < 80.0) {
        s.t.push_back(t);
        // offset + second harmonic + jitter must not bias the estimate
        s.values.push_back(1.5 + std::sin(2.0 * kPi * f * t) +
                           0.2 * std::sin(2.0 * kPi * 2.0 * f * t + 0.7) +
                           0.01 * rng.normal());
        t += 0.2 + 0.05 * rng.uniform(); // irregular sampling
    }
    const double fhat = zero_crossing_frequency(s, 10.0, s.t.back());
    CHECK(fhat == doctest::Approx(f).epsilon(2e-3));

    SUBCASE("exact on a clean sine") {
        TimeSeries clean;
        for (double tc = 0.0; tc < 60.0; tc += 0.1) {
            clean.t.push_back(tc);
            clean.values.push_back(std::sin(2.0 * kPi * 0.25 * tc));
        }
        CHECK(zero_crossing_frequency(clean, 0.0, clean.t.back()) ==
              doctest::Approx(0.25).epsilon(1e-6));
    }
    SUBCASE("too few crossings throws") {
        TimeSeries flat;
        for (double tc = 0.0; tc < 10.0; tc += 0.5) {
            flat.t.push_back(tc);
            flat.values.push_back(std::sin(2.0 * kPi * 0.05 * tc));
        }
        CHECK_THROWS_AS((void)zero_crossing_frequency(flat, 0.0, flat.t.back()), InputError);
    }
}
