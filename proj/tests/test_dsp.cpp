#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>

#include "granusense/csv.hpp"
#include "granusense/dsp.hpp"
#include "granusense/rng.hpp"

using namespace gsn;
using namespace gsn::dsp;

namespace {

constexpr double kPi = 3.14159265358979323846;

TimeSeries tone(double freq, double rate, double seconds, double noise_sigma = 0.0,
                std::uint64_t seed = 0) {
    TimeSeries ts;
    ts.sample_rate = rate;
    const auto n = static_cast<std::size_t>(rate * seconds);
    ts.values.reserve(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        double v = std::sin(2.0 * kPi * freq * t);
        if (noise_sigma > 0.0) v += rng.normal(0.0, noise_sigma);
        ts.values.push_back(v);
    }
    return ts;
}

// Closed-form EMA: y_t = (1-a)^t x_0 + a * sum_{k=1..t} (1-a)^{t-k} x_k.
// Independent of the recurrence implementation.
std::vector<double> ema_closed_form(const std::vector<double>& x, double alpha) {
    std::vector<double> y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        double acc = std::pow(1.0 - alpha, static_cast<double>(t)) * x[0];
        for (std::size_t k = 1; k <= t; ++k)
            acc += alpha * std::pow(1.0 - alpha, static_cast<double>(t - k)) * x[k];
        y[t] = acc;
    }
    return y;
}

} // namespace

TEST_CASE("exp_filter fixed point and hand-unrolled step response") {
    TimeSeries constant{10.0, {5, 5, 5, 5}};
    const auto same = exp_filter(constant, 0.1);
    for (double v : same.values) CHECK(v == doctest::Approx(5.0).epsilon(1e-15));

    TimeSeries step{10.0, {0, 1, 1, 1}};
    const auto smoothed = exp_filter(step, 0.1);
    REQUIRE(smoothed.values.size() == 4);
    CHECK(smoothed.values[0] == doctest::Approx(0.0));
    CHECK(smoothed.values[1] == doctest::Approx(0.1));
    CHECK(smoothed.values[2] == doctest::Approx(0.19));
    CHECK(smoothed.values[3] == doctest::Approx(0.271));
}

TEST_CASE("exp_filter alpha = 1 is the identity") {
    TimeSeries x{100.0, {3.0, -1.5, 2.25, 9.0, 0.0}};
    const auto y = exp_filter(x, 1.0);
    CHECK(y.values == x.values);
    CHECK(y.sample_rate == x.sample_rate);
}

TEST_CASE("exp_filter rejects alpha outside (0, 1]") {
    TimeSeries x{100.0, {1.0, 2.0}};
    CHECK_THROWS_AS(exp_filter(x, 0.0), std::domain_error);
    CHECK_THROWS_AS(exp_filter(x, -0.2), std::domain_error);
    CHECK_THROWS_AS(exp_filter(x, 1.5), std::domain_error);
}

TEST_CASE("exp_filter matches the closed form on random series") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        TimeSeries x;
        x.sample_rate = 100.0;
        const std::size_t n = 5 + rng.below(60);
        for (std::size_t i = 0; i < n; ++i) x.values.push_back(rng.uniform(-10.0, 10.0));
        const double alpha = rng.uniform(0.05, 1.0);
        const auto y = exp_filter(x, alpha);
        const auto expected = ema_closed_form(x.values, alpha);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(y.values[i] - expected[i]) < 1e-12);
    }
}

TEST_CASE("exp_filter is linear and bounded by the input range") {
    Rng rng(7);
    TimeSeries x{50.0, {}}, y{50.0, {}};
    for (int i = 0; i < 200; ++i) {
        x.values.push_back(rng.uniform(-5.0, 5.0));
        y.values.push_back(rng.uniform(-5.0, 5.0));
    }
    const double a = 2.5, b = -1.25, alpha = 0.3;

    TimeSeries combo{50.0, {}};
    for (int i = 0; i < 200; ++i) combo.values.push_back(a * x.values[i] + b * y.values[i]);
    const auto lhs = exp_filter(combo, alpha);
    const auto fx = exp_filter(x, alpha);
    const auto fy = exp_filter(y, alpha);
    for (int i = 0; i < 200; ++i)
        CHECK(lhs.values[i] ==
              doctest::Approx(a * fx.values[i] + b * fy.values[i]).epsilon(1e-12));

    const double lo = *std::min_element(x.values.begin(), x.values.end());
    const double hi = *std::max_element(x.values.begin(), x.values.end());
    for (double v : fx.values) {
        CHECK(v >= lo - 1e-12);
        CHECK(v <= hi + 1e-12);
    }
}

TEST_CASE("fundamental frequency of the measured tones") {
    // 6 V profile tone, clean
    CHECK(fundamental_frequency(tone(156.0, 500.0, 5.0)) ==
          doctest::Approx(156.0).epsilon(0.2 / 156.0));
    // 10 V profile tone with noise
    CHECK(fundamental_frequency(tone(213.0, 500.0, 5.0, 0.1, 21)) ==
          doctest::Approx(213.0).epsilon(0.5 / 213.0));
}

TEST_CASE("fundamental frequency rejects DC-only and all-zero series") {
    TimeSeries dc{500.0, std::vector<double>(1000, 1.0)};
    CHECK_THROWS_AS(fundamental_frequency(dc), std::domain_error);
    TimeSeries zeros{500.0, std::vector<double>(1000, 0.0)};
    CHECK_THROWS_AS(fundamental_frequency(zeros), std::domain_error);
}

TEST_CASE("pure tones land within one natural bin before refinement, 0.2 Hz after") {
    Rng rng(31337);
    for (int trial = 0; trial < 8; ++trial) {
        const double rate = 500.0;
        const double freq = rng.uniform(20.0, 230.0);
        const auto ts = tone(freq, rate, 2.0);
        const double refined = fundamental_frequency(ts);
        CHECK(std::abs(refined - freq) < 0.2);

        // Raw windowed DFT argmax at the natural resolution.
        const std::size_t n = ts.values.size();
        double best_mag = -1.0;
        std::size_t best_k = 0;
        for (std::size_t k = 1; k <= n / 2; ++k) {
            std::complex<double> acc(0.0, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double w =
                    0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                         static_cast<double>(n - 1));
                const double ang = -2.0 * kPi * static_cast<double>(k * i) /
                                   static_cast<double>(n);
                acc += ts.values[i] * w * std::complex<double>(std::cos(ang), std::sin(ang));
            }
            if (std::abs(acc) > best_mag) {
                best_mag = std::abs(acc);
                best_k = k;
            }
        }
        const double bin_hz = rate / static_cast<double>(n);
        CHECK(std::abs(static_cast<double>(best_k) * bin_hz - freq) <= bin_hz);
    }
}

TEST_CASE("Parseval identity holds on the internal transform") {
    Rng rng(5);
    std::vector<std::complex<double>> data(1024);
    double time_energy = 0.0;
    for (auto& v : data) {
        v = {rng.uniform(-1.0, 1.0), 0.0};
        time_energy += std::norm(v);
    }
    auto spectrum = data;
    fft(spectrum);
    double freq_energy = 0.0;
    for (const auto& v : spectrum) freq_energy += std::norm(v);
    freq_energy /= static_cast<double>(data.size());
    CHECK(std::abs(time_energy - freq_energy) / time_energy < 1e-9);
}

TEST_CASE("fft rejects non-power-of-two sizes") {
    std::vector<std::complex<double>> data(100);
    CHECK_THROWS_AS(fft(data), std::domain_error);
}

TEST_CASE("mean fundamental averages trials") {
    // Two synthesized trials at the 8 V tone.
    std::vector<TimeSeries> trials{tone(189.0, 500.0, 5.0, 0.05, 1),
                                   tone(189.0, 500.0, 5.0, 0.05, 2)};
    CHECK(mean_fundamental(trials) == doctest::Approx(189.0).epsilon(0.2 / 189.0));

    // A single trial is its own mean.
    std::vector<TimeSeries> single{tone(156.0, 500.0, 5.0)};
    CHECK(mean_fundamental(single) ==
          doctest::Approx(fundamental_frequency(single[0])).epsilon(1e-12));

    CHECK_THROWS_AS(mean_fundamental({}), std::domain_error);
}

TEST_CASE("peak amplitude recovers the tone amplitude") {
    auto ts = tone(156.0, 500.0, 5.0);
    for (auto& v : ts.values) v *= 9.6;
    CHECK(peak_amplitude(ts) == doctest::Approx(9.6).epsilon(0.01));
}

TEST_CASE("time-series CSV round trip and parse errors") {
    namespace fs = std::filesystem;
    const auto tmp = fs::temp_directory_path() / "gsn_dsp_csv";
    fs::create_directories(tmp);

    const auto ts = tone(50.0, 200.0, 0.5);
    const auto path = (tmp / "tone.csv").string();
    write_timeseries_csv(path, ts);
    const auto back = read_timeseries_csv(path);
    CHECK(back.sample_rate == ts.sample_rate);
    REQUIRE(back.values.size() == ts.values.size());
    for (std::size_t i = 0; i < ts.values.size(); ++i)
        CHECK(back.values[i] == ts.values[i]);

    const auto bad = (tmp / "bad.csv").string();
    {
        auto out = csv::open_out(bad);
        out << "# sample_rate_hz=100\n";
        out << "t,value\n";
        out << "0.0,1.0\n";
        out << "0.01,not-a-number\n";
    }
    try {
        read_timeseries_csv(bad);
        FAIL("expected a parse error");
    } catch (const csv::ParseError& e) {
        CHECK(e.line() == 4);
    }

    const auto empty = (tmp / "empty.csv").string();
    { csv::open_out(empty); }
    CHECK_THROWS_AS(read_timeseries_csv(empty), csv::ParseError);
}
