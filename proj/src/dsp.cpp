#include "granusense/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "granusense/csv.hpp"

namespace gsn::dsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace

void TimeSeries::validate() const {
    if (!(sample_rate > 0.0)) throw std::domain_error("time series: sample_rate must be > 0");
    if (values.empty()) throw std::domain_error("time series: length must be >= 1");
}

TimeSeries exp_filter(const TimeSeries& x, double alpha) {
    x.validate();
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("exp_filter: alpha must be in (0, 1]");
    TimeSeries y;
    y.sample_rate = x.sample_rate;
    y.values.resize(x.values.size());
    y.values[0] = x.values[0];
    for (std::size_t i = 1; i < x.values.size(); ++i)
        y.values[i] = alpha * x.values[i] + (1.0 - alpha) * y.values[i - 1];
    return y;
}

void fft(std::vector<std::complex<double>>& data) {
    const std::size_t n = data.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::domain_error("fft: size must be a power of two");

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = data[i + k];
                const std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

double fundamental_frequency(const TimeSeries& x) {
    x.validate();
    const std::size_t n = x.values.size();
    if (n < 2) throw std::domain_error("fundamental_frequency: need at least 2 samples");

    const double mean = std::accumulate(x.values.begin(), x.values.end(), 0.0) /
                        static_cast<double>(n);
    double peak_dev = 0.0;
    for (double v : x.values) peak_dev = std::max(peak_dev, std::abs(v - mean));
    if (peak_dev < 1e-12) throw std::domain_error("fundamental_frequency: no spectral peak");

    // Hann window on the mean-removed samples, zero-padded for a finer bin
    // grid before the parabolic refinement.
    const std::size_t nfft = std::max<std::size_t>(next_pow2(n) * 2, 64);
    std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                              static_cast<double>(n - 1));
        buf[i] = {(x.values[i] - mean) * w, 0.0};
    }
    fft(buf);

    const std::size_t half = nfft / 2;
    std::size_t peak = 1;
    double peak_mag = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
        const double m = std::abs(buf[k]);
        if (m > peak_mag) {
            peak_mag = m;
            peak = k;
        }
    }
    if (peak_mag <= 0.0) throw std::domain_error("fundamental_frequency: no spectral peak");

    const double bin_hz = x.sample_rate / static_cast<double>(nfft);
    double k_refined = static_cast<double>(peak);
    if (peak > 1 && peak < half) {
        const double y1 = std::log(std::max(std::abs(buf[peak - 1]), 1e-300));
        const double y2 = std::log(peak_mag);
        const double y3 = std::log(std::max(std::abs(buf[peak + 1]), 1e-300));
        const double denom = y1 - 2.0 * y2 + y3;
        if (denom < -1e-300) {
            double delta = 0.5 * (y1 - y3) / denom;
            delta = std::clamp(delta, -0.5, 0.5);
            k_refined += delta;
        }
    }
    return std::clamp(k_refined * bin_hz, 0.0, x.sample_rate / 2.0);
}

double peak_amplitude(const TimeSeries& x) {
    x.validate();
    const std::size_t n = x.values.size();
    const double mean = std::accumulate(x.values.begin(), x.values.end(), 0.0) /
                        static_cast<double>(n);
    double ss = 0.0;
    for (double v : x.values) ss += (v - mean) * (v - mean);
    return std::sqrt(2.0 * ss / static_cast<double>(n));
}

double mean_fundamental(const std::vector<TimeSeries>& trials) {
    if (trials.empty()) throw std::domain_error("mean_fundamental: need at least one trial");
    double sum = 0.0;
    for (const auto& t : trials) sum += fundamental_frequency(t);
    return sum / static_cast<double>(trials.size());
}

void write_timeseries_csv(const std::string& path, const TimeSeries& ts) {
    ts.validate();
    auto out = csv::open_out(path);
    out << "# sample_rate_hz=" << csv::format_double(ts.sample_rate) << "\n";
    out << "t,value\n";
    const double dt = 1.0 / ts.sample_rate;
    for (std::size_t i = 0; i < ts.values.size(); ++i)
        out << csv::format_double(static_cast<double>(i) * dt) << ','
            << csv::format_double(ts.values[i]) << '\n';
}

TimeSeries read_timeseries_csv(const std::string& path) {
    auto in = csv::open_in(path);
    TimeSeries ts;
    std::string line;
    int lineno = 0;
    bool have_rate = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') {
            const auto eq = line.find("sample_rate_hz=");
            if (eq != std::string::npos)
                ts.sample_rate = csv::parse_double(line.substr(eq + 15), path, lineno),
                have_rate = true;
            continue;
        }
        if (line.rfind("t,", 0) == 0) continue; // column header
        const auto fields = csv::split_fields(line);
        if (fields.size() != 2)
            throw csv::ParseError(path, lineno, "expected 't,value' row");
        csv::parse_double(fields[0], path, lineno); // time column, implied by rate
        ts.values.push_back(csv::parse_double(fields[1], path, lineno));
    }
    if (!have_rate)
        throw csv::ParseError(path, std::max(lineno, 1), "missing '# sample_rate_hz=' header");
    if (ts.values.empty())
        throw csv::ParseError(path, std::max(lineno, 1), "no samples");
    return ts;
}

} // namespace gsn::dsp
