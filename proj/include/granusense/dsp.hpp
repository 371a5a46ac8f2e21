// Signal analysis: exponential smoothing of force traces and FFT fundamental
// frequency extraction from accelerometer records.
#pragma once

#include <complex>
#include <string>
#include <vector>

namespace gsn::dsp {

struct TimeSeries {
    double sample_rate = 0.0; // Hz
    std::vector<double> values;

    void validate() const; // sample_rate > 0, length >= 1
};

// Causal single-pass EMA: y0 = x0, yt = alpha*xt + (1-alpha)*y(t-1).
TimeSeries exp_filter(const TimeSeries& x, double alpha);

// In-place radix-2 FFT; size must be a power of two. Forward transform,
// no normalization. Exposed so the Parseval property can be checked directly.
void fft(std::vector<std::complex<double>>& data);

// Frequency of the largest non-DC magnitude bin of the Hann-windowed,
// zero-padded spectrum, refined by parabolic interpolation of the
// log-magnitude peak. Result in [0, sample_rate/2]. The mean is removed
// first, so a DC-only series has no spectral peak and throws.
double fundamental_frequency(const TimeSeries& x);

// sqrt(2) * RMS of the mean-removed signal; equals the sinusoid amplitude
// for a pure tone.
double peak_amplitude(const TimeSeries& x);

double mean_fundamental(const std::vector<TimeSeries>& trials);

// CSV time-series: "# sample_rate_hz=<v>" comment, "t,value" header, rows.
void write_timeseries_csv(const std::string& path, const TimeSeries& ts);
TimeSeries read_timeseries_csv(const std::string& path);

} // namespace gsn::dsp
