#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fedus/signal/fft.hpp"
#include "fedus/signal/waveform.hpp"

namespace fedus::signal {

/// |analytic signal| via the FFT Hilbert transform.
inline std::vector<double> analytic_envelope(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> spec(x.begin(), x.end());
    fft_inplace(spec, false);
    // One-sided spectrum: keep DC (and Nyquist for even n), double positive bins.
    const std::size_t half = n / 2;
    for (std::size_t k = 1; k < n; ++k) {
        if (k < (n + 1) / 2)
            spec[k] *= 2.0;
        else if (!(n % 2 == 0 && k == half))
            spec[k] = 0.0;
    }
    fft_inplace(spec, true);
    std::vector<double> env(n);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(spec[i]) * inv;
    return env;
}

inline Waveform analytic_envelope(const Waveform& w) {
    validate(w, 4);
    return {analytic_envelope(std::span<const double>(w.samples)), w.fs};
}

/// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

/// Welch estimate: Hann-windowed, mean-removed segments, averaged one-sided
/// periodograms scaled as a density (power per Hz).
inline PsdEstimate welch_psd(std::span<const double> x, double fs, std::size_t seg_len, double overlap) {
    if (seg_len < 2) throw std::invalid_argument("welch_psd: segment length must be >= 2");
    if (seg_len > x.size()) throw std::invalid_argument("welch_psd: segment longer than signal");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("welch_psd: overlap must be in [0,1)");
    if (!(fs > 0.0)) throw std::invalid_argument("welch_psd: sampling rate must be positive");

    const auto win = hann_window(seg_len);
    double win_power = 0.0;
    for (double v : win) win_power += v * v;
    const std::size_t step = std::max<std::size_t>(
        1, seg_len - static_cast<std::size_t>(std::llround(overlap * static_cast<double>(seg_len))));
    const std::size_t n_bins = seg_len / 2 + 1;

    PsdEstimate psd;
    psd.freqs.resize(n_bins);
    psd.power.assign(n_bins, 0.0);
    for (std::size_t k = 0; k < n_bins; ++k) psd.freqs[k] = fs * static_cast<double>(k) / static_cast<double>(seg_len);

    RealFftPlan plan(seg_len);
    std::size_t n_seg = 0;
    for (std::size_t start = 0; start + seg_len <= x.size(); start += step, ++n_seg) {
        double mean = 0.0;
        for (std::size_t i = 0; i < seg_len; ++i) mean += x[start + i];
        mean /= static_cast<double>(seg_len);
        auto in = plan.input();
        for (std::size_t i = 0; i < seg_len; ++i) in[i] = (x[start + i] - mean) * win[i];
        const auto spec = plan.execute();
        for (std::size_t k = 0; k < n_bins; ++k) psd.power[k] += std::norm(spec[k]);
    }
    const double scale = 1.0 / (fs * win_power * static_cast<double>(n_seg));
    for (std::size_t k = 0; k < n_bins; ++k) {
        const bool edge = k == 0 || (seg_len % 2 == 0 && k == n_bins - 1);
        psd.power[k] *= scale * (edge ? 1.0 : 2.0);
    }
    return psd;
}

inline PsdEstimate welch_psd(const Waveform& w, std::size_t seg_len, double overlap) {
    validate(w);
    return welch_psd(std::span<const double>(w.samples), w.fs, seg_len, overlap);
}

} // namespace fedus::signal
