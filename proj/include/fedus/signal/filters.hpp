#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedus/signal/waveform.hpp"

namespace fedus::signal {

/// Second-order section, a0 normalized to 1.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

using Sos = std::vector<Biquad>;

inline std::complex<double> frequency_response(const Sos& sos, double f, double fs) {
    const std::complex<double> zi = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);
    const std::complex<double> zi2 = zi * zi;
    std::complex<double> h = 1.0;
    for (const auto& s : sos)
        h *= (s.b0 + s.b1 * zi + s.b2 * zi2) / (1.0 + s.a1 * zi + s.a2 * zi2);
    return h;
}

inline double magnitude_db(const Sos& sos, double f, double fs) {
    return 20.0 * std::log10(std::abs(frequency_response(sos, f, fs)));
}

/// Digital Butterworth band-pass: `order` analog prototype poles, each mapped
/// to a band-pass pole pair, then through the prewarped bilinear transform.
/// Produces `order` biquads with unity gain at the geometric band center.
inline Sos design_butter_bandpass(double fs, double f_lo, double f_hi, int order) {
    if (order < 1) throw std::invalid_argument("butter_bandpass: order must be >= 1");
    if (!(f_lo > 0.0) || !(f_hi > f_lo) || !(f_hi < fs / 2.0))
        throw std::invalid_argument("butter_bandpass: need 0 < f_lo < f_hi < fs/2");

    using cd = std::complex<double>;
    const double k = 2.0 * fs;
    const double wl = k * std::tan(std::numbers::pi * f_lo / fs);
    const double wh = k * std::tan(std::numbers::pi * f_hi / fs);
    const double w0 = std::sqrt(wl * wh);
    const double bw = wh - wl;

    std::vector<cd> upper;  // digital poles with Im > 0
    std::vector<double> real_poles;
    for (int i = 0; i < order; ++i) {
        const cd p = std::polar(1.0, std::numbers::pi * (2.0 * i + order + 1) / (2.0 * order));
        const cd pb = p * bw;
        const cd disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
        for (const cd s : {(pb + disc) / 2.0, (pb - disc) / 2.0}) {
            const cd z = (k + s) / (k - s);
            if (std::abs(z.imag()) < 1e-12)
                real_poles.push_back(z.real());
            else if (z.imag() > 0)
                upper.push_back(z);
        }
    }
    std::sort(real_poles.begin(), real_poles.end());

    Sos sos;
    for (const cd z : upper) sos.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
    for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2)
        sos.push_back({1.0, 0.0, -1.0, -(real_poles[i] + real_poles[i + 1]),
                       real_poles[i] * real_poles[i + 1]});
    if (sos.size() != static_cast<std::size_t>(order))
        throw std::logic_error("butter_bandpass: pole pairing failed");

    const double fc = fs / std::numbers::pi * std::atan(w0 / k);
    const double g = 1.0 / std::abs(frequency_response(sos, fc, fs));
    sos.front().b0 *= g;
    sos.front().b1 *= g;
    sos.front().b2 *= g;
    return sos;
}

/// Causal cascade filtering (transposed direct form II), zero initial state.
inline std::vector<double> sosfilt(const Sos& sos, std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    for (const auto& s : sos) {
        double z1 = 0.0, z2 = 0.0;
        for (double& v : y) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

inline Waveform butter_bandpass(const Waveform& w, double f_lo, double f_hi, int order = 2) {
    validate(w);
    const auto sos = design_butter_bandpass(w.fs, f_lo, f_hi, order);
    return {sosfilt(sos, w.samples), w.fs};
}

/// First-order bilinear low-pass run forward then backward (zero phase).
/// The state is initialized at the edge value so a constant passes unchanged.
inline std::vector<double> lowpass1_zero_phase(std::span<const double> x, double fc, double fs) {
    if (!(fc > 0.0) || !(fc < fs / 2.0))
        throw std::invalid_argument("lowpass: cutoff must lie in (0, fs/2)");
    std::vector<double> y(x.begin(), x.end());
    if (y.empty()) return y;
    const double kk = std::tan(std::numbers::pi * fc / fs);
    const double b = kk / (1.0 + kk);
    const double a1 = (kk - 1.0) / (kk + 1.0);
    auto pass = [&](auto first, auto last) {
        double xp = *first, yp = *first;
        for (auto it = first; it != last; ++it) {
            const double xn = *it;
            const double yn = b * xn + b * xp - a1 * yp;
            xp = xn;
            yp = yn;
            *it = yn;
        }
    };
    pass(y.begin(), y.end());
    pass(y.rbegin(), y.rend());
    return y;
}

/// Linear-phase Hamming-windowed sinc band-pass. Tap count is 4*fs/transition
/// rounded to the nearest odd integer; gain is unity at the band center.
inline std::vector<double> design_fir_bandpass(double fs, double pass_lo, double pass_hi,
                                               double transition_hz = 1.0) {
    if (!(pass_lo > 0.0) || !(pass_hi > pass_lo) || !(pass_hi < fs / 2.0))
        throw std::invalid_argument("fir_bandpass: need 0 < pass_lo < pass_hi < fs/2");
    if (!(transition_hz > 0.0)) throw std::invalid_argument("fir_bandpass: transition must be positive");

    auto taps = static_cast<std::size_t>(std::lround(4.0 * fs / transition_hz));
    if (taps % 2 == 0) ++taps;
    taps = std::max<std::size_t>(taps, 3);
    const double mid = static_cast<double>(taps - 1) / 2.0;
    const double lo = pass_lo / fs, hi = pass_hi / fs;

    auto sinc = [](double v) {
        return v == 0.0 ? 1.0 : std::sin(std::numbers::pi * v) / (std::numbers::pi * v);
    };
    std::vector<double> h(taps);
    for (std::size_t n = 0; n < taps; ++n) {
        const double m = static_cast<double>(n) - mid;
        const double win = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (taps - 1));
        h[n] = win * (2.0 * hi * sinc(2.0 * hi * m) - 2.0 * lo * sinc(2.0 * lo * m));
    }
    const double fc = 0.5 * (pass_lo + pass_hi);
    std::complex<double> g = 0.0;
    for (std::size_t n = 0; n < taps; ++n)
        g += h[n] * std::polar(1.0, -2.0 * std::numbers::pi * fc / fs * static_cast<double>(n));
    const double norm = 1.0 / std::abs(g);
    for (double& v : h) v *= norm;
    return h;
}

inline double fir_magnitude_db(std::span<const double> h, double f, double fs) {
    std::complex<double> g = 0.0;
    for (std::size_t n = 0; n < h.size(); ++n)
        g += h[n] * std::polar(1.0, -2.0 * std::numbers::pi * f / fs * static_cast<double>(n));
    return 20.0 * std::log10(std::abs(g));
}

/// Odd-length FIR applied with its (taps-1)/2 group delay removed; zero outside the signal.
inline std::vector<double> fir_filter_centered(std::span<const double> h, std::span<const double> x) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const auto taps = static_cast<std::ptrdiff_t>(h.size());
    const std::ptrdiff_t mid = (taps - 1) / 2;
    std::vector<double> y(x.size(), 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        // y[i] = sum_k h[k] x[i + mid - k]
        const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, i + mid - (n - 1));
        const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(taps - 1, i + mid);
        double acc = 0.0;
        for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) acc += h[k] * x[i + mid - k];
        y[i] = acc;
    }
    return y;
}

inline Waveform fir_bandpass(const Waveform& w, double pass_lo, double pass_hi, double transition_hz = 1.0) {
    validate(w);
    const auto h = design_fir_bandpass(w.fs, pass_lo, pass_hi, transition_hz);
    return {fir_filter_centered(h, w.samples), w.fs};
}

} // namespace fedus::signal
