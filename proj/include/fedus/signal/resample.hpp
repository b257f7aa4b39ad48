#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fedus/signal/waveform.hpp"

namespace fedus::signal {

namespace detail {

// Rational approximation p/q of `ratio` (continued fractions, bounded denominator).
inline std::pair<std::int64_t, std::int64_t> rational_ratio(double fs_in, double fs_out) {
    const double ri = std::round(fs_in), ro = std::round(fs_out);
    if (std::abs(fs_in - ri) < 1e-9 && std::abs(fs_out - ro) < 1e-9 && ri > 0 && ro > 0) {
        const auto a = static_cast<std::int64_t>(ro), b = static_cast<std::int64_t>(ri);
        const auto g = std::gcd(a, b);
        return {a / g, b / g};
    }
    const double x = fs_out / fs_in;
    std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double v = x;
    for (int it = 0; it < 32; ++it) {
        const auto a = static_cast<std::int64_t>(std::floor(v));
        const std::int64_t h2 = a * h1 + h0, k2 = a * k1 + k0;
        if (k2 > 10000) break;
        h0 = h1; h1 = h2; k0 = k1; k1 = k2;
        if (std::abs(static_cast<double>(h1) / k1 - x) < 1e-12 * x) break;
        const double frac = v - a;
        if (frac < 1e-15) break;
        v = 1.0 / frac;
    }
    return {h1, k1};
}

} // namespace detail

/// Low-pass prototype used by the resampler, at the upsampled rate fs_in*up.
/// Kaiser window (60 dB), cutoff 0.45*min(fs_in, fs_out), transition 0.1*min.
inline std::vector<double> design_resample_filter(double fs_in, double fs_out, std::int64_t up) {
    constexpr double atten_db = 60.0;
    const double beta = 0.1102 * (atten_db - 8.7);
    const double f_min = std::min(fs_in, fs_out);
    const double fc = 0.45 * f_min;
    const double tw = 0.1 * f_min;
    const double f_up = fs_in * static_cast<double>(up);
    auto taps = static_cast<std::size_t>(std::ceil((atten_db - 8.0) / (2.285 * 2.0 * std::numbers::pi * tw / f_up))) + 1;
    if (taps % 2 == 0) ++taps;

    const double mid = static_cast<double>(taps - 1) / 2.0;
    const double wc = 2.0 * fc / f_up;
    const double i0_beta = std::cyl_bessel_i(0.0, beta);
    std::vector<double> h(taps);
    for (std::size_t n = 0; n < taps; ++n) {
        const double m = static_cast<double>(n) - mid;
        const double r = m / mid;
        const double win = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
        const double arg = std::numbers::pi * wc * m;
        h[n] = win * wc * (m == 0.0 ? 1.0 : std::sin(arg) / arg);
    }
    // Unity DC gain on every polyphase branch.
    const auto step = static_cast<std::size_t>(up);
    for (std::size_t r = 0; r < step && r < taps; ++r) {
        double sum = 0.0;
        for (std::size_t n = r; n < taps; n += step) sum += h[n];
        for (std::size_t n = r; n < taps; n += step) h[n] /= sum;
    }
    return h;
}

/// Polyphase rational-rate resampler. Edges are extended with the boundary
/// value so constants pass through without transient.
inline Waveform resample(const Waveform& w, double fs_target) {
    if (!(fs_target > 0.0) || !std::isfinite(fs_target))
        throw std::invalid_argument("resample: target rate must be positive");
    validate(w);
    if (std::abs(fs_target - w.fs) <= 1e-12 * w.fs) return {w.samples, fs_target};

    const auto [up, down] = detail::rational_ratio(w.fs, fs_target);
    const auto h = design_resample_filter(w.fs, fs_target, up);
    const auto taps = static_cast<std::int64_t>(h.size());
    const std::int64_t mid = (taps - 1) / 2;
    const auto len = static_cast<std::int64_t>(w.size());
    const std::int64_t n_out = (len * up + down - 1) / down;

    Waveform out{std::vector<double>(static_cast<std::size_t>(n_out)), fs_target};
    for (std::int64_t m = 0; m < n_out; ++m) {
        const std::int64_t u = m * down + mid;  // upsampled index aligned with tap 0
        std::int64_t first = u % up;
        if (first < 0) first += up;
        double acc = 0.0;
        for (std::int64_t n = first; n < taps; n += up) {
            const std::int64_t i = std::clamp<std::int64_t>((u - n) / up, 0, len - 1);
            acc += h[static_cast<std::size_t>(n)] * w.samples[static_cast<std::size_t>(i)];
        }
        out.samples[static_cast<std::size_t>(m)] = acc;
    }
    return out;
}

} // namespace fedus::signal
