#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedus/signal/filters.hpp"
#include "fedus/signal/spectral.hpp"
#include "fedus/signal/waveform.hpp"

namespace fedus::preprocess {

using signal::Waveform;

inline constexpr double homomorphic_floor = 1e-6;

/// exp(lowpass(log(|analytic(x)| + eps))), zero-phase first-order low-pass.
inline Waveform homomorphic_envelope(const Waveform& dus, double lpf_hz = 8.0) {
    signal::validate(dus, 4);
    auto env = signal::analytic_envelope(std::span<const double>(dus.samples));
    for (double& v : env) v = std::log(v + homomorphic_floor);
    env = signal::lowpass1_zero_phase(env, lpf_hz, dus.fs);
    for (double& v : env) v = std::exp(v);
    return {std::move(env), dus.fs};
}

/// Derivative -> squaring -> 100 ms moving-window integration. The derivative
/// and the window are centered, so envelope maxima coincide with QRS centers.
inline Waveform pan_tompkins_envelope(const Waveform& fecg, double window_s = 0.1) {
    signal::validate(fecg);
    auto win = static_cast<std::size_t>(std::lround(window_s * fecg.fs));
    if (win % 2 == 0) ++win;
    if (fecg.size() < win) throw std::invalid_argument("pan_tompkins_envelope: signal shorter than integration window");

    const auto& x = fecg.samples;
    const std::size_t n = x.size();
    auto at = [&](std::ptrdiff_t i) { return i < 0 || i >= static_cast<std::ptrdiff_t>(n) ? 0.0 : x[static_cast<std::size_t>(i)]; };
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::ptrdiff_t>(i);
        const double d = (2.0 * at(k + 1) + at(k + 2) - at(k - 2) - 2.0 * at(k - 1)) * fecg.fs / 8.0;
        sq[i] = d * d;
    }
    // Centered running mean with a prefix sum.
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + sq[i];
    const std::size_t half = win / 2;
    Waveform out{std::vector<double>(n), fecg.fs};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n, i + half + 1);
        out.samples[i] = std::max(0.0, prefix[hi] - prefix[lo]) / static_cast<double>(win);
    }
    return out;
}

} // namespace fedus::preprocess
