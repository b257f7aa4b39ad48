#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedus/signal/waveform.hpp"

namespace fedus::preprocess {

using signal::Waveform;

/// Lag (seconds) maximizing the normalized cross-correlation of two envelopes
/// sampled at the same rate. Positive means the DUS envelope trails the FECG one.
inline double estimate_lag(const Waveform& env_dus, const Waveform& env_fecg, double max_lag_s = 2.0) {
    signal::validate(env_dus);
    signal::validate(env_fecg);
    if (std::abs(env_dus.fs - env_fecg.fs) > 1e-9 * env_dus.fs)
        throw std::invalid_argument("estimate_lag: envelopes must share a sampling rate");
    if (!(max_lag_s > 0.0)) throw std::invalid_argument("estimate_lag: max lag must be positive");
    const double fs = env_dus.fs;
    const auto max_lag = static_cast<std::ptrdiff_t>(std::lround(max_lag_s * fs));
    const std::size_t n = std::min(env_dus.size(), env_fecg.size());
    if (n < static_cast<std::size_t>(2 * max_lag + 1))
        throw std::invalid_argument("estimate_lag: envelopes shorter than the lag window");

    auto centered = [n](const std::vector<double>& v) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += v[i];
        mean /= static_cast<double>(n);
        std::vector<double> c(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = v[i] - mean;
            ss += c[i] * c[i];
        }
        const double inv = ss > 0.0 ? 1.0 / std::sqrt(ss) : 0.0;
        for (double& x : c) x *= inv;
        return c;
    };
    const auto d = centered(env_dus.samples);
    const auto f = centered(env_fecg.samples);

    const auto count = static_cast<std::ptrdiff_t>(n);
    std::vector<double> r(static_cast<std::size_t>(2 * max_lag + 1));
    for (std::ptrdiff_t lag = -max_lag; lag <= max_lag; ++lag) {
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -lag);
        const std::ptrdiff_t t1 = std::min(count, count - lag);
        double acc = 0.0;
        for (std::ptrdiff_t t = t0; t < t1; ++t) acc += f[static_cast<std::size_t>(t)] * d[static_cast<std::size_t>(t + lag)];
        r[static_cast<std::size_t>(lag + max_lag)] = acc;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.size(); ++i)
        if (r[i] > r[best]) best = i;
    double offset = 0.0;
    if (best > 0 && best + 1 < r.size()) {
        const double a = r[best - 1], b = r[best], c = r[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom < 0.0) offset = 0.5 * (a - c) / denom;
    }
    return (static_cast<double>(best) - static_cast<double>(max_lag) + offset) / fs;
}

/// Advances a waveform by `lag_s` (removes a trailing lag); vacated samples are zero.
inline Waveform remove_lag(const Waveform& w, double lag_s) {
    const auto shift = static_cast<std::ptrdiff_t>(std::lround(lag_s * w.fs));
    const auto n = static_cast<std::ptrdiff_t>(w.size());
    Waveform out{std::vector<double>(w.size(), 0.0), w.fs};
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t src = i + shift;
        if (src >= 0 && src < n) out.samples[static_cast<std::size_t>(i)] = w.samples[static_cast<std::size_t>(src)];
    }
    return out;
}

} // namespace fedus::preprocess
