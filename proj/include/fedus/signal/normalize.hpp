#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedus/signal/waveform.hpp"

namespace fedus::signal {

/// Affine map of the samples onto [-1, 1]: min -> -1, max -> +1.
/// Throws on a constant (degenerate-range) input.
inline std::vector<double> minmax_normalize(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("minmax_normalize: empty input");
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) throw std::invalid_argument("minmax_normalize: degenerate (constant) range");
    if (lo == -1.0 && hi == 1.0) return {x.begin(), x.end()};
    std::vector<double> y(x.size());
    const double range = hi - lo;
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::clamp((2.0 * x[i] - lo - hi) / range, -1.0, 1.0);
    // Endpoints exactly at the bounds.
    y[static_cast<std::size_t>(lo_it - x.begin())] = -1.0;
    y[static_cast<std::size_t>(hi_it - x.begin())] = 1.0;
    return y;
}

inline Waveform minmax_normalize(const Waveform& w) {
    validate(w);
    return {minmax_normalize(std::span<const double>(w.samples)), w.fs};
}

} // namespace fedus::signal
