#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedus/error.hpp"

namespace fedus::model {

inline constexpr std::size_t samples_per_beat = 160;
inline constexpr std::size_t output_ratio = 8;

struct ArchConfig {
    int n_filters = 64;
    int kernel = 20;
    std::vector<int> dilations{1, 2, 4, 8, 16};
    int n_beats = 1;
    std::size_t l_in = samples_per_beat;
    std::size_t l_out = output_ratio * samples_per_beat;
    int post_skip_convs = 2;

    static ArchConfig for_beats(int n_beats, int n_filters = 64) {
        ArchConfig a;
        a.n_beats = n_beats;
        a.n_filters = n_filters;
        a.l_in = samples_per_beat * static_cast<std::size_t>(n_beats);
        a.l_out = output_ratio * a.l_in;
        return a;
    }

    /// Input samples able to influence one conv-stack output.
    std::size_t receptive_field() const {
        std::size_t sum = 1;
        for (int d : dilations) sum += static_cast<std::size_t>(d);
        return static_cast<std::size_t>(kernel - 1) * sum + 1;
    }

    bool operator==(const ArchConfig&) const = default;
};

inline void validate(const ArchConfig& a) {
    if (a.n_filters <= 0) throw ConfigError("arch: n_filters must be > 0");
    if (a.kernel < 1) throw ConfigError("arch: kernel must be >= 1");
    if (a.n_beats < 1) throw ConfigError("arch: n_beats must be >= 1");
    if (a.l_in == 0) throw ConfigError("arch: L_in must be > 0");
    if (a.l_out != output_ratio * a.l_in)
        throw ConfigError("arch: L_out must equal 8 * L_in (got " + std::to_string(a.l_out) + " for L_in " +
                          std::to_string(a.l_in) + ")");
    if (a.post_skip_convs < 0) throw ConfigError("arch: post_skip_convs must be >= 0");
    if (a.dilations.empty()) throw ConfigError("arch: dilations must not be empty");
    int prev = 0;
    for (int d : a.dilations) {
        if (d < 1 || (d & (d - 1)) != 0) throw ConfigError("arch: dilations must be powers of two");
        if (d <= prev) throw ConfigError("arch: dilations must be strictly increasing");
        prev = d;
    }
}

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 10;
    std::uint64_t seed = 42;
    int n_beats = 1;
    double val_fraction = 0.10;
};

inline void validate(const TrainConfig& t) {
    if (!(t.lr > 0.0)) throw ConfigError("train: lr must be > 0");
    if (t.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (t.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (t.patience < 1 || t.patience >= t.max_epochs) throw ConfigError("train: need 1 <= patience < max_epochs");
    if (t.n_beats < 1 || t.n_beats > 3) throw ConfigError("train: n_beats must be 1, 2 or 3");
    if (!(t.val_fraction >= 0.0 && t.val_fraction < 1.0)) throw ConfigError("train: val_fraction must lie in [0, 1)");
}

} // namespace fedus::model
