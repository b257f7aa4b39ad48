#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedus/preprocess/records.hpp"
#include "fedus/random.hpp"

namespace fedus::synth {

using preprocess::SegmentAnnotation;
using preprocess::SubjectRecord;
using signal::Waveform;

struct SynthConfig {
    int n_subjects = 5;
    double duration_s = 600.0;
    double fhr_base = 135.0;       // bpm, center of the subject spread
    double fhr_spread = 30.0;      // subjects evenly spaced over base +- spread/2
    double fhr_variability = 6.0;  // bpm std of the per-beat random walk
    double dus_peak_hz = 200.0;
    double noise_snr_db = 20.0;
    double fecg_snr_db = 20.0;     // best channel; each further channel is 4 dB worse
    std::uint64_t seed = 42;
    int n_channels = 3;
    double lag_s = 0.10;           // injected DUS delay
    double corruption_fraction = 0.0;
    double dus_fs = 2000.0;
    double fecg_fs = 250.0;
    double peak_grid_hz = 250.0;   // R peaks snapped to this grid; 0 keeps them continuous
    // DUS valve-event bursts
    double systolic_delay_s = 0.04;
    double systolic_width_s = 0.05;
    double diastolic_fraction = 0.45;
    double diastolic_width_s = 0.07;
    double diastolic_amp = 0.6;
};

inline void validate(const SynthConfig& c) {
    if (c.n_subjects < 1) throw ConfigError("synth: n_subjects must be >= 1");
    if (!(c.duration_s >= 30.0)) throw ConfigError("synth: duration_s must be >= 30");
    if (!(c.fhr_base >= 90.0 && c.fhr_base <= 200.0)) throw ConfigError("synth: fhr_base must lie in [90, 200]");
    if (!(c.fhr_spread >= 0.0)) throw ConfigError("synth: fhr_spread must be >= 0");
    if (!(c.fhr_variability >= 0.0)) throw ConfigError("synth: fhr_variability must be >= 0");
    if (!(c.dus_peak_hz > 25.0 && c.dus_peak_hz < 600.0)) throw ConfigError("synth: dus_peak_hz must lie in (25, 600)");
    if (c.n_channels < 1 || c.n_channels > 7) throw ConfigError("synth: n_channels must be 1..7");
    if (!(c.corruption_fraction >= 0.0 && c.corruption_fraction <= 1.0))
        throw ConfigError("synth: corruption_fraction must lie in [0, 1]");
    if (!(c.lag_s >= 0.0 && c.lag_s < 1.0)) throw ConfigError("synth: lag_s must lie in [0, 1)");
    if (!(c.dus_fs > 1300.0) || !(c.fecg_fs > 100.0)) throw ConfigError("synth: sampling rates too low");
    if (!(c.peak_grid_hz >= 0.0)) throw ConfigError("synth: peak_grid_hz must be >= 0");
}

using fedus::splitmix64;
using fedus::substream;

// --------------------------------------------------------------------- FECG

struct FecgBeats {
    Waveform ecg;
    std::vector<double> peaks;  // exact R centers, seconds
    std::vector<double> fhr;    // bpm that set the interval after each peak
};

/// Clean quasi-periodic ECG: Gaussian P, Q, R, S, T waves per beat. The heart
/// rate follows an AR(1) walk around cfg.fhr_base, clamped to [90, 200] bpm.
inline FecgBeats gen_fecg(const SynthConfig& cfg, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> uni(0.05, 0.45);
    constexpr double rho = 0.98;
    const double innov = cfg.fhr_variability * std::sqrt(1.0 - rho * rho);

    FecgBeats out;
    double dev = cfg.fhr_variability * gauss(rng);
    double t = uni(rng);
    while (t < cfg.duration_s - 1e-9) {
        const double bpm = std::clamp(cfg.fhr_base + dev, 90.0, 200.0);
        out.peaks.push_back(cfg.peak_grid_hz > 0 ? std::round(t * cfg.peak_grid_hz) / cfg.peak_grid_hz : t);
        out.fhr.push_back(bpm);
        t += 60.0 / bpm;
        dev = rho * dev + innov * gauss(rng);
    }

    struct Wave { double offset, sigma, amp; bool scales; };
    static constexpr Wave waves[] = {
        {-0.090, 0.015, 0.12, true},  // P
        {-0.015, 0.005, -0.15, false}, // Q
        {0.000, 0.007, 1.00, false},   // R
        {0.016, 0.006, -0.25, false},  // S
        {0.170, 0.030, 0.30, true},    // T
    };
    const double fs = cfg.fecg_fs;
    const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * fs));
    out.ecg = {std::vector<double>(n, 0.0), fs};
    for (std::size_t k = 0; k < out.peaks.size(); ++k) {
        const double interval = 60.0 / out.fhr[k];
        const double q = std::sqrt(interval / 0.43);
        for (const auto& w : waves) {
            const double center = out.peaks[k] + (w.scales ? w.offset * q : w.offset);
            const double sigma = w.scales ? w.sigma * q : w.sigma;
            const auto lo = static_cast<std::ptrdiff_t>(std::floor((center - 5 * sigma) * fs));
            const auto hi = static_cast<std::ptrdiff_t>(std::ceil((center + 5 * sigma) * fs));
            for (auto i = std::max<std::ptrdiff_t>(lo, 0); i <= hi && i < static_cast<std::ptrdiff_t>(n); ++i) {
                const double dt = static_cast<double>(i) / fs - center;
                out.ecg.samples[static_cast<std::size_t>(i)] += w.amp * std::exp(-0.5 * dt * dt / (sigma * sigma));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------- DUS

/// Band-limited noise realization: a random-phase multisine on 150-400 Hz
/// (2.5 Hz spacing, so periodic in 0.4 s) with a Gaussian amplitude profile
/// centered at `peak_hz`, divided by its locally smoothed RMS so that any
/// stretch of it carries about the same energy. Tabulated over one period and
/// linearly interpolated, so it can be evaluated at any time offset.
class Carrier {
public:
    static constexpr double period_s = 0.4;
    static constexpr double table_rate = 64000.0;

    Carrier(double peak_hz, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        struct Component { double omega, amp, phase; };
        std::vector<Component> comps;
        for (double f = 150.0; f <= 400.0; f += 2.5) {
            const double a = std::exp(-0.5 * (f - peak_hz) * (f - peak_hz) / (60.0 * 60.0));
            comps.push_back({2.0 * std::numbers::pi * f, a, phase(rng)});
        }
        const auto n = static_cast<std::size_t>(period_s * table_rate);
        std::vector<double> re(n), power(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double tau = static_cast<double>(i) / table_rate;
            double x = 0.0, y = 0.0;
            for (const auto& c : comps) {
                x += c.amp * std::cos(c.omega * tau + c.phase);
                y += c.amp * std::sin(c.omega * tau + c.phase);
            }
            re[i] = x;
            power[i] = x * x + y * y;
        }
        // circular Gaussian smoothing of the instantaneous power, sigma 2 ms
        const double sigma = 0.002 * table_rate;
        const auto half = static_cast<std::ptrdiff_t>(std::ceil(4 * sigma));
        std::vector<double> kernel;
        double ksum = 0.0;
        for (std::ptrdiff_t k = -half; k <= half; ++k) {
            kernel.push_back(std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma)));
            ksum += kernel.back();
        }
        table_.resize(n + 1);
        double ms = 0.0;
        const auto sn = static_cast<std::ptrdiff_t>(n);
        for (std::ptrdiff_t i = 0; i < sn; ++i) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -half; k <= half; ++k)
                acc += kernel[static_cast<std::size_t>(k + half)] * power[static_cast<std::size_t>(((i + k) % sn + sn) % sn)];
            table_[static_cast<std::size_t>(i)] = re[static_cast<std::size_t>(i)] / std::sqrt(acc / ksum);
            ms += table_[static_cast<std::size_t>(i)] * table_[static_cast<std::size_t>(i)];
        }
        const double scale = 1.0 / std::sqrt(ms / static_cast<double>(n));
        for (auto& v : table_) v *= scale;
        table_[n] = table_[0];
    }

    double operator()(double tau) const {
        double pos = std::fmod(tau, period_s) * table_rate;
        if (pos < 0) pos += period_s * table_rate;
        const auto i = std::min(static_cast<std::size_t>(pos), table_.size() - 2);
        const double frac = pos - static_cast<double>(i);
        return table_[i] + frac * (table_[i + 1] - table_[i]);
    }

private:
    std::vector<double> table_;
};

/// Two Gaussian bursts per cardiac cycle (systolic, diastolic), each carrying a
/// fixed band-limited carrier locked to the cycle onset, delayed by cfg.lag_s,
/// plus a white noise floor at cfg.noise_snr_db.
inline Waveform gen_dus(const std::vector<double>& peaks, const SynthConfig& cfg, std::mt19937_64& rng) {
    if (peaks.empty()) throw std::invalid_argument("gen_dus: empty peak list");
    for (std::size_t i = 1; i < peaks.size(); ++i)
        if (!(peaks[i] > peaks[i - 1])) throw std::invalid_argument("gen_dus: peaks must be ascending");

    // Dataset-level carriers: identical for every subject.
    auto carrier_rng = substream(cfg.seed, "carrier");
    const Carrier systolic(cfg.dus_peak_hz, carrier_rng);
    const Carrier diastolic(cfg.dus_peak_hz, carrier_rng);

    const double fs = cfg.dus_fs;
    const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * fs));
    Waveform w{std::vector<double>(n, 0.0), fs};
    // Carrier time is measured from the (delayed) cycle onset, so its phase at
    // the burst depends only on where the burst sits within the cycle.
    auto add_burst = [&](double onset, double center, double fwhm, double amp, const Carrier& carrier) {
        const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
        const auto lo = static_cast<std::ptrdiff_t>(std::floor((center - 4 * sigma) * fs));
        const auto hi = static_cast<std::ptrdiff_t>(std::ceil((center + 4 * sigma) * fs));
        for (auto i = std::max<std::ptrdiff_t>(lo, 0); i <= hi && i < static_cast<std::ptrdiff_t>(n); ++i) {
            const double t = static_cast<double>(i) / fs;
            const double tau = t - center;
            w.samples[static_cast<std::size_t>(i)] +=
                amp * std::exp(-0.5 * tau * tau / (sigma * sigma)) * carrier(t - onset);
        }
    };
    for (std::size_t k = 0; k < peaks.size(); ++k) {
        const double interval = k + 1 < peaks.size() ? peaks[k + 1] - peaks[k] : (k > 0 ? peaks[k] - peaks[k - 1] : 0.43);
        const double onset = peaks[k] + cfg.lag_s;
        add_burst(onset, onset + cfg.systolic_delay_s, cfg.systolic_width_s, 1.0, systolic);
        add_burst(onset, onset + cfg.diastolic_fraction * interval, cfg.diastolic_width_s, cfg.diastolic_amp, diastolic);
    }

    double power = 0.0;
    for (double v : w.samples) power += v * v;
    power /= static_cast<double>(n);
    const double noise_sd = std::sqrt(power / std::pow(10.0, cfg.noise_snr_db / 10.0));
    std::normal_distribution<double> gauss(0.0, noise_sd);
    for (double& v : w.samples) v += gauss(rng);
    return w;
}

// ------------------------------------------------------------------ dataset

inline std::string subject_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%02d", index + 1);
    return buf;
}

inline double subject_fhr_base(const SynthConfig& cfg, int index) {
    if (cfg.n_subjects == 1) return cfg.fhr_base;
    const double frac = static_cast<double>(index) / (cfg.n_subjects - 1) - 0.5;
    return std::clamp(cfg.fhr_base + frac * cfg.fhr_spread, 90.0, 200.0);
}

/// Mean of 60/interval over beats whose peak lies in each 3.75 s segment.
inline std::vector<double> segment_fhr_truth(const std::vector<double>& peaks, std::size_t n_segments) {
    std::vector<double> out(n_segments, 0.0);
    for (std::size_t s = 0; s < n_segments; ++s) {
        const double a = static_cast<double>(s) * preprocess::segment_seconds, b = a + preprocess::segment_seconds;
        double sum = 0.0;
        int count = 0;
        for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
            if (peaks[k] >= a && peaks[k] < b) {
                sum += 60.0 / (peaks[k + 1] - peaks[k]);
                ++count;
            }
        }
        out[s] = count ? sum / count : 0.0;
    }
    return out;
}

inline SubjectRecord gen_subject(const SynthConfig& base_cfg, int index) {
    SynthConfig cfg = base_cfg;
    cfg.fhr_base = subject_fhr_base(base_cfg, index);
    const std::string tag = "subject/" + std::to_string(index) + "/";
    auto rhythm_rng = substream(cfg.seed, tag + "rhythm");
    auto dus_rng = substream(cfg.seed, tag + "dus");
    auto chan_rng = substream(cfg.seed, tag + "channels");
    auto annot_rng = substream(cfg.seed, tag + "annotations");

    SubjectRecord rec;
    rec.subject_id = subject_name(index);
    auto beats = gen_fecg(cfg, rhythm_rng);
    rec.peaks = beats.peaks;
    rec.dus = gen_dus(beats.peaks, cfg, dus_rng);

    // Channels: gain, baseline wander and noise; channel quality order is shuffled.
    const auto n_ch = static_cast<std::size_t>(cfg.n_channels);
    std::vector<std::size_t> quality(n_ch);
    for (std::size_t c = 0; c < n_ch; ++c) quality[c] = c;
    std::shuffle(quality.begin(), quality.end(), chan_rng);
    std::uniform_real_distribution<double> gain_dist(0.6, 1.4), phase_dist(0.0, 2.0 * std::numbers::pi);
    double clean_power = 0.0;
    for (double v : beats.ecg.samples) clean_power += v * v;
    clean_power /= static_cast<double>(beats.ecg.size());
    std::vector<double> noise_sd(n_ch);
    for (std::size_t c = 0; c < n_ch; ++c) {
        const double gain = gain_dist(chan_rng);
        const double wander_phase = phase_dist(chan_rng);
        const double snr_db = cfg.fecg_snr_db - 4.0 * static_cast<double>(quality[c]);
        noise_sd[c] = gain * std::sqrt(clean_power / std::pow(10.0, snr_db / 10.0));
        std::normal_distribution<double> gauss(0.0, noise_sd[c]);
        Waveform ch{beats.ecg.samples, cfg.fecg_fs};
        for (std::size_t i = 0; i < ch.size(); ++i) {
            const double t = static_cast<double>(i) / cfg.fecg_fs;
            ch.samples[i] = gain * ch.samples[i] + 0.2 * std::sin(2.0 * std::numbers::pi * 0.3 * t + wander_phase) + gauss(chan_rng);
        }
        rec.fecg_channels.push_back(std::move(ch));
    }

    // Segments and (optionally corrupted) annotations.
    const auto n_seg = static_cast<std::size_t>(std::floor(cfg.duration_s / preprocess::segment_seconds + 1e-9));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> kind_dist(0, 3);
    std::uniform_int_distribution<std::size_t> chan_pick(0, n_ch - 1);
    for (std::size_t s = 0; s < n_seg; ++s) {
        SegmentAnnotation seg;
        seg.start = static_cast<double>(s) * preprocess::segment_seconds;
        seg.fecg_sqi.assign(n_ch, {1, 1});
        std::vector<double> effective_noise = noise_sd;

        if (u01(annot_rng) < cfg.corruption_fraction) {
            const int kind = kind_dist(annot_rng);
            const std::size_t c = chan_pick(annot_rng);
            auto span_of = [&](const Waveform& w) {
                return std::pair(static_cast<std::size_t>(std::llround(seg.start * w.fs)),
                                 std::min(w.size(), static_cast<std::size_t>(std::llround(seg.end() * w.fs))));
            };
            if (kind == 0) {  // DUS interference
                const auto [a, b] = span_of(rec.dus);
                std::normal_distribution<double> g(0.0, 3.0 * std::sqrt(clean_power));
                for (std::size_t i = a; i < b; ++i) rec.dus.samples[i] += g(annot_rng) * 3.0;
                seg.dus_sqi = {3, 3};
            } else if (kind == 1) {  // DUS silent
                const auto [a, b] = span_of(rec.dus);
                for (std::size_t i = a; i < b; ++i) rec.dus.samples[i] *= 1e-3;
                seg.dus_sqi = {5, 5};
            } else {  // FECG channel noise: heavy (excluded) or mild
                const bool heavy = kind == 2;
                auto& ch = rec.fecg_channels[c];
                const auto [a, b] = span_of(ch);
                const double sd = (heavy ? 2.0 : 0.4) * std::sqrt(clean_power);
                std::normal_distribution<double> g(0.0, sd);
                for (std::size_t i = a; i < b; ++i) ch.samples[i] += g(annot_rng);
                seg.fecg_sqi[c] = heavy ? std::array<int, 2>{4, 3} : std::array<int, 2>{2, 2};
                effective_noise[c] += sd;
            }
        }
        std::vector<std::size_t> order(n_ch);
        for (std::size_t c = 0; c < n_ch; ++c) order[c] = c;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return effective_noise[a] < effective_noise[b]; });
        seg.auto_rank.assign(n_ch, 0);
        for (std::size_t r = 0; r < n_ch; ++r) seg.auto_rank[order[r]] = static_cast<int>(r) + 1;
        rec.segments.push_back(std::move(seg));
    }
    rec.truth = preprocess::SubjectTruth{segment_fhr_truth(rec.peaks, n_seg), cfg.lag_s};
    return rec;
}

/// All subjects; each draws from its own substreams so order does not matter.
inline std::vector<SubjectRecord> gen_dataset(const SynthConfig& cfg) {
    validate(cfg);
    std::vector<SubjectRecord> out;
    for (int i = 0; i < cfg.n_subjects; ++i) out.push_back(gen_subject(cfg, i));
    return out;
}

} // namespace fedus::synth
