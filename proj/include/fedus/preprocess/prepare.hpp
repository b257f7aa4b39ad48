#pragma once

#include <cmath>
#include <utility>

#include "fedus/preprocess/beats.hpp"
#include "fedus/preprocess/envelopes.hpp"
#include "fedus/preprocess/lag.hpp"
#include "fedus/signal/filters.hpp"
#include "fedus/signal/resample.hpp"

namespace fedus::preprocess {

struct PrepareConfig {
    double dus_lo_hz = 25.0;
    double dus_hi_hz = 600.0;
    int dus_order = 2;
    double fecg_lo_hz = 3.0;
    double fecg_hi_hz = 45.0;
    double envelope_lpf_hz = 8.0;
    double max_lag_s = 2.0;
    bool snap_lag_to_fecg_grid = true;  // shift DUS by a whole number of FECG samples
};

struct PreparedSubject {
    SubjectRecord record;  // filtered, segment-normalized, lag removed
    double lag_s = 0.0;
};

/// Min-max normalizes every annotated segment in place (constant segments are left as is).
inline void normalize_segments(Waveform& w, const std::vector<SegmentAnnotation>& segments) {
    for (const auto& seg : segments) {
        const auto s = static_cast<std::size_t>(std::lround(seg.start * w.fs));
        const auto e = std::min(w.size(), static_cast<std::size_t>(std::lround(seg.end() * w.fs)));
        if (e <= s + 1) continue;
        std::span<double> part(w.samples.data() + s, e - s);
        const auto [lo, hi] = std::minmax_element(part.begin(), part.end());
        if (!(*hi > *lo)) continue;
        const auto norm = signal::minmax_normalize(std::span<const double>(part));
        std::copy(norm.begin(), norm.end(), part.begin());
    }
}

/// DUS homomorphic and FECG Pan-Tompkins envelopes at 250 Hz, concatenated over
/// accepted segments (FECG from each segment's fused channel).
inline std::pair<Waveform, Waveform> lag_envelopes(const SubjectRecord& rec, double lpf_hz = 8.0) {
    const double fs = fecg_rate;
    auto dus_env = signal::resample(homomorphic_envelope(rec.dus, lpf_hz), fs);
    std::vector<Waveform> fecg_env;
    for (const auto& ch : rec.fecg_channels) fecg_env.push_back(pan_tompkins_envelope(signal::resample(ch, fs)));

    Waveform d{{}, fs}, f{{}, fs};
    for (const auto& run : accepted_runs(rec)) {
        for (const auto& [seg, ch] : run.segments) {
            const auto s = static_cast<std::size_t>(std::lround(seg.start * fs));
            const auto e = static_cast<std::size_t>(std::lround(seg.end() * fs));
            const auto& fe = fecg_env[ch].samples;
            for (std::size_t i = s; i < e && i < dus_env.size() && i < fe.size(); ++i) {
                d.samples.push_back(dus_env.samples[i]);
                f.samples.push_back(fe[i]);
            }
        }
    }
    if (d.samples.empty()) throw DataError(rec.subject_id + ": no accepted segments for lag estimation");
    return {std::move(d), std::move(f)};
}

/// Resample, filter, segment-normalize, then estimate and remove the subject's
/// FECG/DUS lag.
inline PreparedSubject prepare_subject(const SubjectRecord& raw, const PrepareConfig& cfg = {}) {
    validate_record(raw);
    PreparedSubject out;
    auto& rec = out.record;
    rec.subject_id = raw.subject_id;
    rec.peaks = raw.peaks;
    rec.segments = raw.segments;
    rec.truth = raw.truth;

    rec.dus = signal::butter_bandpass(signal::resample(raw.dus, dus_rate), cfg.dus_lo_hz, cfg.dus_hi_hz, cfg.dus_order);
    for (const auto& ch : raw.fecg_channels)
        rec.fecg_channels.push_back(signal::fir_bandpass(signal::resample(ch, fecg_rate), cfg.fecg_lo_hz, cfg.fecg_hi_hz));
    normalize_segments(rec.dus, rec.segments);
    for (auto& ch : rec.fecg_channels) normalize_segments(ch, rec.segments);

    const auto [env_dus, env_fecg] = lag_envelopes(rec, cfg.envelope_lpf_hz);
    out.lag_s = estimate_lag(env_dus, env_fecg, cfg.max_lag_s);
    const double shift = cfg.snap_lag_to_fecg_grid ? std::round(out.lag_s * fecg_rate) / fecg_rate : out.lag_s;
    rec.dus = remove_lag(rec.dus, shift);
    return out;
}

} // namespace fedus::preprocess
