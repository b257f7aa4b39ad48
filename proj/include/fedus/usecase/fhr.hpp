#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fedus/error.hpp"
#include "fedus/metrics/svg.hpp"
#include "fedus/model/forward.hpp"
#include "fedus/parallel.hpp"
#include "fedus/preprocess/beats.hpp"
#include "fedus/preprocess/envelopes.hpp"

namespace fedus::usecase {

using signal::Waveform;

inline constexpr double segment_seconds = preprocess::segment_seconds;
inline constexpr double dus_rate = preprocess::dus_rate;
inline constexpr std::size_t segment_samples = 7500;  // 3.75 s at 2 kHz
inline constexpr std::size_t crossfade_samples = 40;  // 20 ms at 2 kHz

// ------------------------------------------------------------ stitching

/// What a per-beat generator sees: the model input window plus its placement.
struct BeatInput {
    std::vector<float> fecg_in;  // L_in samples, normalized and zero-padded as in training
    double peak_time = 0.0;      // seconds, same time base as the FECG channel
    std::size_t gap = 0;         // DUS samples until the next peak
};

using BeatGenerator = std::function<std::vector<float>(const BeatInput&)>;

inline BeatGenerator model_generator(const model::ModelParams<float>& p) {
    return [&p](const BeatInput& b) { return model::forward(p, std::span<const float>(b.fecg_in)); };
}

/// Builds the model input for the beat starting at peaks[k], cut like
/// extract_beat_pairs: up to the next peak, at most L_in samples.
inline std::optional<BeatInput> beat_input(const Waveform& fecg, const std::vector<double>& peaks, std::size_t k,
                                           std::size_t l_in, double out_fs) {
    const double t0 = peaks[k];
    const double max_span = static_cast<double>(l_in) / fecg.fs;
    const double t1 = k + 1 < peaks.size() ? peaks[k + 1] : t0 + max_span;
    if (t0 < 0.0) return std::nullopt;
    const auto s0 = static_cast<std::size_t>(std::lround(t0 * fecg.fs));
    const auto s1 = static_cast<std::size_t>(std::lround(t1 * fecg.fs));
    BeatInput b;
    b.peak_time = t0;
    b.gap = static_cast<std::size_t>(std::max<long>(0, std::lround(t1 * out_fs) - std::lround(t0 * out_fs)));
    if (!preprocess::detail::normalized_window(fecg.samples, s0, std::min(l_in, s1 > s0 ? s1 - s0 : 0), l_in, b.fecg_in))
        return std::nullopt;
    return b;
}

/// Peaks (sorted, seconds) with start <= t < start + 3.75 s.
inline std::vector<double> peaks_in_segment(const std::vector<double>& peaks, double start) {
    std::vector<double> out;
    for (double p : peaks)
        if (p >= start && p < start + segment_seconds) out.push_back(p);
    return out;
}

/// Stitches per-beat generations into the 3.75 s DUS segment starting at `start`.
///
/// `peaks` holds all R peaks of the recording (sorted, seconds); the beat that
/// began before the segment and the peak after it are used for placement. Each
/// beat's output is placed at its peak and cropped to the gap before the next
/// peak; junctions blend linearly over 20 ms centered on the next peak.
inline Waveform generate_segment(const BeatGenerator& gen, const Waveform& fecg, const std::vector<double>& peaks,
                                 double start, std::size_t l_in = model::samples_per_beat) {
    signal::validate(fecg);
    if (peaks_in_segment(peaks, start).empty()) throw DataError("generate_segment: no peaks in segment");
    const double end = start + segment_seconds;
    auto first = std::upper_bound(peaks.begin(), peaks.end(), start);
    if (first != peaks.begin()) --first;  // beat already running at the segment start
    const auto last = std::lower_bound(peaks.begin(), peaks.end(), end);

    const auto base = std::lround(start * dus_rate);
    Waveform out{std::vector<double>(segment_samples, 0.0), dus_rate};
    struct Placed {
        long onset;
        std::vector<float> y;
    };
    std::vector<Placed> beats;
    for (auto it = first; it != last; ++it) {
        const auto k = static_cast<std::size_t>(it - peaks.begin());
        auto in = beat_input(fecg, peaks, k, l_in, dus_rate);
        if (!in) {
            beats.push_back({std::lround(*it * dus_rate) - base, {}});
            continue;
        }
        auto y = gen(*in);
        if (y.size() != model::output_ratio * l_in)
            throw ModelError("generate_segment: generator returned " + std::to_string(y.size()) + " samples");
        beats.push_back({std::lround(in->peak_time * dus_rate) - base, std::move(y)});
    }
    const long next_onset = last != peaks.end() ? std::lround(*last * dus_rate) - base : std::numeric_limits<long>::max();

    auto value = [&](std::size_t b, long t) -> double {
        const auto& pb = beats[b];
        const long i = t - pb.onset;
        if (i < 0 || pb.y.empty() || i >= static_cast<long>(pb.y.size())) return 0.0;
        return pb.y[static_cast<std::size_t>(i)];
    };
    const long half = static_cast<long>(crossfade_samples / 2);
    for (std::size_t b = 0; b < beats.size(); ++b) {
        const long lo = std::max<long>(0, beats[b].onset);
        const long hi = std::min<long>(static_cast<long>(segment_samples),
                                       b + 1 < beats.size() ? beats[b + 1].onset : next_onset);
        for (long t = lo; t < hi; ++t) out.samples[static_cast<std::size_t>(t)] = value(b, t);
    }
    // Junctions: (1-w)*previous beat + w*next beat over [J - 10 ms, J + 10 ms).
    for (std::size_t b = 1; b < beats.size(); ++b) {
        const long j = beats[b].onset;
        for (long t = j - half; t < j + half; ++t) {
            if (t < 0 || t >= static_cast<long>(segment_samples)) continue;
            const double w = (static_cast<double>(t - (j - half)) + 0.5) / static_cast<double>(crossfade_samples);
            out.samples[static_cast<std::size_t>(t)] = (1.0 - w) * value(b - 1, t) + w * value(b, t);
        }
    }
    return out;
}

inline Waveform generate_segment(const model::ModelParams<float>& p, const Waveform& fecg,
                                 const std::vector<double>& peaks, double start) {
    if (p.arch.n_beats != 1) throw ConfigError("generate_segment: use case needs a single-beat model");
    return generate_segment(model_generator(p), fecg, peaks, start, p.arch.l_in);
}

// -------------------------------------------------------------- heart rate

struct FhrEstimate {
    double bpm = 0.0;
    double peak_correlation = 0.0;
    bool valid = false;
};

struct FhrConfig {
    double min_lag_s = 0.30;  // 200 bpm
    double max_lag_s = 0.75;  // 80 bpm
    double min_correlation = 0.3;
    double envelope_lpf_hz = 8.0;
    double envelope_fs = 250.0;
};

/// FHR from the autocorrelation of the homomorphic envelope. Invalid when no
/// interior correlation peak above the threshold exists in the lag range.
inline FhrEstimate estimate_fhr(const Waveform& dus, const FhrConfig& cfg = {}) {
    signal::validate(dus, 4);
    const auto env_full = preprocess::homomorphic_envelope(dus, cfg.envelope_lpf_hz);
    // Decimate the smooth envelope by block averaging.
    const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(dus.fs / cfg.envelope_fs)));
    const double fs = dus.fs / static_cast<double>(step);
    std::vector<double> e(env_full.size() / step);
    for (std::size_t i = 0; i < e.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < step; ++j) s += env_full.samples[i * step + j];
        e[i] = s / static_cast<double>(step);
    }
    FhrEstimate r;
    const auto lo = static_cast<std::size_t>(std::floor(cfg.min_lag_s * fs));
    const auto hi = static_cast<std::size_t>(std::ceil(cfg.max_lag_s * fs));
    if (e.size() < hi + 2) return r;
    double mean = 0.0;
    for (double v : e) mean += v;
    mean /= static_cast<double>(e.size());
    for (double& v : e) v -= mean;
    double r0 = 0.0;
    for (double v : e) r0 += v * v;
    if (!(r0 > 0.0)) return r;

    auto acf = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < e.size(); ++i) s += e[i] * e[i + lag];
        return s / r0;
    };
    std::vector<double> rho(hi + 2);
    for (std::size_t lag = lo - 1; lag <= hi + 1; ++lag) rho[lag] = acf(lag);
    std::size_t best = 0;
    for (std::size_t lag = lo; lag <= hi; ++lag)
        if (rho[lag] >= rho[lag - 1] && rho[lag] >= rho[lag + 1] && (best == 0 || rho[lag] > rho[best])) best = lag;
    if (best == 0) return r;
    r.peak_correlation = rho[best];
    const double a = rho[best - 1], b = rho[best], c = rho[best + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = denom < 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
    const double lag_s = (static_cast<double>(best) + shift) / fs;
    r.bpm = 60.0 / lag_s;
    r.valid = r.peak_correlation >= cfg.min_correlation && r.bpm >= 60.0 && r.bpm <= 240.0;
    return r;
}

/// 60 / mean inter-peak interval.
inline double fhr_label(const std::vector<double>& peaks) {
    if (peaks.size() < 2) throw DataError("fhr_label: need at least two peaks");
    const double span = peaks.back() - peaks.front();
    if (!(span > 0.0)) throw DataError("fhr_label: peaks must be increasing");
    return 60.0 / (span / static_cast<double>(peaks.size() - 1));
}

// -------------------------------------------------------------- agreement

struct FhrResult {
    std::string segment_id;
    double fhr_label = 0.0;
    double fhr_est = 0.0;
    bool valid = false;
};

struct AgreementStats {
    double bias = 0.0;
    double sd = 0.0;
    double loa_lo = 0.0, loa_hi = 0.0;
    double bland_altman = 0.0;
    double rmse_bpm = 0.0, mae_bpm = 0.0;
    double picp_5bpm = 0.0;
    std::size_t n_valid = 0, n_total = 0;
    double coverage = 0.0;  // valid / total
};

/// Fraction of valid results with |est - label| <= threshold.
inline double picp(const std::vector<FhrResult>& results, double threshold_bpm) {
    std::size_t n = 0, hit = 0;
    for (const auto& r : results) {
        if (!r.valid) continue;
        ++n;
        if (std::abs(r.fhr_est - r.fhr_label) <= threshold_bpm) ++hit;
    }
    if (n == 0) throw DataError("picp: no valid results");
    return static_cast<double>(hit) / static_cast<double>(n);
}

inline AgreementStats agreement(const std::vector<FhrResult>& results) {
    std::vector<double> d;
    for (const auto& r : results)
        if (r.valid) d.push_back(r.fhr_est - r.fhr_label);
    if (d.size() < 2) throw DataError("agreement: need at least two valid results, have " + std::to_string(d.size()));
    // Sorted sums make the statistics independent of result order.
    std::sort(d.begin(), d.end());
    const auto s = metrics::summarize(d);
    AgreementStats a;
    a.n_valid = d.size();
    a.n_total = results.size();
    a.coverage = static_cast<double>(a.n_valid) / static_cast<double>(a.n_total);
    a.bias = s.mean;
    a.sd = s.std;
    a.loa_lo = a.bias - 1.96 * a.sd;
    a.loa_hi = a.bias + 1.96 * a.sd;
    a.bland_altman = std::max(std::abs(a.loa_lo), std::abs(a.loa_hi));
    std::vector<double> sq(d.size()), ab(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) sq[i] = d[i] * d[i], ab[i] = std::abs(d[i]);
    std::sort(ab.begin(), ab.end());
    std::sort(sq.begin(), sq.end());
    a.rmse_bpm = std::sqrt(metrics::summarize(sq).mean);
    a.mae_bpm = metrics::summarize(ab).mean;
    a.picp_5bpm = picp(results, 5.0);
    return a;
}

// ------------------------------------------------------------ quality proxy

struct QualityCheck {
    double psd_peak_hz = 0.0;
    bool spectral_ok = false;
    bool periodic_ok = false;
    bool good() const { return spectral_ok && periodic_ok; }
};

/// Stand-in for a signal quality classifier: the spectrum must peak in
/// [150, 300] Hz and the envelope must be periodic at a plausible heart rate.
inline QualityCheck assess_quality(const Waveform& dus, const FhrConfig& cfg = {}) {
    QualityCheck q;
    const auto psd = signal::welch_psd(dus, 256, 0.5);
    const auto it = std::max_element(psd.power.begin(), psd.power.end());
    q.psd_peak_hz = psd.freqs[static_cast<std::size_t>(it - psd.power.begin())];
    q.spectral_ok = q.psd_peak_hz >= 150.0 && q.psd_peak_hz <= 300.0;
    q.periodic_ok = estimate_fhr(dus, cfg).valid;
    return q;
}

// ------------------------------------------------------------------ runner

struct SegmentOutcome {
    FhrResult fhr;
    QualityCheck quality;
};

/// Generates and scores every accepted segment of a prepared subject that holds
/// at least two R peaks.
inline std::vector<SegmentOutcome> run_subject(const BeatGenerator& gen, const preprocess::SubjectRecord& rec,
                                               std::size_t l_in, const FhrConfig& cfg = {}, unsigned jobs = 1) {
    struct Job {
        double start;
        std::size_t channel;
        std::size_t index;
    };
    std::vector<Job> todo;
    for (const auto& run : preprocess::accepted_runs(rec))
        for (const auto& [seg, ch] : run.segments)
            if (peaks_in_segment(rec.peaks, seg.start).size() >= 2)
                todo.push_back({seg.start, ch, static_cast<std::size_t>(std::lround(seg.start / segment_seconds))});
    std::vector<SegmentOutcome> out(todo.size());
    parallel_for(todo.size(), jobs, [&](std::size_t i) {
        const auto& j = todo[i];
        const auto dus = generate_segment(gen, rec.fecg_channels[j.channel], rec.peaks, j.start, l_in);
        const auto est = estimate_fhr(dus, cfg);
        char id[64];
        std::snprintf(id, sizeof id, "%s/%03zu", rec.subject_id.c_str(), j.index);
        out[i].fhr = {id, fhr_label(peaks_in_segment(rec.peaks, j.start)), est.bpm, est.valid};
        out[i].quality = assess_quality(dus, cfg);
    });
    return out;
}

// ----------------------------------------------------------------- outputs

inline void write_results_csv(const std::string& path, const std::vector<FhrResult>& results) {
    std::string text = "segment_id,fhr_label,fhr_est,valid\n";
    char buf[160];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%d\n", r.segment_id.c_str(), r.fhr_label, r.fhr_est, r.valid ? 1 : 0);
        text += buf;
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open for writing: " + path);
    std::fwrite(text.data(), 1, text.size(), f);
    if (std::fclose(f) != 0) throw DataError("write failed: " + path);
}

inline std::string agreement_csv(const AgreementStats& a) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "bias_bpm,sd_bpm,loa_lo_bpm,loa_hi_bpm,bland_altman_bpm,rmse_bpm,mae_bpm,picp_5bpm,n_valid,n_total,coverage\n"
                  "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%zu,%zu,%.9g\n",
                  a.bias, a.sd, a.loa_lo, a.loa_hi, a.bland_altman, a.rmse_bpm, a.mae_bpm, a.picp_5bpm, a.n_valid,
                  a.n_total, a.coverage);
    return buf;
}

/// Bland-Altman scatter: mean of (label, est) against est - label, with bias and limits.
inline void write_bland_altman_svg(const std::string& path, const std::vector<FhrResult>& results,
                                   const AgreementStats& a) {
    std::vector<double> x, y;
    for (const auto& r : results)
        if (r.valid) x.push_back(0.5 * (r.fhr_est + r.fhr_label)), y.push_back(r.fhr_est - r.fhr_label);
    metrics::SvgPlot plot("Bland-Altman: generated-DUS FHR vs FECG label", "Mean FHR (bpm)", "Difference (bpm)");
    plot.scatter("segments", "#1f77b4", x, y);
    char label[64];
    std::snprintf(label, sizeof label, "bias %.2f", a.bias);
    plot.rule(a.bias, label, "#333333");
    std::snprintf(label, sizeof label, "+1.96 SD %.2f", a.loa_hi);
    plot.rule(a.loa_hi, label, "#d62728");
    std::snprintf(label, sizeof label, "-1.96 SD %.2f", a.loa_lo);
    plot.rule(a.loa_lo, label, "#d62728");
    plot.save(path);
}

inline void write_bland_altman_csv(const std::string& path, const std::vector<FhrResult>& results) {
    std::string text = "segment_id,mean_bpm,diff_bpm\n";
    char buf[160];
    for (const auto& r : results) {
        if (!r.valid) continue;
        std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g\n", r.segment_id.c_str(), 0.5 * (r.fhr_est + r.fhr_label),
                      r.fhr_est - r.fhr_label);
        text += buf;
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open for writing: " + path);
    std::fwrite(text.data(), 1, text.size(), f);
    if (std::fclose(f) != 0) throw DataError("write failed: " + path);
}

} // namespace fedus::usecase
