#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fedus/preprocess/fusion.hpp"
#include "fedus/preprocess/records.hpp"
#include "fedus/signal/normalize.hpp"

namespace fedus::preprocess {

/// Contiguous stretch of accepted segments, each with its fused channel.
struct AcceptedRun {
    double start = 0.0, end = 0.0;
    std::vector<std::pair<SegmentAnnotation, std::size_t>> segments;

    std::size_t channel_at(double t) const {
        for (const auto& [seg, ch] : segments)
            if (t >= seg.start && t < seg.end()) return ch;
        return segments.back().second;
    }
};

inline std::vector<AcceptedRun> accepted_runs(const SubjectRecord& rec) {
    std::vector<std::pair<SegmentAnnotation, std::size_t>> ok;
    for (const auto& seg : rec.segments)
        if (auto ch = select_fecg_channel(seg)) ok.emplace_back(seg, *ch);
    std::sort(ok.begin(), ok.end(), [](const auto& a, const auto& b) { return a.first.start < b.first.start; });

    std::vector<AcceptedRun> runs;
    for (auto& item : ok) {
        if (runs.empty() || std::abs(item.first.start - runs.back().end) > 1e-6) {
            runs.push_back({item.first.start, item.first.end(), {}});
        }
        runs.back().end = item.first.end();
        runs.back().segments.push_back(std::move(item));
    }
    return runs;
}

namespace detail {

// Normalizes the span [0, len) of `src` starting at `offset` and zero-pads to `total`.
inline bool normalized_window(const std::vector<double>& src, std::size_t offset, std::size_t len,
                              std::size_t total, std::vector<float>& out) {
    if (offset >= src.size()) return false;
    len = std::min({len, total, src.size() - offset});
    if (len < 2) return false;
    std::vector<double> span(src.begin() + static_cast<std::ptrdiff_t>(offset),
                             src.begin() + static_cast<std::ptrdiff_t>(offset + len));
    const auto [lo, hi] = std::minmax_element(span.begin(), span.end());
    if (!(*hi > *lo)) return false;
    const auto norm = signal::minmax_normalize(span);
    out.assign(total, 0.0f);
    for (std::size_t i = 0; i < len; ++i) out[i] = static_cast<float>(norm[i]);
    return true;
}

} // namespace detail

/// Cuts aligned (FECG, DUS) windows starting at each R peak.
///
/// Expects a prepared record: FECG at 250 Hz, DUS at 2000 Hz, lag removed.
/// A window covers `n_beats` beats, ending at the following peak when it lies
/// in the same accepted run, otherwise after n_beats*L_in samples or at the
/// run end. Both signals are cut on their own sample grids at the same
/// instants. Spans are min-max normalized, then zero-padded to n_beats*L_in
/// (FECG) and 8*n_beats*L_in (DUS). Windows advance by one beat.
inline std::vector<BeatPair> extract_beat_pairs(const SubjectRecord& rec, int n_beats, std::size_t l_in) {
    if (n_beats < 1 || n_beats > 3) throw std::invalid_argument("extract_beat_pairs: n_beats must be 1, 2 or 3");
    if (l_in == 0) throw std::invalid_argument("extract_beat_pairs: L_in must be positive");
    if (rec.fecg_channels.empty()) throw DataError(rec.subject_id + ": no FECG channels");
    const double fs_in = rec.fecg_channels.front().fs;
    if (std::abs(rec.dus.fs - fs_in * static_cast<double>(rate_ratio)) > 1e-9)
        throw DataError(rec.subject_id + ": DUS rate must be 8x the FECG rate");

    const std::size_t n = static_cast<std::size_t>(n_beats);
    const std::size_t in_len = n * l_in;
    const std::size_t out_len = rate_ratio * in_len;
    const double max_span_s = static_cast<double>(in_len) / fs_in;

    std::vector<BeatPair> pairs;
    for (const auto& run : accepted_runs(rec)) {
        const auto first = std::lower_bound(rec.peaks.begin(), rec.peaks.end(), run.start);
        const auto last = std::lower_bound(rec.peaks.begin(), rec.peaks.end(), run.end);
        const std::vector<double> peaks(first, last);
        for (std::size_t i = 0; i + n <= peaks.size(); ++i) {
            const double t0 = peaks[i];
            const double t1 = i + n < peaks.size() ? peaks[i + n] : std::min(t0 + max_span_s, run.end);
            const auto s0 = static_cast<std::size_t>(std::lround(t0 * fs_in));
            const auto s1 = static_cast<std::size_t>(std::lround(t1 * fs_in));
            const std::size_t len = std::min(in_len, s1 > s0 ? s1 - s0 : 0);
            // DUS bounds are rounded on its own, finer grid.
            const auto d0 = static_cast<std::size_t>(std::lround(t0 * rec.dus.fs));
            const auto d1 = static_cast<std::size_t>(std::lround(t1 * rec.dus.fs));
            const std::size_t dus_len = std::min(out_len, d1 > d0 ? d1 - d0 : 0);

            BeatPair p;
            p.subject_id = rec.subject_id;
            p.peak_time = t0;
            const auto& channel = rec.fecg_channels[run.channel_at(t0)].samples;
            if (!detail::normalized_window(channel, s0, len, in_len, p.fecg_in)) continue;
            if (!detail::normalized_window(rec.dus.samples, d0, dus_len, out_len, p.dus_out))
                continue;
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

inline std::vector<std::string> subject_ids(const std::vector<BeatPair>& pairs) {
    std::set<std::string> ids;
    for (const auto& p : pairs) ids.insert(p.subject_id);
    return {ids.begin(), ids.end()};
}

/// Leave-one-subject-out partition: (train, test), both in input order.
inline std::pair<std::vector<BeatPair>, std::vector<BeatPair>> loso_split(const std::vector<BeatPair>& pairs,
                                                                        const std::string& held_out) {
    const auto ids = subject_ids(pairs);
    if (ids.size() < 2) throw DataError("loso_split: need at least two subjects");
    if (std::find(ids.begin(), ids.end(), held_out) == ids.end())
        throw DataError("loso_split: unknown subject '" + held_out + "'");
    std::pair<std::vector<BeatPair>, std::vector<BeatPair>> out;
    for (const auto& p : pairs) (p.subject_id == held_out ? out.second : out.first).push_back(p);
    return out;
}

} // namespace fedus::preprocess
